#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace countyir {
namespace report {

using PropertyValue = std::variant<double, std::string>;

// Generic per-county columns to be joined into GeoJSON properties.
struct PropertyTable {
    std::vector<std::string> columns;
    std::map<std::string, std::vector<PropertyValue>> rows;  // fips -> values
};

// Loads any CSV whose first column is `fips`; numeric cells become doubles.
PropertyTable load_property_table(const std::filesystem::path& path);

struct JoinResult {
    std::string geojson;   // serialized annotated collection
    int matched = 0;
    int unmatched = 0;     // features whose fips had no table row (null properties)
};

// Joins table columns into each feature's properties by its `fips` property.
JoinResult export_geojson(const std::filesystem::path& geometry_path,
                          const PropertyTable& table);

struct RenderOptions {
    int width = 1000;
    int height = 620;
    int breaks = 5;            // quantile classes for numeric columns
    bool class_column = false; // treat the column as categorical labels
};

// Static equirectangular choropleth. Class columns use the fixed cluster
// palette; numeric columns use quantile breaks. Identical inputs produce
// identical bytes.
std::string render_choropleth_svg(const std::string& annotated_geojson,
                                  const std::string& column, const RenderOptions& options = {});

}  // namespace report
}  // namespace countyir
