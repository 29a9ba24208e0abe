#include "countyir/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

#include <json.hpp>

#include "countyir/error.hpp"
#include "countyir/textio.hpp"

namespace countyir {
namespace report {

namespace {

using nlohmann::json;

// Fixed cluster palette; anything else falls back to grey.
const std::vector<std::pair<std::string, std::string>> kClassPalette = {
    {"HH", "#d7191c"}, {"LL", "#2c7bb6"},      {"HL", "#fdae61"},
    {"LH", "#abd9e9"}, {"NS", "#e8e8e8"},      {"ISOLATE", "#999999"},
};
const char* kFallbackColor = "#bdbdbd";
const char* kNoDataColor = "#ffffff";

// Sequential ramp for numeric classes, light to dark.
const std::vector<std::string> kNumericRamp = {"#ffffb2", "#fecc5c", "#fd8d3c", "#f03b20",
                                               "#bd0026"};

std::string class_color(const std::string& label) {
    for (const auto& [name, color] : kClassPalette)
        if (name == label) return color;
    return kFallbackColor;
}

std::string fixed2(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.2f", v);
    return buffer;
}

struct Ring {
    std::vector<std::pair<double, double>> points;  // lon, lat
};

struct Shape {
    std::vector<Ring> rings;
    json properties;
};

void collect_polygon(const json& coordinates, std::vector<Ring>& rings) {
    for (const auto& ring_json : coordinates) {
        Ring ring;
        for (const auto& point : ring_json)
            ring.points.emplace_back(point.at(0).get<double>(), point.at(1).get<double>());
        rings.push_back(std::move(ring));
    }
}

std::vector<Shape> parse_shapes(const std::string& geojson_text) {
    json root = json::parse(geojson_text);
    if (!root.contains("features"))
        throw Error(ErrorKind::format, "geojson has no features array");
    std::vector<Shape> shapes;
    for (const auto& feature : root["features"]) {
        Shape shape;
        shape.properties = feature.value("properties", json::object());
        if (!feature.contains("geometry") || feature["geometry"].is_null()) continue;
        const auto& geometry = feature["geometry"];
        const std::string type = geometry.value("type", "");
        if (type == "Polygon") {
            collect_polygon(geometry["coordinates"], shape.rings);
        } else if (type == "MultiPolygon") {
            for (const auto& polygon : geometry["coordinates"])
                collect_polygon(polygon, shape.rings);
        } else {
            continue;  // points and lines have no area to shade
        }
        shapes.push_back(std::move(shape));
    }
    return shapes;
}

std::vector<double> quantile_breaks(std::vector<double> values, int classes) {
    std::sort(values.begin(), values.end());
    std::vector<double> breaks;  // upper bounds of the first classes-1 classes
    for (int c = 1; c < classes; ++c) {
        const double q = static_cast<double>(c) / classes;
        const double position = q * (values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(position));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = position - static_cast<double>(lo);
        breaks.push_back(values[lo] * (1 - frac) + values[hi] * frac);
    }
    return breaks;
}

std::string xml_escape(const std::string& text) {
    std::string out;
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out.push_back(c);
        }
    }
    return out;
}

}  // namespace

PropertyTable load_property_table(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw Error(ErrorKind::schema, path.string() + ": empty file");
    const auto header = split_csv_line(lines[0]);
    if (header.empty() || header[0] != "fips")
        throw Error(ErrorKind::schema, path.string() + ": first column must be 'fips'");

    PropertyTable table;
    table.columns.assign(header.begin() + 1, header.end());
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != header.size())
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(i) +
                                              " has wrong cell count");
        std::vector<PropertyValue> values;
        values.reserve(cells.size() - 1);
        for (std::size_t j = 1; j < cells.size(); ++j) {
            double number;
            if (try_parse_double(cells[j], number))
                values.emplace_back(number);
            else
                values.emplace_back(cells[j]);
        }
        table.rows[std::string(trim(cells[0]))] = std::move(values);
    }
    return table;
}

JoinResult export_geojson(const std::filesystem::path& geometry_path, const PropertyTable& table) {
    json root = json::parse(read_text_file(geometry_path));
    if (!root.contains("features") || !root["features"].is_array())
        throw Error(ErrorKind::format, geometry_path.string() + ": not a feature collection");

    JoinResult result;
    for (auto& feature : root["features"]) {
        if (!feature.contains("properties") || !feature["properties"].contains("fips"))
            throw Error(ErrorKind::format,
                        geometry_path.string() + ": feature without a fips property");
        const std::string fips = feature["properties"]["fips"].get<std::string>();
        const auto it = table.rows.find(fips);
        if (it == table.rows.end()) {
            for (const auto& column : table.columns) feature["properties"][column] = nullptr;
            ++result.unmatched;
            continue;
        }
        for (std::size_t j = 0; j < table.columns.size(); ++j) {
            const auto& value = it->second[j];
            if (std::holds_alternative<double>(value))
                feature["properties"][table.columns[j]] = std::get<double>(value);
            else
                feature["properties"][table.columns[j]] = std::get<std::string>(value);
        }
        ++result.matched;
    }
    result.geojson = root.dump();
    return result;
}

std::string render_choropleth_svg(const std::string& annotated_geojson, const std::string& column,
                                  const RenderOptions& options) {
    const std::vector<Shape> shapes = parse_shapes(annotated_geojson);
    if (shapes.empty()) throw Error(ErrorKind::render, "no polygonal features to draw");

    double min_lon = std::numeric_limits<double>::infinity();
    double max_lon = -std::numeric_limits<double>::infinity();
    double min_lat = std::numeric_limits<double>::infinity();
    double max_lat = -std::numeric_limits<double>::infinity();
    for (const auto& shape : shapes) {
        for (const auto& ring : shape.rings) {
            for (const auto& [lon, lat] : ring.points) {
                min_lon = std::min(min_lon, lon);
                max_lon = std::max(max_lon, lon);
                min_lat = std::min(min_lat, lat);
                max_lat = std::max(max_lat, lat);
            }
        }
    }
    if (!(max_lon > min_lon)) max_lon = min_lon + 1e-6;
    if (!(max_lat > min_lat)) max_lat = min_lat + 1e-6;

    const double margin = 10.0;
    const double legend_width = 150.0;
    const double draw_width = options.width - legend_width - 2 * margin;
    const double draw_height = options.height - 2 * margin;
    const double scale =
        std::min(draw_width / (max_lon - min_lon), draw_height / (max_lat - min_lat));
    auto project = [&](double lon, double lat) {
        return std::pair<double, double>{margin + (lon - min_lon) * scale,
                                         margin + (max_lat - lat) * scale};
    };

    // Work out the fill per shape plus the legend entries actually present.
    std::vector<std::string> fills(shapes.size(), kNoDataColor);
    std::vector<std::pair<std::string, std::string>> legend;  // label, color
    bool any_missing = false;

    if (options.class_column) {
        std::set<std::string> present;
        for (std::size_t s = 0; s < shapes.size(); ++s) {
            const auto& properties = shapes[s].properties;
            if (!properties.contains(column) || properties[column].is_null()) {
                any_missing = true;
                continue;
            }
            if (!properties[column].is_string())
                throw Error(ErrorKind::render, "column '" + column + "' is not categorical");
            const std::string label = properties[column].get<std::string>();
            present.insert(label);
            fills[s] = class_color(label);
        }
        for (const auto& [name, color] : kClassPalette)
            if (present.count(name)) legend.emplace_back(name, color);
        for (const auto& label : present) {
            const bool known = std::any_of(kClassPalette.begin(), kClassPalette.end(),
                                           [&](const auto& kv) { return kv.first == label; });
            if (!known) legend.emplace_back(label, kFallbackColor);
        }
    } else {
        std::vector<double> numbers;
        std::vector<double> shape_value(shapes.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t s = 0; s < shapes.size(); ++s) {
            const auto& properties = shapes[s].properties;
            if (!properties.contains(column) || properties[column].is_null()) {
                any_missing = true;
                continue;
            }
            if (!properties[column].is_number())
                throw Error(ErrorKind::render,
                            "column '" + column + "' is not numeric; use a class rendering");
            shape_value[s] = properties[column].get<double>();
            numbers.push_back(shape_value[s]);
        }
        if (numbers.empty()) throw Error(ErrorKind::render, "column '" + column + "' is empty");
        std::set<double> distinct(numbers.begin(), numbers.end());
        const int classes =
            std::max(1, std::min<int>(options.breaks, static_cast<int>(distinct.size())));
        const auto breaks = quantile_breaks(numbers, classes);
        auto class_of = [&](double value) {
            int k = 0;
            while (k < static_cast<int>(breaks.size()) && value > breaks[k]) ++k;
            return k;
        };
        auto ramp_color = [&](int k) {
            if (classes <= 1) return kNumericRamp.front();
            return kNumericRamp[static_cast<std::size_t>(k) * (kNumericRamp.size() - 1) /
                                static_cast<std::size_t>(classes - 1)];
        };
        for (std::size_t s = 0; s < shapes.size(); ++s)
            if (!std::isnan(shape_value[s])) fills[s] = ramp_color(class_of(shape_value[s]));
        const double lo = *distinct.begin();
        const double hi = *distinct.rbegin();
        for (int k = 0; k < classes; ++k) {
            const double from = k == 0 ? lo : breaks[k - 1];
            const double to = k == classes - 1 ? hi : breaks[k];
            legend.emplace_back(fmt_double(from) + " to " + fmt_double(to), ramp_color(k));
        }
    }
    if (any_missing) legend.emplace_back("no data", kNoDataColor);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(options.width) +
           "\" height=\"" + std::to_string(options.height) + "\" viewBox=\"0 0 " +
           std::to_string(options.width) + " " + std::to_string(options.height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    for (std::size_t s = 0; s < shapes.size(); ++s) {
        std::string path;
        for (const auto& ring : shapes[s].rings) {
            for (std::size_t t = 0; t < ring.points.size(); ++t) {
                const auto [x, y] = project(ring.points[t].first, ring.points[t].second);
                path += (t == 0 ? "M" : "L") + fixed2(x) + " " + fixed2(y);
            }
            path += "Z";
        }
        svg += "<path d=\"" + path + "\" fill=\"" + fills[s] +
               "\" fill-rule=\"evenodd\" stroke=\"#555555\" stroke-width=\"0.4\"/>\n";
    }

    // Legend block on the right.
    double legend_y = margin + 10.0;
    const double legend_x = options.width - legend_width;
    svg += "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    svg += "<text x=\"" + fixed2(legend_x) + "\" y=\"" + fixed2(legend_y) + "\">" +
           xml_escape(column) + "</text>\n";
    legend_y += 8.0;
    for (const auto& [label, color] : legend) {
        svg += "<rect x=\"" + fixed2(legend_x) + "\" y=\"" + fixed2(legend_y) +
               "\" width=\"14\" height=\"14\" fill=\"" + color +
               "\" stroke=\"#555555\" stroke-width=\"0.4\"/>\n";
        svg += "<text x=\"" + fixed2(legend_x + 20.0) + "\" y=\"" + fixed2(legend_y + 11.0) +
               "\">" + xml_escape(label) + "</text>\n";
        legend_y += 20.0;
    }
    svg += "</g>\n</svg>\n";
    return svg;
}

}  // namespace report
}  // namespace countyir
