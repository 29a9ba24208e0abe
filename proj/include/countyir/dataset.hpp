#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

namespace countyir {

// One county row: identity, exposure denominators, the observed age-adjusted
// incidence rate (cases per 100,000 females), and the feature vector in
// taxonomy order. NaN marks a missing feature value when the loader was asked
// to tolerate them.
struct CountyRecord {
    std::string fips;   // 5 digits, zero padded, unique within a table
    std::string name;
    std::string state;
    std::int64_t female_pop = 0;
    double observed_ir = 0.0;
    std::vector<double> features;
};

struct CountyTable {
    std::vector<std::string> feature_names;
    std::vector<CountyRecord> records;

    std::size_t n_rows() const { return records.size(); }
    std::size_t n_features() const { return feature_names.size(); }
};

enum class FeatureCategory { socioeconomics, family, healthcare, lifestyle, environment };

const char* to_string(FeatureCategory category);
FeatureCategory parse_category(const std::string& text);

struct TaxonomyEntry {
    std::string feature_name;
    FeatureCategory category = FeatureCategory::socioeconomics;
    bool non_modifiable = false;  // exactly one of these two is set
    bool modifiable = false;
    bool expert = false;
    std::string definition;
};

struct FeatureTaxonomy {
    std::vector<TaxonomyEntry> entries;

    std::size_t size() const { return entries.size(); }
    int count_non_modifiable() const;
    int count_modifiable() const;
    int count_expert() const;
    std::vector<std::string> names() const;
    const TaxonomyEntry* find(const std::string& name) const;
};

// Per-column location/scale fitted on a training partition. Constant columns
// keep sd 0 and standardize to all zeros. When medians are present they fill
// missing cells before centering.
struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;      // sample convention, n-1 denominator; 0 flags a constant column
    double response_mean = 0.0;
    Eigen::VectorXd median;  // empty unless imputation was requested at fit time

    bool imputes() const { return median.size() > 0; }
    static Standardizer identity(Eigen::Index n_features);
};

struct LoadOptions {
    bool allow_missing = false;  // empty / NA cells become NaN instead of parse errors
};

// counties.csv: header `fips,name,state,female_pop,ir,<feature...>`.
CountyTable load_county_table(const std::filesystem::path& path, const LoadOptions& options = {});

// taxonomy.csv: header `feature,category,non_modifiable,modifiable,expert,definition`.
FeatureTaxonomy load_taxonomy(const std::filesystem::path& path);

// Requires identical feature name sets and reorders table columns into
// taxonomy order, which is canonical everywhere downstream.
void align_to_taxonomy(CountyTable& table, const FeatureTaxonomy& taxonomy);

// Keeps records with female_pop strictly greater than the threshold.
CountyTable filter_by_female_population(const CountyTable& table, std::int64_t threshold);

// 100 * count / denominator, valid only for 0 <= count <= denominator.
double percent_normalize(double count, double denominator);

Standardizer fit_standardizer(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& response,
                              bool impute_missing = false);
Eigen::MatrixXd apply_standardizer(const Standardizer& standardizer, const Eigen::MatrixXd& matrix);

enum class FeatureUniverse { non_modifiable_only, all, custom };

struct FeatureSelection {
    std::vector<int> column_indices;         // into taxonomy order
    std::vector<std::string> feature_names;  // same order
};

FeatureSelection select_feature_set(const FeatureTaxonomy& taxonomy, FeatureUniverse universe,
                                    const std::vector<std::string>& custom = {});

// Dense views used by the model layer. Rows follow table order.
Eigen::MatrixXd feature_matrix(const CountyTable& table);
Eigen::MatrixXd feature_matrix(const CountyTable& table, const FeatureSelection& selection);
Eigen::VectorXd response_vector(const CountyTable& table);

}  // namespace countyir
