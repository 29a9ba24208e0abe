#include "countyir/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "countyir/error.hpp"
#include "countyir/textio.hpp"

namespace countyir {

namespace {

bool is_missing_token(std::string_view cell) {
    const auto trimmed = trim(cell);
    return trimmed.empty() || trimmed == "NA" || trimmed == "na" || trimmed == "NaN" ||
           trimmed == "nan";
}

bool valid_fips(const std::string& fips) {
    if (fips.size() != 5) return false;
    return std::all_of(fips.begin(), fips.end(), [](char c) { return c >= '0' && c <= '9'; });
}

[[noreturn]] void cell_error(const std::filesystem::path& path, std::size_t row,
                             const std::string& column, std::string_view cell) {
    throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) + ", column '" +
                                      column + "': cannot parse '" + std::string(cell) + "'");
}

}  // namespace

const char* to_string(FeatureCategory category) {
    switch (category) {
    case FeatureCategory::socioeconomics: return "socioeconomics";
    case FeatureCategory::family: return "family";
    case FeatureCategory::healthcare: return "healthcare";
    case FeatureCategory::lifestyle: return "lifestyle";
    case FeatureCategory::environment: return "environment";
    }
    return "socioeconomics";
}

FeatureCategory parse_category(const std::string& text) {
    if (text == "socioeconomics") return FeatureCategory::socioeconomics;
    if (text == "family") return FeatureCategory::family;
    if (text == "healthcare") return FeatureCategory::healthcare;
    if (text == "lifestyle") return FeatureCategory::lifestyle;
    if (text == "environment") return FeatureCategory::environment;
    throw Error(ErrorKind::taxonomy, "unknown feature category '" + text + "'");
}

int FeatureTaxonomy::count_non_modifiable() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [](const TaxonomyEntry& e) { return e.non_modifiable; }));
}

int FeatureTaxonomy::count_modifiable() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [](const TaxonomyEntry& e) { return e.modifiable; }));
}

int FeatureTaxonomy::count_expert() const {
    return static_cast<int>(std::count_if(entries.begin(), entries.end(),
                                          [](const TaxonomyEntry& e) { return e.expert; }));
}

std::vector<std::string> FeatureTaxonomy::names() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& entry : entries) out.push_back(entry.feature_name);
    return out;
}

const TaxonomyEntry* FeatureTaxonomy::find(const std::string& name) const {
    for (const auto& entry : entries)
        if (entry.feature_name == name) return &entry;
    return nullptr;
}

Standardizer Standardizer::identity(Eigen::Index n_features) {
    Standardizer s;
    s.mean = Eigen::VectorXd::Zero(n_features);
    s.sd = Eigen::VectorXd::Ones(n_features);
    s.response_mean = 0.0;
    return s;
}

CountyTable load_county_table(const std::filesystem::path& path, const LoadOptions& options) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw Error(ErrorKind::schema, path.string() + ": empty file");

    const auto header = split_csv_line(lines[0]);
    const std::vector<std::string> required = {"fips", "name", "state", "female_pop", "ir"};
    for (std::size_t i = 0; i < required.size(); ++i) {
        if (i >= header.size() || header[i] != required[i])
            throw Error(ErrorKind::schema,
                        path.string() + ": missing required column '" + required[i] + "'");
    }

    CountyTable table;
    table.feature_names.assign(header.begin() + required.size(), header.end());
    for (const auto& name : table.feature_names) {
        if (trim(name).empty())
            throw Error(ErrorKind::schema, path.string() + ": empty feature column name");
    }

    std::unordered_set<std::string> seen_fips;
    table.records.reserve(lines.size() - 1);
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto cells = split_csv_line(lines[row]);
        if (cells.size() != header.size())
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) + " has " +
                                              std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(header.size()));
        CountyRecord record;
        record.fips = std::string(trim(cells[0]));
        record.name = cells[1];
        record.state = std::string(trim(cells[2]));
        if (!valid_fips(record.fips))
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) +
                                              ": fips '" + record.fips +
                                              "' is not a 5-digit code");
        if (!seen_fips.insert(record.fips).second)
            throw Error(ErrorKind::duplicate_key,
                        path.string() + ": duplicate fips '" + record.fips + "'");
        if (!try_parse_int64(cells[3], record.female_pop) || record.female_pop < 0)
            cell_error(path, row, "female_pop", cells[3]);
        if (!try_parse_double(cells[4], record.observed_ir) || record.observed_ir < 0 ||
            !std::isfinite(record.observed_ir))
            cell_error(path, row, "ir", cells[4]);

        record.features.resize(table.feature_names.size());
        for (std::size_t j = 0; j < table.feature_names.size(); ++j) {
            const auto& cell = cells[required.size() + j];
            if (options.allow_missing && is_missing_token(cell)) {
                record.features[j] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            if (!try_parse_double(cell, record.features[j]))
                cell_error(path, row, table.feature_names[j], cell);
        }
        table.records.push_back(std::move(record));
    }
    return table;
}

FeatureTaxonomy load_taxonomy(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty()) throw Error(ErrorKind::schema, path.string() + ": empty file");

    const auto header = split_csv_line(lines[0]);
    const std::vector<std::string> expected = {"feature",    "category", "non_modifiable",
                                               "modifiable", "expert",   "definition"};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        if (i >= header.size() || header[i] != expected[i])
            throw Error(ErrorKind::schema,
                        path.string() + ": missing required column '" + expected[i] + "'");
    }

    auto parse_flag = [&](const std::string& cell, std::size_t row, const char* column) {
        const auto trimmed = trim(cell);
        if (trimmed == "0") return false;
        if (trimmed == "1") return true;
        throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(row) +
                                          ", column '" + column + "': flag must be 0 or 1, got '" +
                                          cell + "'");
    };

    FeatureTaxonomy taxonomy;
    std::unordered_set<std::string> seen;
    for (std::size_t row = 1; row < lines.size(); ++row) {
        const auto cells = split_csv_line(lines[row]);
        if (cells.size() < expected.size())
            throw Error(ErrorKind::parse,
                        path.string() + ": row " + std::to_string(row) + " is short");
        TaxonomyEntry entry;
        entry.feature_name = std::string(trim(cells[0]));
        if (entry.feature_name.empty())
            throw Error(ErrorKind::taxonomy,
                        path.string() + ": row " + std::to_string(row) + ": empty feature name");
        if (!seen.insert(entry.feature_name).second)
            throw Error(ErrorKind::taxonomy,
                        path.string() + ": duplicate feature '" + entry.feature_name + "'");
        entry.category = parse_category(std::string(trim(cells[1])));
        entry.non_modifiable = parse_flag(cells[2], row, "non_modifiable");
        entry.modifiable = parse_flag(cells[3], row, "modifiable");
        entry.expert = parse_flag(cells[4], row, "expert");
        entry.definition = cells[5];
        if (entry.non_modifiable == entry.modifiable)
            throw Error(ErrorKind::taxonomy,
                        path.string() + ": feature '" + entry.feature_name +
                            "' must be exactly one of non_modifiable / modifiable");
        taxonomy.entries.push_back(std::move(entry));
    }
    return taxonomy;
}

void align_to_taxonomy(CountyTable& table, const FeatureTaxonomy& taxonomy) {
    std::unordered_map<std::string, int> table_index;
    for (std::size_t j = 0; j < table.feature_names.size(); ++j)
        table_index.emplace(table.feature_names[j], static_cast<int>(j));

    for (const auto& name : table.feature_names) {
        if (!taxonomy.find(name))
            throw Error(ErrorKind::alignment,
                        "feature '" + name + "' in county table is absent from the taxonomy");
    }
    std::vector<int> order;
    order.reserve(taxonomy.size());
    for (const auto& entry : taxonomy.entries) {
        const auto it = table_index.find(entry.feature_name);
        if (it == table_index.end())
            throw Error(ErrorKind::alignment, "taxonomy feature '" + entry.feature_name +
                                                  "' is absent from the county table");
        order.push_back(it->second);
    }

    std::vector<std::string> new_names;
    new_names.reserve(order.size());
    for (const int j : order) new_names.push_back(table.feature_names[j]);
    for (auto& record : table.records) {
        std::vector<double> reordered(order.size());
        for (std::size_t j = 0; j < order.size(); ++j) reordered[j] = record.features[order[j]];
        record.features = std::move(reordered);
    }
    table.feature_names = std::move(new_names);
}

CountyTable filter_by_female_population(const CountyTable& table, std::int64_t threshold) {
    if (threshold < 0) throw Error(ErrorKind::parameter, "population threshold must be >= 0");
    CountyTable filtered;
    filtered.feature_names = table.feature_names;
    for (const auto& record : table.records)
        if (record.female_pop > threshold) filtered.records.push_back(record);
    return filtered;
}

double percent_normalize(double count, double denominator) {
    if (!(denominator > 0))
        throw Error(ErrorKind::domain, "percent_normalize: denominator must be positive");
    if (count < 0 || count > denominator)
        throw Error(ErrorKind::domain,
                    "percent_normalize: count must lie in [0, denominator], got " +
                        fmt_double(count) + " / " + fmt_double(denominator));
    return 100.0 * count / denominator;
}

Standardizer fit_standardizer(const Eigen::MatrixXd& matrix, const Eigen::VectorXd& response,
                              bool impute_missing) {
    const Eigen::Index n = matrix.rows();
    const Eigen::Index p = matrix.cols();
    if (n < 2)
        throw Error(ErrorKind::insufficient_data,
                    "standardizer needs at least 2 rows, got " + std::to_string(n));
    if (response.size() != n)
        throw Error(ErrorKind::shape, "response length does not match matrix rows");

    Standardizer standardizer;
    standardizer.mean.resize(p);
    standardizer.sd.resize(p);
    if (impute_missing) standardizer.median.resize(p);

    std::vector<double> column;
    for (Eigen::Index j = 0; j < p; ++j) {
        column.clear();
        double fill = 0.0;
        if (impute_missing) {
            for (Eigen::Index i = 0; i < n; ++i)
                if (!std::isnan(matrix(i, j))) column.push_back(matrix(i, j));
            if (column.empty())
                throw Error(ErrorKind::insufficient_data,
                            "column " + std::to_string(j) + " has no observed values to impute from");
            std::sort(column.begin(), column.end());
            const std::size_t m = column.size();
            fill = (m % 2 == 1) ? column[m / 2] : 0.5 * (column[m / 2 - 1] + column[m / 2]);
            standardizer.median[j] = fill;
        }

        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = matrix(i, j);
            if (std::isnan(v)) {
                if (!impute_missing)
                    throw Error(ErrorKind::domain, "missing value in column " + std::to_string(j) +
                                                       " (imputation not enabled)");
                v = fill;
            }
            sum += v;
        }
        const double mean = sum / static_cast<double>(n);
        double ss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = matrix(i, j);
            if (std::isnan(v)) v = fill;
            const double d = v - mean;
            ss += d * d;
        }
        const double variance = ss / static_cast<double>(n - 1);
        standardizer.mean[j] = mean;
        standardizer.sd[j] = variance > 0 ? std::sqrt(variance) : 0.0;
    }
    standardizer.response_mean = response.size() > 0 ? response.mean() : 0.0;
    return standardizer;
}

Eigen::MatrixXd apply_standardizer(const Standardizer& standardizer, const Eigen::MatrixXd& matrix) {
    if (matrix.cols() != standardizer.mean.size())
        throw Error(ErrorKind::shape, "standardizer fitted on " +
                                          std::to_string(standardizer.mean.size()) +
                                          " columns, matrix has " + std::to_string(matrix.cols()));
    Eigen::MatrixXd out(matrix.rows(), matrix.cols());
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
        const double sd = standardizer.sd[j];
        for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
            double v = matrix(i, j);
            if (std::isnan(v)) {
                if (!standardizer.imputes())
                    throw Error(ErrorKind::domain,
                                "missing value in column " + std::to_string(j) +
                                    " (standardizer fitted without imputation)");
                v = standardizer.median[j];
            }
            out(i, j) = sd > 0 ? (v - standardizer.mean[j]) / sd : 0.0;
        }
    }
    return out;
}

FeatureSelection select_feature_set(const FeatureTaxonomy& taxonomy, FeatureUniverse universe,
                                    const std::vector<std::string>& custom) {
    FeatureSelection selection;
    if (universe == FeatureUniverse::custom) {
        std::unordered_set<std::string> wanted(custom.begin(), custom.end());
        for (const auto& name : custom)
            if (!taxonomy.find(name))
                throw Error(ErrorKind::name, "unknown feature '" + name + "' in custom list");
        for (std::size_t j = 0; j < taxonomy.size(); ++j) {
            if (wanted.count(taxonomy.entries[j].feature_name)) {
                selection.column_indices.push_back(static_cast<int>(j));
                selection.feature_names.push_back(taxonomy.entries[j].feature_name);
            }
        }
        return selection;
    }
    for (std::size_t j = 0; j < taxonomy.size(); ++j) {
        if (universe == FeatureUniverse::non_modifiable_only && !taxonomy.entries[j].non_modifiable)
            continue;
        selection.column_indices.push_back(static_cast<int>(j));
        selection.feature_names.push_back(taxonomy.entries[j].feature_name);
    }
    return selection;
}

Eigen::MatrixXd feature_matrix(const CountyTable& table) {
    Eigen::MatrixXd matrix(table.n_rows(), table.n_features());
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        for (std::size_t j = 0; j < table.n_features(); ++j)
            matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                table.records[i].features[j];
    return matrix;
}

Eigen::MatrixXd feature_matrix(const CountyTable& table, const FeatureSelection& selection) {
    Eigen::MatrixXd matrix(table.n_rows(), selection.column_indices.size());
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        for (std::size_t j = 0; j < selection.column_indices.size(); ++j)
            matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                table.records[i].features[selection.column_indices[j]];
    return matrix;
}

Eigen::VectorXd response_vector(const CountyTable& table) {
    Eigen::VectorXd y(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i)
        y[static_cast<Eigen::Index>(i)] = table.records[i].observed_ir;
    return y;
}

}  // namespace countyir
