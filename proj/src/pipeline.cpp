#include "countyir/pipeline.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <unordered_set>

#include "countyir/error.hpp"
#include "countyir/rng.hpp"
#include "countyir/textio.hpp"

namespace countyir {

namespace {

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        const std::string token =
            text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!trim(token).empty()) {
            double value;
            if (!try_parse_double(token, value))
                throw Error(ErrorKind::parameter, "bad number '" + token + "' in list");
            values.push_back(value);
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return values;
}

struct LoadedInputs {
    CountyTable table;     // aligned to taxonomy, unfiltered
    FeatureTaxonomy taxonomy;
    std::vector<Centroid> centroids;
    std::vector<std::pair<std::string, std::string>> adjacency;
};

LoadedInputs load_inputs(const RunConfig& config, bool need_spatial) {
    LoadedInputs inputs;
    LoadOptions load_options;
    load_options.allow_missing = config.impute_missing;
    inputs.table = load_county_table(config.counties, load_options);
    inputs.taxonomy = load_taxonomy(config.taxonomy);
    align_to_taxonomy(inputs.table, inputs.taxonomy);
    if (need_spatial) {
        if (config.scheme == WeightScheme::contiguity) {
            inputs.adjacency = load_adjacency(config.adjacency);
        } else {
            inputs.centroids = load_centroids(config.centroids);
        }
    }
    return inputs;
}

// Weights for exactly the filtered table's counties, in table order.
SpatialWeights weights_for_table(const RunConfig& config, const CountyTable& table,
                                 const LoadedInputs& inputs) {
    std::vector<std::string> ids;
    ids.reserve(table.n_rows());
    for (const auto& record : table.records) ids.push_back(record.fips);

    SpatialWeights weights;
    if (config.scheme == WeightScheme::contiguity) {
        // The filter step may have dropped counties; edges touching them are
        // no longer part of the analysis graph.
        std::unordered_set<std::string> in_table(ids.begin(), ids.end());
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& edge : inputs.adjacency)
            if (in_table.count(edge.first) && in_table.count(edge.second))
                edges.push_back(edge);
        weights = build_contiguity_weights(ids, edges);
    } else {
        std::map<std::string, Centroid> by_fips;
        for (const auto& centroid : inputs.centroids) by_fips[centroid.fips] = centroid;
        std::vector<Centroid> ordered;
        ordered.reserve(ids.size());
        for (const auto& fips : ids) {
            const auto it = by_fips.find(fips);
            if (it == by_fips.end())
                throw Error(ErrorKind::reference, "county '" + fips + "' has no centroid");
            ordered.push_back(it->second);
        }
        weights = build_distance_weights(ordered, config.scheme, config.scheme_km);
    }
    return config.row_standardize_weights ? row_standardize(weights) : weights;
}

}  // namespace

void parse_scheme(RunConfig& config, const std::string& text) {
    if (text == "contiguity") {
        config.scheme = WeightScheme::contiguity;
        config.scheme_km = 0.0;
        return;
    }
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    if ((head == "band" || head == "invdist") && colon != std::string::npos) {
        double km;
        if (try_parse_double(text.substr(colon + 1), km) && km > 0) {
            config.scheme =
                head == "band" ? WeightScheme::fixed_band : WeightScheme::inverse_distance;
            config.scheme_km = km;
            return;
        }
    }
    throw Error(ErrorKind::parameter,
                "bad scheme '" + text + "'; expected contiguity, band:<km>, or invdist:<km>");
}

std::string scheme_string(const RunConfig& config) {
    switch (config.scheme) {
    case WeightScheme::contiguity: return "contiguity";
    case WeightScheme::fixed_band: return "band:" + fmt_double(config.scheme_km);
    case WeightScheme::inverse_distance: return "invdist:" + fmt_double(config.scheme_km);
    }
    return "contiguity";
}

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
    auto parse_u64 = [&](const std::string& v) {
        std::uint64_t out;
        if (!try_parse_uint64(v, out))
            throw Error(ErrorKind::parameter, "bad unsigned value '" + v + "' for " + key);
        return out;
    };
    auto parse_i64 = [&](const std::string& v) {
        std::int64_t out;
        if (!try_parse_int64(v, out))
            throw Error(ErrorKind::parameter, "bad integer value '" + v + "' for " + key);
        return out;
    };
    auto parse_f = [&](const std::string& v) {
        double out;
        if (!try_parse_double(v, out))
            throw Error(ErrorKind::parameter, "bad numeric value '" + v + "' for " + key);
        return out;
    };
    auto parse_flag = [&](const std::string& v) {
        if (v == "1" || v == "true") return true;
        if (v == "0" || v == "false") return false;
        throw Error(ErrorKind::parameter, "bad boolean value '" + v + "' for " + key);
    };

    if (key == "counties") config.counties = value;
    else if (key == "taxonomy") config.taxonomy = value;
    else if (key == "centroids") config.centroids = value;
    else if (key == "adjacency") config.adjacency = value;
    else if (key == "geometry") config.geometry = value;
    else if (key == "out") config.out_dir = value;
    else if (key == "model") config.model = parse_model_kind(value);
    else if (key == "grid_size") config.grid_size = static_cast<int>(parse_i64(value));
    else if (key == "grid_min_ratio") config.grid_min_ratio = parse_f(value);
    else if (key == "knn_grid") config.knn_grid = parse_double_list(value);
    else if (key == "seed") config.seed = parse_u64(value);
    else if (key == "population_threshold") config.population_threshold = parse_i64(value);
    else if (key == "scheme") parse_scheme(config, value);
    else if (key == "row_standardize") config.row_standardize_weights = parse_flag(value);
    else if (key == "permutations") config.permutations = static_cast<int>(parse_i64(value));
    else if (key == "alpha") config.alpha = parse_f(value);
    else if (key == "threads") config.threads = static_cast<int>(parse_i64(value));
    else if (key == "out_of_fold") config.out_of_fold = parse_flag(value);
    else if (key == "impute") config.impute_missing = parse_flag(value);
    else throw Error(ErrorKind::parameter, "unknown config key '" + key + "'");
}

RunConfig load_run_config(const std::filesystem::path& path) {
    RunConfig config;
    const auto lines = split_lines(read_text_file(path));
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto line = trim(lines[i]);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(ErrorKind::format, path.string() + ": line " + std::to_string(i + 1) +
                                               ": expected key=value");
        apply_config_entry(config, std::string(trim(line.substr(0, eq))),
                           std::string(trim(line.substr(eq + 1))));
    }
    return config;
}

void validate_run_config(const RunConfig& config) {
    if (!(config.alpha > 0 && config.alpha < 1))
        throw Error(ErrorKind::parameter, "alpha must lie in (0, 1)");
    if (config.permutations < 99)
        throw Error(ErrorKind::parameter, "permutations must be >= 99");
    if (config.grid_size < 1) throw Error(ErrorKind::parameter, "grid_size must be >= 1");
    if (config.threads < 1) throw Error(ErrorKind::parameter, "threads must be >= 1");

    auto require = [&](const std::filesystem::path& path, const char* what) {
        if (path.empty())
            throw Error(ErrorKind::parameter, std::string("missing required input: ") + what);
        if (!std::filesystem::exists(path))
            throw Error(ErrorKind::parameter,
                        std::string(what) + " file does not exist: " + path.string());
    };
    require(config.counties, "counties");
    require(config.taxonomy, "taxonomy");
    if (config.scheme == WeightScheme::contiguity) require(config.adjacency, "adjacency");
    else require(config.centroids, "centroids");
    if (!config.geometry.empty() && !std::filesystem::exists(config.geometry))
        throw Error(ErrorKind::parameter,
                    "geometry file does not exist: " + config.geometry.string());
}

std::string manifest_text(const RunConfig& config) {
    std::string out = "countyir run manifest\nversion=0.1.0\n";
    std::map<std::string, std::string> kv;
    kv["counties"] = config.counties.string();
    kv["taxonomy"] = config.taxonomy.string();
    kv["centroids"] = config.centroids.string();
    kv["adjacency"] = config.adjacency.string();
    kv["geometry"] = config.geometry.string();
    kv["out"] = config.out_dir.string();
    kv["model"] = to_string(config.model);
    kv["grid_size"] = std::to_string(config.grid_size);
    kv["grid_min_ratio"] = fmt_double(config.grid_min_ratio);
    kv["seed"] = std::to_string(config.seed);
    kv["population_threshold"] = std::to_string(config.population_threshold);
    kv["scheme"] = scheme_string(config);
    kv["row_standardize"] = config.row_standardize_weights ? "1" : "0";
    kv["permutations"] = std::to_string(config.permutations);
    kv["alpha"] = fmt_double(config.alpha);
    kv["out_of_fold"] = config.out_of_fold ? "1" : "0";
    kv["impute"] = config.impute_missing ? "1" : "0";
    for (const auto& [key, value] : kv) out += key + "=" + value + "\n";
    out += "derived_seed.cv_model1=" + std::to_string(derive_seed(config.seed, 11)) + "\n";
    out += "derived_seed.cv_model2=" + std::to_string(derive_seed(config.seed, 12)) + "\n";
    out += "derived_seed.fit_model1=" + std::to_string(derive_seed(config.seed, 21)) + "\n";
    out += "derived_seed.fit_model2=" + std::to_string(derive_seed(config.seed, 22)) + "\n";
    out += "derived_seed.lisa=" + std::to_string(derive_seed(config.seed, 30)) + "\n";
    return out;
}

int exit_code_for(const Error& error) { return error.is_input_error() ? 2 : 1; }

int cmd_validate(const RunConfig& config, std::ostream& out) {
    try {
        validate_run_config(config);
        const LoadedInputs inputs = load_inputs(config, true);

        const CountyTable filtered =
            filter_by_female_population(inputs.table, config.population_threshold);

        if (config.scheme == WeightScheme::contiguity) {
            std::unordered_set<std::string> known;
            for (const auto& record : inputs.table.records) known.insert(record.fips);
            for (const auto& [a, b] : inputs.adjacency) {
                if (!known.count(a) || !known.count(b))
                    throw Error(ErrorKind::reference,
                                "adjacency edge " + a + "," + b + " references an unknown fips");
            }
        } else {
            std::unordered_set<std::string> with_centroid;
            for (const auto& centroid : inputs.centroids) with_centroid.insert(centroid.fips);
            for (const auto& record : filtered.records)
                if (!with_centroid.count(record.fips))
                    throw Error(ErrorKind::reference,
                                "county '" + record.fips + "' has no centroid");
        }

        out << "counties=" << inputs.table.n_rows() << "\n";
        out << "counties_after_filter=" << filtered.n_rows() << "\n";
        out << "features=" << inputs.taxonomy.size() << "\n";
        out << "non_modifiable=" << inputs.taxonomy.count_non_modifiable() << "\n";
        out << "modifiable=" << inputs.taxonomy.count_modifiable() << "\n";
        out << "expert=" << inputs.taxonomy.count_expert() << "\n";
        if (config.scheme == WeightScheme::contiguity)
            out << "adjacency_edges=" << inputs.adjacency.size() << "\n";
        else
            out << "centroids=" << inputs.centroids.size() << "\n";
        out << "validation=ok\n";
        return 0;
    } catch (const Error& error) {
        out << "error: " << error.what() << "\n";
        return exit_code_for(error);
    }
}

int cmd_pipeline(const RunConfig& config, std::ostream& out) {
    std::vector<std::filesystem::path> written;
    std::string stage = "configuration";
    try {
        validate_run_config(config);
        if (!model_supports_selection(config.model))
            throw Error(ErrorKind::parameter,
                        "pipeline requires a coefficient-based model kind, got '" +
                            std::string(to_string(config.model)) + "'");

        stage = "load";
        const LoadedInputs inputs = load_inputs(config, true);

        stage = "filter";
        const CountyTable table =
            filter_by_female_population(inputs.table, config.population_threshold);
        if (table.n_rows() == 0)
            throw Error(ErrorKind::insufficient_data, "no counties left after filtering");

        std::filesystem::create_directories(config.out_dir);
        auto emit = [&](const std::string& name, const std::string& content) {
            const auto path = config.out_dir / name;
            write_text_file(path, content);
            written.push_back(path);
        };

        const FeatureSelection universe1 =
            select_feature_set(inputs.taxonomy, FeatureUniverse::non_modifiable_only);
        const FeatureSelection universe2 =
            select_feature_set(inputs.taxonomy, FeatureUniverse::all);
        const Design design1 = make_design(table, universe1);
        const Design design2 = make_design(table, universe2);

        auto grid_for = [&](const Design& design) {
            if (config.model == ModelKind::knn) return config.knn_grid;
            if (!model_needs_grid(config.model)) return std::vector<double>{0.0};
            const Standardizer standardizer =
                fit_standardizer(design.features, design.response, config.impute_missing);
            const Eigen::MatrixXd z = apply_standardizer(standardizer, design.features);
            const Eigen::VectorXd centered =
                design.response.array() - standardizer.response_mean;
            double lmax = lambda_max(z, centered);
            if (config.model == ModelKind::ridge && lmax <= 0) lmax = 1.0;
            return lambda_grid(lmax, config.grid_size, config.grid_min_ratio);
        };
        const std::vector<double> grid1 = grid_for(design1);
        const std::vector<double> grid2 = grid_for(design2);

        HarnessOptions harness_options;
        harness_options.threads = config.threads;
        harness_options.impute_missing = config.impute_missing;

        stage = "cross-validation";
        const CvReport cv1 = nested_cv_evaluate(design1, inputs.taxonomy, config.model, grid1,
                                                derive_seed(config.seed, 11), harness_options);
        const CvReport cv2 = nested_cv_evaluate(design2, inputs.taxonomy, config.model, grid2,
                                                derive_seed(config.seed, 12), harness_options);
        {
            std::string combined;
            const auto add = [&](const char* label, const CvReport& report) {
                for (const auto& line : split_lines(cv_report_csv(report))) {
                    if (line.rfind("fold,", 0) == 0) {
                        if (combined.empty()) combined = "model," + line + "\n";
                        continue;
                    }
                    combined += std::string(label) + "," + line + "\n";
                }
            };
            add("model1", cv1);
            add("model2", cv2);
            emit("cv_report.csv", combined);
        }

        stage = "dual model fit";
        const DualModels dual = fit_dual_models(table, inputs.taxonomy, config.model,
                                                grid2, config.seed, harness_options);
        for (const auto& warning : dual.model1.warnings) out << "warning: model1: " << warning << "\n";
        for (const auto& warning : dual.model2.warnings) out << "warning: model2: " << warning << "\n";

        {
            const auto path1 = config.out_dir / "model1.coef";
            save_coefficients(dual.model1.model, path1);
            written.push_back(path1);
            const auto path2 = config.out_dir / "model2.coef";
            save_coefficients(dual.model2.model, path2);
            written.push_back(path2);
        }

        stage = "residuals";
        std::vector<double> pred1(table.n_rows()), pred2(table.n_rows());
        if (config.out_of_fold) {
            pred1 = cv1.out_of_fold_predictions;
            pred2 = cv2.out_of_fold_predictions;
        } else {
            const Eigen::VectorXd p1 = predict_table(dual.model1.model, table);
            const Eigen::VectorXd p2 = predict_table(dual.model2.model, table);
            for (std::size_t i = 0; i < table.n_rows(); ++i) {
                pred1[i] = p1[static_cast<Eigen::Index>(i)];
                pred2[i] = p2[static_cast<Eigen::Index>(i)];
            }
        }
        const DualModelResult dual_rows = dual_model_table(table, pred1, pred2);
        emit("dual_results.csv", dual_results_csv(dual_rows));

        stage = "spatial weights";
        const SpatialWeights weights = weights_for_table(config, table, inputs);
        if (!weights.isolates.empty())
            out << "warning: " << weights.isolates.size()
                << " counties have no neighbors under " << scheme_string(config) << "\n";

        stage = "lisa";
        PermutationOptions permutation_options;
        permutation_options.permutations = config.permutations;
        permutation_options.alpha = config.alpha;
        permutation_options.seed = derive_seed(config.seed, 30);
        permutation_options.threads = config.threads;
        const OutlierReport outliers = outlier_counties(dual_rows, weights, permutation_options);
        for (const auto& warning : outliers.warnings) out << "warning: " << warning << "\n";

        std::vector<std::string> ids;
        std::vector<double> residual_values, impact_values;
        for (const auto& row : dual_rows.rows) {
            ids.push_back(row.fips);
            residual_values.push_back(row.residual);
            impact_values.push_back(row.impact);
        }
        if (!outliers.residual_degenerate)
            emit("lisa_residual.csv", lisa_csv(ids, residual_values, outliers.residual_lisa));
        else
            out << "warning: lisa_residual.csv skipped (degenerate residual field)\n";
        if (dual.universes_identical || outliers.impact_degenerate)
            out << "warning: lisa_impact.csv skipped (no modifiable signal)\n";
        else
            emit("lisa_impact.csv", lisa_csv(ids, impact_values, outliers.impact_lisa));

        stage = "manifest";
        emit("run_manifest.txt", manifest_text(config));

        out << "pipeline=ok outputs=" << written.size() << " high=" <<
            outliers.unexpectedly_high.size() << " low=" << outliers.unexpectedly_low.size()
            << "\n";
        return 0;
    } catch (const Error& error) {
        for (const auto& path : written) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
        out << "error in stage '" << stage << "': " << error.what() << "\n";
        return exit_code_for(error);
    }
}

}  // namespace countyir
