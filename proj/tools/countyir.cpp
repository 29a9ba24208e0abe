// Command-line front end: validate inputs, run the full pipeline, or drive
// the individual stages (train, dual, lisa, synth, render) on their own.

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

#include "countyir/error.hpp"
#include "countyir/pipeline.hpp"
#include "countyir/report.hpp"
#include "countyir/rng.hpp"
#include "countyir/synth.hpp"
#include "countyir/textio.hpp"

namespace fs = std::filesystem;
using namespace countyir;

namespace {

struct CommonFlags {
    std::string config_path;
    std::string counties, taxonomy, centroids, adjacency, geometry, out;
    std::string model, scheme;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double alpha = 0.0;
    bool alpha_set = false;
    int permutations = 0;
    int threads = 0;
    std::int64_t threshold = -1;
    int grid_size = 0;
    bool out_of_fold = false;
    bool impute = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "key=value configuration file");
    cmd->add_option("--counties", flags.counties, "counties.csv path");
    cmd->add_option("--taxonomy", flags.taxonomy, "taxonomy.csv path");
    cmd->add_option("--centroids", flags.centroids, "centroids.csv path");
    cmd->add_option("--adjacency", flags.adjacency, "adjacency.csv path");
    cmd->add_option("--geometry", flags.geometry, "geojson geometry path");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--model", flags.model, "lasso | ridge | ols | stepwise_bic | knn");
    cmd->add_option("--scheme", flags.scheme, "contiguity | band:<km> | invdist:<km>");
    cmd->add_option("--seed", flags.seed, "master seed")->each([&](const std::string&) {
        flags.seed_set = true;
    });
    cmd->add_option("--alpha", flags.alpha, "significance level")->each([&](const std::string&) {
        flags.alpha_set = true;
    });
    cmd->add_option("--permutations", flags.permutations, "permutation count");
    cmd->add_option("--threads", flags.threads, "worker threads");
    cmd->add_option("--population-threshold", flags.threshold, "keep counties above this female population");
    cmd->add_option("--grid-size", flags.grid_size, "lambda grid size");
    cmd->add_flag("--out-of-fold", flags.out_of_fold, "use held-out predictions for residual/impact");
    cmd->add_flag("--impute", flags.impute, "median-fill missing feature cells per training partition");
}

RunConfig resolve_config(const CommonFlags& flags) {
    RunConfig config;
    if (!flags.config_path.empty()) config = load_run_config(flags.config_path);
    if (!flags.counties.empty()) config.counties = flags.counties;
    if (!flags.taxonomy.empty()) config.taxonomy = flags.taxonomy;
    if (!flags.centroids.empty()) config.centroids = flags.centroids;
    if (!flags.adjacency.empty()) config.adjacency = flags.adjacency;
    if (!flags.geometry.empty()) config.geometry = flags.geometry;
    if (!flags.out.empty()) config.out_dir = flags.out;
    if (!flags.model.empty()) config.model = parse_model_kind(flags.model);
    if (!flags.scheme.empty()) parse_scheme(config, flags.scheme);
    if (flags.seed_set) config.seed = flags.seed;
    if (flags.alpha_set) config.alpha = flags.alpha;
    if (flags.permutations > 0) config.permutations = flags.permutations;
    if (flags.threads > 0) config.threads = flags.threads;
    if (flags.threshold >= 0) config.population_threshold = flags.threshold;
    if (flags.grid_size > 0) config.grid_size = flags.grid_size;
    if (flags.out_of_fold) config.out_of_fold = true;
    if (flags.impute) config.impute_missing = true;
    return config;
}

struct PreparedData {
    CountyTable table;
    FeatureTaxonomy taxonomy;
};

PreparedData prepare_table(const RunConfig& config) {
    PreparedData data;
    LoadOptions load_options;
    load_options.allow_missing = config.impute_missing;
    data.table = load_county_table(config.counties, load_options);
    data.taxonomy = load_taxonomy(config.taxonomy);
    align_to_taxonomy(data.table, data.taxonomy);
    data.table = filter_by_female_population(data.table, config.population_threshold);
    return data;
}

std::vector<double> grid_for_design(const RunConfig& config, const Design& design) {
    if (config.model == ModelKind::knn) return config.knn_grid;
    if (!model_needs_grid(config.model)) return {0.0};
    const Standardizer standardizer =
        fit_standardizer(design.features, design.response, config.impute_missing);
    const Eigen::MatrixXd z = apply_standardizer(standardizer, design.features);
    const Eigen::VectorXd centered = design.response.array() - standardizer.response_mean;
    double lmax = lambda_max(z, centered);
    if (lmax <= 0) lmax = 1.0;
    return lambda_grid(lmax, config.grid_size, config.grid_min_ratio);
}

int cmd_train(const RunConfig& config, const std::string& universe_name, std::ostream& out) {
    validate_run_config(config);
    PreparedData data = prepare_table(config);
    const FeatureUniverse universe = universe_name == "non_modifiable"
                                         ? FeatureUniverse::non_modifiable_only
                                         : FeatureUniverse::all;
    const FeatureSelection selection = select_feature_set(data.taxonomy, universe);
    const Design design = make_design(data.table, selection);
    const std::vector<double> grid = grid_for_design(config, design);

    HarnessOptions options;
    options.threads = config.threads;
    options.impute_missing = config.impute_missing;
    const CvReport report = nested_cv_evaluate(design, data.taxonomy, config.model, grid,
                                               derive_seed(config.seed, 11), options);
    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir / "cv_report.csv", cv_report_csv(report));
    for (const auto& warning : report.warnings) out << "warning: " << warning << "\n";
    out << "cv mean mse=" << fmt_double(report.mean.mse)
        << " corr=" << fmt_double(report.mean.pearson_corr) << "\n";

    if (model_supports_selection(config.model)) {
        const FinalFit fit = fit_final_model(design, data.taxonomy, config.model, grid,
                                             derive_seed(config.seed, 21), options);
        save_coefficients(fit.model, config.out_dir / "model.coef");
        out << "final model: " << selected_variables(fit.model).size()
            << " nonzero coefficients, hyper=" << fmt_double(fit.chosen_hyper) << "\n";
    } else {
        out << "model kind has no coefficient table; cv report only\n";
    }
    return 0;
}

int cmd_dual(const RunConfig& config, std::ostream& out) {
    validate_run_config(config);
    PreparedData data = prepare_table(config);
    const FeatureSelection all = select_feature_set(data.taxonomy, FeatureUniverse::all);
    const Design design = make_design(data.table, all);
    const std::vector<double> grid = grid_for_design(config, design);

    HarnessOptions options;
    options.threads = config.threads;
    options.impute_missing = config.impute_missing;
    const DualModels dual =
        fit_dual_models(data.table, data.taxonomy, config.model, grid, config.seed, options);

    fs::create_directories(config.out_dir);
    save_coefficients(dual.model1.model, config.out_dir / "model1.coef");
    save_coefficients(dual.model2.model, config.out_dir / "model2.coef");

    const Eigen::VectorXd p1 = predict_table(dual.model1.model, data.table);
    const Eigen::VectorXd p2 = predict_table(dual.model2.model, data.table);
    std::vector<double> pred1(p1.data(), p1.data() + p1.size());
    std::vector<double> pred2(p2.data(), p2.data() + p2.size());
    const DualModelResult rows = dual_model_table(data.table, pred1, pred2);
    write_text_file(config.out_dir / "dual_results.csv", dual_results_csv(rows));
    out << "dual models written; counties=" << rows.rows.size() << "\n";
    return 0;
}

int cmd_lisa(const RunConfig& config, const std::string& input, const std::string& column,
             std::ostream& out) {
    validate_run_config(config);
    const DualModelResult dual = load_dual_results(input);

    std::vector<std::string> ids;
    std::vector<double> values;
    for (const auto& row : dual.rows) {
        ids.push_back(row.fips);
        if (column == "residual") values.push_back(row.residual);
        else if (column == "impact") values.push_back(row.impact);
        else if (column == "observed") values.push_back(row.observed);
        else throw Error(ErrorKind::parameter, "lisa column must be residual, impact, or observed");
    }

    SpatialWeights weights;
    if (config.scheme == WeightScheme::contiguity) {
        weights = build_contiguity_weights(ids, load_adjacency(config.adjacency));
    } else {
        const auto centroids = load_centroids(config.centroids);
        std::map<std::string, Centroid> by_fips;
        for (const auto& c : centroids) by_fips[c.fips] = c;
        std::vector<Centroid> ordered;
        for (const auto& fips : ids) {
            const auto it = by_fips.find(fips);
            if (it == by_fips.end())
                throw Error(ErrorKind::reference, "county '" + fips + "' has no centroid");
            ordered.push_back(it->second);
        }
        weights = build_distance_weights(ordered, config.scheme, config.scheme_km);
    }
    if (config.row_standardize_weights) weights = row_standardize(weights);

    PermutationOptions options;
    options.permutations = config.permutations;
    options.alpha = config.alpha;
    options.seed = derive_seed(config.seed, 30);
    options.threads = config.threads;
    auto lisa = permutation_inference(values, weights, options);
    lisa = classify_lisa(values, std::move(lisa), config.alpha);

    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir / "lisa.csv", lisa_csv(ids, values, lisa));
    int significant = 0;
    for (const auto& r : lisa)
        if (r.cluster_class != LisaClass::NS && r.cluster_class != LisaClass::ISOLATE)
            ++significant;
    out << "lisa written; significant=" << significant << " of " << lisa.size() << "\n";
    return 0;
}

int cmd_render(const RunConfig& config, const std::string& table_path, const std::string& column,
               bool class_column, int breaks, const std::string& out_name, std::ostream& out) {
    if (config.geometry.empty())
        throw Error(ErrorKind::parameter, "render requires --geometry");
    const report::PropertyTable table = report::load_property_table(table_path);
    const report::JoinResult joined = report::export_geojson(config.geometry, table);
    if (joined.unmatched > 0)
        out << "warning: " << joined.unmatched << " features had no table row\n";

    report::RenderOptions options;
    options.class_column = class_column;
    if (breaks > 0) options.breaks = breaks;
    const std::string svg = report::render_choropleth_svg(joined.geojson, column, options);

    fs::create_directories(config.out_dir);
    write_text_file(config.out_dir / (out_name + ".geojson"), joined.geojson);
    write_text_file(config.out_dir / (out_name + ".svg"), svg);
    out << "rendered " << out_name << ".svg (" << joined.matched << " features)\n";
    return 0;
}

struct SynthFlags {
    int rows = 10, cols = 10;
    double spacing = 30.0;
    int features = 8, non_modifiable = 4;
    std::string beta, expert, clusters;
    double intercept = 120.0, noise = 1.0;
    bool percent_like = false;
    std::uint64_t seed = 0;
    std::string out = "synth";
};

int cmd_synth(const SynthFlags& flags, std::ostream& out) {
    synth::SynthConfig config;
    config.rows = flags.rows;
    config.cols = flags.cols;
    config.spacing_km = flags.spacing;
    config.n_features = flags.features;
    config.n_non_modifiable = flags.non_modifiable;
    config.intercept = flags.intercept;
    config.noise_sd = flags.noise;
    config.percent_like = flags.percent_like;
    config.seed = flags.seed;

    if (!flags.beta.empty()) {
        for (const auto& token : split_csv_line(flags.beta)) {
            double value;
            if (!try_parse_double(token, value))
                throw Error(ErrorKind::parameter, "bad beta value '" + token + "'");
            config.beta.push_back(value);
        }
    }
    if (!flags.expert.empty()) {
        for (const auto& token : split_csv_line(flags.expert)) {
            std::int64_t index;
            if (!try_parse_int64(token, index))
                throw Error(ErrorKind::parameter, "bad expert index '" + token + "'");
            config.expert_indices.push_back(static_cast<int>(index));
        }
    }
    if (!flags.clusters.empty()) {
        // row:col:radius:offset groups separated by ';'
        std::string text = flags.clusters;
        std::size_t start = 0;
        while (start <= text.size()) {
            const auto semi = text.find(';', start);
            const std::string group =
                text.substr(start, semi == std::string::npos ? std::string::npos : semi - start);
            if (!trim(group).empty()) {
                synth::PlantedCluster cluster;
                if (std::sscanf(group.c_str(), "%d:%d:%d:%lf", &cluster.center_row,
                                &cluster.center_col, &cluster.radius, &cluster.offset) != 4)
                    throw Error(ErrorKind::parameter,
                                "bad cluster '" + group + "', expected row:col:radius:offset");
                config.clusters.push_back(cluster);
            }
            if (semi == std::string::npos) break;
            start = semi + 1;
        }
    }

    const synth::SynthBundle bundle = synth::generate_synthetic(config);
    synth::write_bundle(bundle, flags.out);
    out << "synthetic bundle written to " << flags.out << " (" << bundle.table.n_rows()
        << " counties, " << bundle.table.n_features() << " features)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"County incidence-rate modeling: dual linear models, residual and impact "
                 "fields, and local spatial outlier detection"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string train_universe = "all";
    std::string lisa_input, lisa_column = "residual";
    std::string render_table, render_column = "class", render_name = "map";
    bool render_class = false;
    int render_breaks = 0;
    SynthFlags synth_flags;

    CLI::App* validate = app.add_subcommand("validate", "check inputs and print counts");
    add_common_flags(validate, flags);

    CLI::App* pipeline = app.add_subcommand("pipeline", "run the full analysis");
    add_common_flags(pipeline, flags);

    CLI::App* train = app.add_subcommand("train", "nested cross-validation for one universe");
    add_common_flags(train, flags);
    train->add_option("--universe", train_universe, "all | non_modifiable");

    CLI::App* dual = app.add_subcommand("dual", "fit both models and write dual_results.csv");
    add_common_flags(dual, flags);

    CLI::App* lisa = app.add_subcommand("lisa", "local spatial statistics on a results column");
    add_common_flags(lisa, flags);
    lisa->add_option("--input", lisa_input, "dual_results.csv path")->required();
    lisa->add_option("--column", lisa_column, "residual | impact | observed");

    CLI::App* render = app.add_subcommand("render", "join a table into geometry and draw an svg");
    add_common_flags(render, flags);
    render->add_option("--table", render_table, "csv with a fips column")->required();
    render->add_option("--column", render_column, "property to shade by");
    render->add_flag("--class", render_class, "treat the column as class labels");
    render->add_option("--breaks", render_breaks, "quantile classes for numeric columns");
    render->add_option("--name", render_name, "output base name");

    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic lattice bundle");
    synth_cmd->add_option("--rows", synth_flags.rows, "lattice rows");
    synth_cmd->add_option("--cols", synth_flags.cols, "lattice cols");
    synth_cmd->add_option("--spacing", synth_flags.spacing, "cell spacing in km");
    synth_cmd->add_option("--features", synth_flags.features, "feature count");
    synth_cmd->add_option("--non-modifiable", synth_flags.non_modifiable,
                          "leading features flagged non-modifiable");
    synth_cmd->add_option("--beta", synth_flags.beta, "comma-separated true coefficients");
    synth_cmd->add_option("--expert", synth_flags.expert, "comma-separated expert indices");
    synth_cmd->add_option("--clusters", synth_flags.clusters,
                          "row:col:radius:offset groups separated by ';'");
    synth_cmd->add_option("--intercept", synth_flags.intercept, "response baseline");
    synth_cmd->add_option("--noise", synth_flags.noise, "noise standard deviation");
    synth_cmd->add_flag("--percent-like", synth_flags.percent_like,
                        "store features on a 0..100 scale");
    synth_cmd->add_option("--seed", synth_flags.seed, "generator seed");
    synth_cmd->add_option("--out", synth_flags.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand(validate)) return cmd_validate(resolve_config(flags), std::cout);
        if (app.got_subcommand(pipeline)) return cmd_pipeline(resolve_config(flags), std::cout);
        if (app.got_subcommand(train))
            return cmd_train(resolve_config(flags), train_universe, std::cout);
        if (app.got_subcommand(dual)) return cmd_dual(resolve_config(flags), std::cout);
        if (app.got_subcommand(lisa))
            return cmd_lisa(resolve_config(flags), lisa_input, lisa_column, std::cout);
        if (app.got_subcommand(render))
            return cmd_render(resolve_config(flags), render_table, render_column, render_class,
                              render_breaks, render_name, std::cout);
        if (app.got_subcommand(synth_cmd)) return cmd_synth(synth_flags, std::cout);
    } catch (const Error& error) {
        std::cerr << "error: " << error.what() << "\n";
        return exit_code_for(error);
    } catch (const std::exception& error) {
        std::cerr << "error: " << error.what() << "\n";
        return 1;
    }
    return 0;
}
