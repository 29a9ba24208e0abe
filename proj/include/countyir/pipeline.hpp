#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "countyir/error.hpp"
#include <string>
#include <vector>

#include "countyir/dual_model.hpp"
#include "countyir/spatial.hpp"

namespace countyir {

// Resolved run configuration. Values come from an optional key=value file,
// overridden by command-line flags.
struct RunConfig {
    std::filesystem::path counties;
    std::filesystem::path taxonomy;
    std::filesystem::path centroids;
    std::filesystem::path adjacency;
    std::filesystem::path geometry;  // optional
    std::filesystem::path out_dir = "out";

    ModelKind model = ModelKind::lasso;
    int grid_size = 100;
    double grid_min_ratio = 1e-4;
    std::vector<double> knn_grid = {50, 25, 10, 5, 2, 1};  // descending, most smoothing first

    std::uint64_t seed = 0;
    std::int64_t population_threshold = 10000;

    WeightScheme scheme = WeightScheme::inverse_distance;
    double scheme_km = 100.0;
    bool row_standardize_weights = true;

    int permutations = 999;
    double alpha = 0.05;
    int threads = 1;
    bool out_of_fold = false;    // residual/impact from held-out predictions
    bool impute_missing = false; // accept NA cells, median-fill per training partition
};

// key=value lines, '#' comments. Unknown keys are errors.
RunConfig load_run_config(const std::filesystem::path& path);
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

// "contiguity" | "band:<km>" | "invdist:<km>"
void parse_scheme(RunConfig& config, const std::string& text);
std::string scheme_string(const RunConfig& config);

// Checks alpha/permutation ranges and that every referenced input exists.
void validate_run_config(const RunConfig& config);

// Loads every input and runs all schema, taxonomy, alignment, and reference
// checks, printing counts. Returns a process exit code.
int cmd_validate(const RunConfig& config, std::ostream& out);

// filter -> dual-model fits -> residual / impact -> LISA on both fields.
// Writes cv_report.csv, model1.coef, model2.coef, dual_results.csv,
// lisa_residual.csv, lisa_impact.csv, run_manifest.txt. On failure the
// partially written files are removed. Returns a process exit code.
int cmd_pipeline(const RunConfig& config, std::ostream& out);

// The manifest text for a config: config echo plus every derived seed.
// Identical configs produce identical manifests.
std::string manifest_text(const RunConfig& config);

int exit_code_for(const Error& error);

}  // namespace countyir
