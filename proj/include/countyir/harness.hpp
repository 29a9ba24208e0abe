#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "countyir/dataset.hpp"
#include "countyir/regressors.hpp"

namespace countyir {

// Design = the dense view the harness works on: rows are counties, columns a
// feature universe in taxonomy order.
struct Design {
    Eigen::MatrixXd features;
    Eigen::VectorXd response;
    std::vector<std::string> feature_names;

    Eigen::Index n_rows() const { return features.rows(); }
};

Design make_design(const CountyTable& table, const FeatureSelection& selection);
Design subset_rows(const Design& design, const std::vector<int>& rows);
Design subset_columns(const Design& design, const std::vector<std::string>& names);

// Balanced random partition: seeded shuffle, then round-robin slicing. Fold
// sizes differ by at most one.
struct FoldPlan {
    std::uint64_t seed = 0;
    int k = 0;
    std::vector<int> assignments;  // fold index per row

    std::vector<int> fold_rows(int fold) const;
    std::vector<int> complement_rows(int fold) const;
};

FoldPlan partition_folds(int n, int k, std::uint64_t seed);

struct GridSearchResult {
    double best = 0.0;
    int best_index = 0;
    std::vector<double> mean_validation_mse;  // aligned to the grid
};

// Exhaustive inner-CV evaluation of every grid point; the winner minimizes
// mean validation MSE, ties resolved toward the earlier (more regularized)
// grid point. The grid arrives in preference order: descending lambda for
// lasso/ridge, descending k for knn.
GridSearchResult grid_search_inner(const Design& train, ModelKind kind,
                                   const std::vector<double>& grid, int inner_k,
                                   std::uint64_t seed, bool impute_missing = false);

// Per inner fold: pick that fold's own best grid point, fit on the fold's
// training part, collect the selected variables; return the intersection
// across all inner folds.
std::set<std::string> stable_variable_selection(const Design& train, ModelKind kind,
                                                const std::vector<double>& grid, int inner_k,
                                                std::uint64_t seed,
                                                bool impute_missing = false);

std::set<std::string> intersect_selected(const std::vector<std::set<std::string>>& per_fold);

// Union with taxonomy entries flagged expert, restricted to the active
// feature universe.
std::set<std::string> merge_expert_variables(const std::set<std::string>& selected,
                                             const FeatureTaxonomy& taxonomy,
                                             const std::vector<std::string>& universe);

struct RetuneResult {
    double best = 0.0;
    bool intercept_only = false;  // merged set was empty
    std::vector<std::string> warnings;
};

RetuneResult retune_on_merged(const Design& train, const std::set<std::string>& merged,
                              ModelKind kind, const std::vector<double>& grid, int inner_k,
                              std::uint64_t seed, bool impute_missing = false);

struct CvFoldResult {
    int fold = 0;
    RegressionMetrics metrics;
    double chosen_hyper = 0.0;
    std::vector<std::string> selected;  // merged variable set used by the fold's final fit
};

struct CvReport {
    FoldPlan plan;
    std::vector<CvFoldResult> folds;
    RegressionMetrics mean;
    RegressionMetrics stddev;
    double mean_hyper = 0.0;
    std::vector<double> out_of_fold_predictions;  // aligned to design rows
    std::vector<std::string> warnings;
};

struct HarnessOptions {
    int outer_k = 10;
    int inner_k = 10;
    int threads = 1;
    bool impute_missing = false;  // median-fill NaN features inside each training partition
};

// Full protocol per outer fold: stability selection on the other nine folds,
// expert merge, a second tuning round on the merged set, final fold fit,
// held-out metrics. Deterministic in (inputs, seed) for any thread count.
CvReport nested_cv_evaluate(const Design& design, const FeatureTaxonomy& taxonomy, ModelKind kind,
                            const std::vector<double>& grid, std::uint64_t seed,
                            const HarnessOptions& options = {});

std::string cv_report_csv(const CvReport& report);

struct FinalFit {
    TrainedLinearModel model;
    std::set<std::string> stability_selected;
    std::set<std::string> merged;
    double chosen_hyper = 0.0;
    std::vector<std::string> warnings;
};

// Runs the selection + retune protocol once on all rows and fits the ultimate
// model. Only selection-capable kinds are accepted (knn has no coefficient
// table to emit).
FinalFit fit_final_model(const Design& design, const FeatureTaxonomy& taxonomy, ModelKind kind,
                         const std::vector<double>& grid, std::uint64_t seed,
                         const HarnessOptions& options = {});

}  // namespace countyir
