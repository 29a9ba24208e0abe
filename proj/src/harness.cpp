#include "countyir/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "countyir/error.hpp"
#include "countyir/parallel.hpp"
#include "countyir/rng.hpp"
#include "countyir/textio.hpp"

namespace countyir {

namespace {

// Stream tags so every random decision has its own derived seed.
constexpr std::uint64_t kTagOuterPlan = 1;
constexpr std::uint64_t kTagInnerPlan = 2;

// Standardize a train/validation pair once so a lasso grid can be walked with
// warm starts.
struct StandardizedEval {
    Eigen::MatrixXd z_train;
    Eigen::MatrixXd z_validation;
    Eigen::VectorXd y_train;
    double response_mean = 0.0;

    void prepare(const Design& train, const Design& validation, bool impute_missing) {
        const Standardizer standardizer =
            fit_standardizer(train.features, train.response, impute_missing);
        z_train = apply_standardizer(standardizer, train.features);
        z_validation = apply_standardizer(standardizer, validation.features);
        response_mean = standardizer.response_mean;
        y_train = train.response.array() - response_mean;
    }
};

// Fits one grid point on train rows and returns validation predictions.
Eigen::VectorXd fit_and_predict(ModelKind kind, const Design& train, const Design& validation,
                                double hyper, bool impute_missing) {
    const AnyModel model = fit_model(kind, train.features, train.response, train.feature_names,
                                     hyper, impute_missing);
    return predict_model(model, validation.features);
}

// Validation MSE for every grid point on a single train/validation split.
// Lasso walks the grid with warm starts; the grid arrives descending so each
// start is the previous, more regularized, solution.
std::vector<double> fold_grid_mse(ModelKind kind, const Design& train, const Design& validation,
                                  const std::vector<double>& grid, bool impute_missing) {
    std::vector<double> mse(grid.size());
    const auto n_val = static_cast<double>(validation.n_rows());
    if (kind == ModelKind::lasso) {
        StandardizedEval eval;
        eval.prepare(train, validation, impute_missing);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(train.features.cols());
        for (std::size_t g = 0; g < grid.size(); ++g) {
            LassoOptions options;
            options.warm_start = &beta;
            beta = lasso_coordinate_descent(eval.z_train, eval.y_train, grid[g], options);
            const Eigen::VectorXd pred =
                (eval.z_validation * beta).array() + eval.response_mean;
            mse[g] = (validation.response - pred).squaredNorm() / n_val;
        }
        return mse;
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const Eigen::VectorXd pred =
            fit_and_predict(kind, train, validation, grid[g], impute_missing);
        mse[g] = (validation.response - pred).squaredNorm() / n_val;
    }
    return mse;
}

struct InnerSplit {
    Design train;
    Design validation;
};

InnerSplit make_inner_split(const Design& design, const FoldPlan& plan, int fold) {
    return {subset_rows(design, plan.complement_rows(fold)),
            subset_rows(design, plan.fold_rows(fold))};
}

int argmin_preferring_first(const std::vector<double>& values) {
    int best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best]) best = static_cast<int>(i);
    return best;
}

RegressionMetrics metrics_mean(const std::vector<CvFoldResult>& folds) {
    RegressionMetrics mean{};
    const double k = static_cast<double>(folds.size());
    for (const auto& fold : folds) {
        mean.mse += fold.metrics.mse / k;
        mean.pearson_corr += fold.metrics.pearson_corr / k;
        mean.r_squared_sse += fold.metrics.r_squared_sse / k;
        mean.r_squared_corr += fold.metrics.r_squared_corr / k;
        mean.corr_defined = mean.corr_defined && fold.metrics.corr_defined;
    }
    return mean;
}

RegressionMetrics metrics_stddev(const std::vector<CvFoldResult>& folds,
                                 const RegressionMetrics& mean) {
    RegressionMetrics sd{};
    if (folds.size() < 2) return sd;
    const double denom = static_cast<double>(folds.size()) - 1.0;
    double mse = 0, corr = 0, r2s = 0, r2c = 0;
    for (const auto& fold : folds) {
        const auto sq = [](double d) { return d * d; };
        mse += sq(fold.metrics.mse - mean.mse);
        corr += sq(fold.metrics.pearson_corr - mean.pearson_corr);
        r2s += sq(fold.metrics.r_squared_sse - mean.r_squared_sse);
        r2c += sq(fold.metrics.r_squared_corr - mean.r_squared_corr);
    }
    sd.mse = std::sqrt(mse / denom);
    sd.pearson_corr = std::sqrt(corr / denom);
    sd.r_squared_sse = std::sqrt(r2s / denom);
    sd.r_squared_corr = std::sqrt(r2c / denom);
    return sd;
}

}  // namespace

Design make_design(const CountyTable& table, const FeatureSelection& selection) {
    return {feature_matrix(table, selection), response_vector(table), selection.feature_names};
}

Design subset_rows(const Design& design, const std::vector<int>& rows) {
    Design out;
    out.feature_names = design.feature_names;
    out.features.resize(rows.size(), design.features.cols());
    out.response.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.features.row(static_cast<Eigen::Index>(i)) = design.features.row(rows[i]);
        out.response[static_cast<Eigen::Index>(i)] = design.response[rows[i]];
    }
    return out;
}

Design subset_columns(const Design& design, const std::vector<std::string>& names) {
    std::unordered_set<std::string> wanted(names.begin(), names.end());
    std::vector<int> cols;
    Design out;
    for (std::size_t j = 0; j < design.feature_names.size(); ++j) {
        if (wanted.count(design.feature_names[j])) {
            cols.push_back(static_cast<int>(j));
            out.feature_names.push_back(design.feature_names[j]);
        }
    }
    out.features.resize(design.features.rows(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        out.features.col(static_cast<Eigen::Index>(j)) = design.features.col(cols[j]);
    out.response = design.response;
    return out;
}

std::vector<int> FoldPlan::fold_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) rows.push_back(static_cast<int>(i));
    return rows;
}

std::vector<int> FoldPlan::complement_rows(int fold) const {
    std::vector<int> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) rows.push_back(static_cast<int>(i));
    return rows;
}

FoldPlan partition_folds(int n, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::parameter, "fold count must be >= 2");
    if (n < k)
        throw Error(ErrorKind::parameter, "cannot split " + std::to_string(n) + " rows into " +
                                              std::to_string(k) + " folds");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, kTagOuterPlan));
    rng.shuffle(order);

    FoldPlan plan;
    plan.seed = seed;
    plan.k = k;
    plan.assignments.resize(n);
    for (int i = 0; i < n; ++i) plan.assignments[order[i]] = i % k;
    return plan;
}

GridSearchResult grid_search_inner(const Design& train, ModelKind kind,
                                   const std::vector<double>& grid, int inner_k,
                                   std::uint64_t seed, bool impute_missing) {
    if (grid.empty()) throw Error(ErrorKind::parameter, "hyperparameter grid is empty");
    const FoldPlan plan = partition_folds(static_cast<int>(train.n_rows()), inner_k,
                                          derive_seed(seed, kTagInnerPlan));
    GridSearchResult result;
    result.mean_validation_mse.assign(grid.size(), 0.0);
    for (int fold = 0; fold < inner_k; ++fold) {
        const InnerSplit split = make_inner_split(train, plan, fold);
        const auto mse =
            fold_grid_mse(kind, split.train, split.validation, grid, impute_missing);
        for (std::size_t g = 0; g < grid.size(); ++g)
            result.mean_validation_mse[g] += mse[g] / inner_k;
    }
    result.best_index = argmin_preferring_first(result.mean_validation_mse);
    result.best = grid[result.best_index];
    return result;
}

std::set<std::string> intersect_selected(const std::vector<std::set<std::string>>& per_fold) {
    if (per_fold.empty()) return {};
    std::set<std::string> intersection = per_fold.front();
    for (std::size_t f = 1; f < per_fold.size(); ++f) {
        std::set<std::string> next;
        std::set_intersection(intersection.begin(), intersection.end(), per_fold[f].begin(),
                              per_fold[f].end(), std::inserter(next, next.begin()));
        intersection = std::move(next);
    }
    return intersection;
}

std::set<std::string> stable_variable_selection(const Design& train, ModelKind kind,
                                                const std::vector<double>& grid, int inner_k,
                                                std::uint64_t seed, bool impute_missing) {
    if (!model_supports_selection(kind))
        throw Error(ErrorKind::parameter,
                    std::string("model kind '") + to_string(kind) + "' has no variable selection");
    if (grid.empty()) throw Error(ErrorKind::parameter, "hyperparameter grid is empty");
    const FoldPlan plan = partition_folds(static_cast<int>(train.n_rows()), inner_k,
                                          derive_seed(seed, kTagInnerPlan));

    std::vector<std::set<std::string>> per_fold(inner_k);
    for (int fold = 0; fold < inner_k; ++fold) {
        const InnerSplit split = make_inner_split(train, plan, fold);
        const auto mse =
            fold_grid_mse(kind, split.train, split.validation, grid, impute_missing);
        const int best = argmin_preferring_first(mse);
        const AnyModel model = fit_model(kind, split.train.features, split.train.response,
                                         split.train.feature_names, grid[best], impute_missing);
        const auto names = selected_variables(std::get<TrainedLinearModel>(model));
        per_fold[fold] = std::set<std::string>(names.begin(), names.end());
    }
    return intersect_selected(per_fold);
}

std::set<std::string> merge_expert_variables(const std::set<std::string>& selected,
                                             const FeatureTaxonomy& taxonomy,
                                             const std::vector<std::string>& universe) {
    std::set<std::string> merged = selected;
    const std::unordered_set<std::string> in_universe(universe.begin(), universe.end());
    for (const auto& entry : taxonomy.entries)
        if (entry.expert && in_universe.count(entry.feature_name))
            merged.insert(entry.feature_name);
    return merged;
}

RetuneResult retune_on_merged(const Design& train, const std::set<std::string>& merged,
                              ModelKind kind, const std::vector<double>& grid, int inner_k,
                              std::uint64_t seed, bool impute_missing) {
    RetuneResult result;
    if (merged.empty()) {
        result.intercept_only = true;
        result.warnings.push_back(
            "merged variable set is empty; falling back to an intercept-only model");
        return result;
    }
    std::vector<std::string> names(merged.begin(), merged.end());
    const Design restricted = subset_columns(train, names);
    const GridSearchResult search =
        grid_search_inner(restricted, kind, grid, inner_k, seed, impute_missing);
    result.best = search.best;
    return result;
}

CvReport nested_cv_evaluate(const Design& design, const FeatureTaxonomy& taxonomy, ModelKind kind,
                            const std::vector<double>& grid, std::uint64_t seed,
                            const HarnessOptions& options) {
    if (design.n_rows() == 0) throw Error(ErrorKind::insufficient_data, "empty design");
    if (grid.empty()) throw Error(ErrorKind::parameter, "hyperparameter grid is empty");

    CvReport report;
    report.plan = partition_folds(static_cast<int>(design.n_rows()), options.outer_k, seed);
    report.folds.resize(options.outer_k);
    report.out_of_fold_predictions.assign(design.n_rows(), 0.0);
    std::vector<std::vector<std::string>> fold_warnings(options.outer_k);

    detail::run_indexed(options.outer_k, options.threads, [&](int fold) {
        try {
            const std::vector<int> train_rows = report.plan.complement_rows(fold);
            const std::vector<int> test_rows = report.plan.fold_rows(fold);
            const Design train = subset_rows(design, train_rows);
            const Design test = subset_rows(design, test_rows);
            const std::uint64_t inner_seed = derive_seed(seed, 100 + fold);

            std::set<std::string> merged;
            if (model_supports_selection(kind)) {
                const auto stable =
                    stable_variable_selection(train, kind, grid, options.inner_k, inner_seed,
                                              options.impute_missing);
                merged = merge_expert_variables(stable, taxonomy, design.feature_names);
            } else {
                merged.insert(design.feature_names.begin(), design.feature_names.end());
            }

            const RetuneResult retune =
                retune_on_merged(train, merged, kind, grid, options.inner_k, inner_seed,
                                 options.impute_missing);
            for (const auto& warning : retune.warnings)
                fold_warnings[fold].push_back("fold " + std::to_string(fold) + ": " + warning);

            std::vector<std::string> merged_ordered;
            for (const auto& name : design.feature_names)
                if (merged.count(name)) merged_ordered.push_back(name);

            const Design train_merged = subset_columns(train, merged_ordered);
            const Design test_merged = subset_columns(test, merged_ordered);
            const double hyper = retune.intercept_only ? 0.0 : retune.best;
            const AnyModel model =
                fit_model(kind, train_merged.features, train_merged.response,
                          train_merged.feature_names, hyper, options.impute_missing);
            const Eigen::VectorXd predictions = predict_model(model, test_merged.features);

            CvFoldResult& slot = report.folds[fold];
            slot.fold = fold;
            if (test.response.size() >= 2) {
                slot.metrics = compute_metrics(test.response, predictions);
            } else {
                // single-row fold: the squared error stands, correlation does not
                slot.metrics.mse = (test.response - predictions).squaredNorm() /
                                   static_cast<double>(test.response.size());
                slot.metrics.corr_defined = false;
                slot.metrics.pearson_corr = std::numeric_limits<double>::quiet_NaN();
                slot.metrics.r_squared_sse = std::numeric_limits<double>::quiet_NaN();
                slot.metrics.r_squared_corr = std::numeric_limits<double>::quiet_NaN();
            }
            slot.chosen_hyper = hyper;
            slot.selected = merged_ordered;
            for (std::size_t i = 0; i < test_rows.size(); ++i)
                report.out_of_fold_predictions[test_rows[i]] =
                    predictions[static_cast<Eigen::Index>(i)];
        } catch (const Error& error) {
            throw Error(error.kind(),
                        "outer fold " + std::to_string(fold) + ": " + error.what());
        }
    });

    for (auto& warnings : fold_warnings)
        report.warnings.insert(report.warnings.end(), warnings.begin(), warnings.end());
    report.mean = metrics_mean(report.folds);
    report.stddev = metrics_stddev(report.folds, report.mean);
    report.mean_hyper = 0.0;
    for (const auto& fold : report.folds)
        report.mean_hyper += fold.chosen_hyper / static_cast<double>(report.folds.size());
    return report;
}

std::string cv_report_csv(const CvReport& report) {
    std::string out = "fold,mse,corr,r2_sse,r2_corr,hyper,selected_count\n";
    for (const auto& fold : report.folds) {
        out += join_csv({std::to_string(fold.fold), fmt_double(fold.metrics.mse),
                         fmt_double(fold.metrics.pearson_corr),
                         fmt_double(fold.metrics.r_squared_sse),
                         fmt_double(fold.metrics.r_squared_corr), fmt_double(fold.chosen_hyper),
                         std::to_string(fold.selected.size())});
        out += "\n";
    }
    double mean_count = 0.0;
    for (const auto& fold : report.folds)
        mean_count += static_cast<double>(fold.selected.size()) / report.folds.size();
    out += join_csv({"mean", fmt_double(report.mean.mse), fmt_double(report.mean.pearson_corr),
                     fmt_double(report.mean.r_squared_sse), fmt_double(report.mean.r_squared_corr),
                     fmt_double(report.mean_hyper), fmt_double(mean_count)});
    out += "\n";
    out += join_csv({"std", fmt_double(report.stddev.mse), fmt_double(report.stddev.pearson_corr),
                     fmt_double(report.stddev.r_squared_sse),
                     fmt_double(report.stddev.r_squared_corr), "", ""});
    out += "\n";
    return out;
}

FinalFit fit_final_model(const Design& design, const FeatureTaxonomy& taxonomy, ModelKind kind,
                         const std::vector<double>& grid, std::uint64_t seed,
                         const HarnessOptions& options) {
    if (!model_supports_selection(kind))
        throw Error(ErrorKind::parameter,
                    std::string("final model requires a coefficient-based kind, got '") +
                        to_string(kind) + "'");
    if (design.n_rows() == 0) throw Error(ErrorKind::insufficient_data, "empty design");

    FinalFit result;
    const std::uint64_t inner_seed = derive_seed(seed, 7);
    result.stability_selected = stable_variable_selection(
        design, kind, grid, options.inner_k, inner_seed, options.impute_missing);
    result.merged = merge_expert_variables(result.stability_selected, taxonomy,
                                           design.feature_names);
    const RetuneResult retune = retune_on_merged(design, result.merged, kind, grid,
                                                 options.inner_k, inner_seed,
                                                 options.impute_missing);
    result.warnings = retune.warnings;
    result.chosen_hyper = retune.intercept_only ? 0.0 : retune.best;

    std::vector<std::string> merged_ordered;
    for (const auto& name : design.feature_names)
        if (result.merged.count(name)) merged_ordered.push_back(name);
    const Design restricted = subset_columns(design, merged_ordered);
    AnyModel model = fit_model(kind, restricted.features, restricted.response,
                               restricted.feature_names, result.chosen_hyper,
                               options.impute_missing);
    result.model = std::get<TrainedLinearModel>(std::move(model));
    return result;
}

}  // namespace countyir
