#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "countyir/dataset.hpp"

namespace countyir {

// Linear model on the standardized feature scale. The intercept carries the
// training response mean, so predicting at the training feature means returns
// the intercept.
struct TrainedLinearModel {
    double intercept = 0.0;              // response units (cases per 100,000)
    Eigen::VectorXd coefficients;        // standardized scale, aligned to feature_names
    Standardizer standardizer;
    double lambda = 0.0;
    std::vector<std::string> feature_names;
};

struct KnnModel {
    int k = 1;
    Standardizer standardizer;
    Eigen::MatrixXd train_features;  // standardized
    Eigen::VectorXd train_response;
    std::vector<std::string> feature_names;
};

struct RegressionMetrics {
    double mse = 0.0;
    double pearson_corr = 0.0;   // NaN when flagged undefined
    double r_squared_sse = 0.0;  // 1 - SSE/SST; NaN when observations are constant
    double r_squared_corr = 0.0; // squared Pearson correlation
    bool corr_defined = true;
};

// sign(z) * max(|z| - gamma, 0)
double soft_threshold(double z, double gamma);

// Smallest penalty at which the all-zero coefficient vector is optimal:
// max_j |x_j . y| / n on standardized columns and centered response.
double lambda_max(const Eigen::MatrixXd& standardized, const Eigen::VectorXd& centered);

struct LassoOptions {
    double tol = 1e-7;       // sweep converges when the largest coefficient change drops below
    int max_sweeps = 10000;
    std::vector<double>* objective_trace = nullptr;  // one entry per sweep when non-null
    const Eigen::VectorXd* warm_start = nullptr;
    bool impute_missing = false;  // median-fill NaN cells from the training rows
};

// Cyclic coordinate descent for (1/2n)|y - Xb|^2 + lambda*|b|_1 on
// standardized inputs. Coordinates update in column order. Throws
// ConvergenceError with the last iterate if max_sweeps is exhausted.
Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& standardized,
                                         const Eigen::VectorXd& centered, double lambda,
                                         const LassoOptions& options = {});

// Model-level fits. They standardize internally (sample sd), center the
// response, and store the training response mean as the intercept.
TrainedLinearModel lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                             std::vector<std::string> feature_names, double lambda,
                             const LassoOptions& options = {});
TrainedLinearModel ols_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                           std::vector<std::string> feature_names,
                           bool impute_missing = false);
TrainedLinearModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                             std::vector<std::string> feature_names, double lambda,
                             bool impute_missing = false);

// Forward selection scored by n*ln(SSE/n) + (k+1)*ln(n), the +1 counting the
// intercept; stops as soon as no single addition improves the score.
TrainedLinearModel stepwise_bic_fit(const Eigen::MatrixXd& features,
                                    const Eigen::VectorXd& response,
                                    std::vector<std::string> feature_names,
                                    bool impute_missing = false);

KnnModel knn_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                 std::vector<std::string> feature_names, int k, bool impute_missing = false);

// Mean response of the k nearest training rows, Euclidean distance on the
// standardized scale, distance ties broken by lower training row index.
Eigen::VectorXd knn_predict(const KnnModel& model, const Eigen::MatrixXd& query);

Eigen::VectorXd predict_linear(const TrainedLinearModel& model, const Eigen::MatrixXd& features);

// Gathers the model's feature columns from the table by name.
Eigen::VectorXd predict_table(const TrainedLinearModel& model, const CountyTable& table);

// Feature names with exactly nonzero coefficients.
std::vector<std::string> selected_variables(const TrainedLinearModel& model);

RegressionMetrics compute_metrics(const Eigen::VectorXd& observed,
                                  const Eigen::VectorXd& predicted);

// Coefficient file: `intercept=` and `lambda=` header lines, then a
// `feature,coefficient[,mean,sd]` table. Two-column files load with identity
// standardization; save_coefficients always writes four columns so reloaded
// models predict bit-identically.
void save_coefficients(const TrainedLinearModel& model, const std::filesystem::path& path);
TrainedLinearModel load_coefficients(const std::filesystem::path& path);

enum class ModelKind { lasso, ridge, ols, stepwise_bic, knn };

const char* to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& text);

// Grid search is over lambda for lasso/ridge and k for knn; ols and
// stepwise_bic take no hyperparameter.
bool model_needs_grid(ModelKind kind);
// Whether fits of this kind carry a meaningful selected-variable set.
bool model_supports_selection(ModelKind kind);

using AnyModel = std::variant<TrainedLinearModel, KnnModel>;

AnyModel fit_model(ModelKind kind, const Eigen::MatrixXd& features,
                   const Eigen::VectorXd& response, const std::vector<std::string>& feature_names,
                   double hyper, bool impute_missing = false);
Eigen::VectorXd predict_model(const AnyModel& model, const Eigen::MatrixXd& features);

// 100 log-spaced values from lambda_max down to min_ratio*lambda_max,
// descending so grid ties resolve toward more regularization.
std::vector<double> lambda_grid(double lambda_max_value, int count = 100, double min_ratio = 1e-4);

}  // namespace countyir
