#include "countyir/regressors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "countyir/error.hpp"
#include "countyir/textio.hpp"

namespace countyir {

namespace {

constexpr double kRankTolerance = 1e-10;

struct StandardizedProblem {
    Standardizer standardizer;
    Eigen::MatrixXd z;        // standardized features
    Eigen::VectorXd centered; // response minus its mean
};

StandardizedProblem standardize_problem(const Eigen::MatrixXd& features,
                                        const Eigen::VectorXd& response,
                                        bool impute_missing = false) {
    StandardizedProblem problem;
    problem.standardizer = fit_standardizer(features, response, impute_missing);
    problem.z = apply_standardizer(problem.standardizer, features);
    problem.centered = response.array() - problem.standardizer.response_mean;
    return problem;
}

TrainedLinearModel package_model(StandardizedProblem&& problem, Eigen::VectorXd beta,
                                 std::vector<std::string> names, double lambda) {
    TrainedLinearModel model;
    model.intercept = problem.standardizer.response_mean;
    model.coefficients = std::move(beta);
    model.standardizer = std::move(problem.standardizer);
    model.lambda = lambda;
    model.feature_names = std::move(names);
    return model;
}

void check_names(const std::vector<std::string>& names, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(names.size()) != cols)
        throw Error(ErrorKind::shape, "feature name count " + std::to_string(names.size()) +
                                          " does not match column count " + std::to_string(cols));
}

// Least squares on already-standardized columns; rank check via column-pivoted QR.
Eigen::VectorXd ols_solve(const Eigen::MatrixXd& z, const Eigen::VectorXd& centered) {
    if (z.cols() == 0) return Eigen::VectorXd(0);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
    qr.setThreshold(kRankTolerance);
    if (qr.rank() < z.cols())
        throw Error(ErrorKind::singular_matrix,
                    "design matrix is rank deficient (rank " + std::to_string(qr.rank()) + " of " +
                        std::to_string(z.cols()) + ")");
    return qr.solve(centered);
}

double subset_sse(const Eigen::MatrixXd& z, const Eigen::VectorXd& centered,
                  const std::vector<int>& subset, Eigen::VectorXd* beta_out) {
    if (subset.empty()) {
        if (beta_out) beta_out->resize(0);
        return centered.squaredNorm();
    }
    Eigen::MatrixXd sub(z.rows(), subset.size());
    for (std::size_t j = 0; j < subset.size(); ++j) sub.col(j) = z.col(subset[j]);
    const Eigen::VectorXd beta = sub.colPivHouseholderQr().solve(centered);
    if (beta_out) *beta_out = beta;
    return (centered - sub * beta).squaredNorm();
}

}  // namespace

double soft_threshold(double z, double gamma) {
    if (gamma < 0) throw Error(ErrorKind::domain, "soft_threshold: gamma must be >= 0");
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

double lambda_max(const Eigen::MatrixXd& standardized, const Eigen::VectorXd& centered) {
    if (standardized.rows() != centered.size())
        throw Error(ErrorKind::shape, "lambda_max: row count mismatch");
    if (standardized.cols() == 0 || standardized.rows() == 0) return 0.0;
    // Same per-column expression the coordinate update evaluates at beta = 0,
    // so a fit at exactly lambda_max thresholds every coordinate to zero.
    const double inv_n = 1.0 / static_cast<double>(standardized.rows());
    double largest = 0.0;
    for (Eigen::Index j = 0; j < standardized.cols(); ++j)
        largest = std::max(largest, std::abs(standardized.col(j).dot(centered) * inv_n));
    return largest;
}

Eigen::VectorXd lasso_coordinate_descent(const Eigen::MatrixXd& standardized,
                                         const Eigen::VectorXd& centered, double lambda,
                                         const LassoOptions& options) {
    if (lambda < 0) throw Error(ErrorKind::domain, "lasso: lambda must be >= 0");
    if (standardized.rows() != centered.size())
        throw Error(ErrorKind::shape, "lasso: row count mismatch");

    const Eigen::Index n = standardized.rows();
    const Eigen::Index p = standardized.cols();
    const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (options.warm_start) {
        if (options.warm_start->size() != p)
            throw Error(ErrorKind::shape, "lasso: warm start has wrong length");
        beta = *options.warm_start;
    }
    if (p == 0) return beta;

    // Per-column (1/n) sum of squares; zero flags a constant column whose
    // coefficient stays pinned at zero.
    Eigen::VectorXd col_scale(p);
    for (Eigen::Index j = 0; j < p; ++j) col_scale[j] = standardized.col(j).squaredNorm() * inv_n;
    for (Eigen::Index j = 0; j < p; ++j)
        if (col_scale[j] == 0.0) beta[j] = 0.0;

    Eigen::VectorXd residual = centered - standardized * beta;

    for (int sweep = 1; sweep <= options.max_sweeps; ++sweep) {
        double max_change = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (col_scale[j] == 0.0) continue;
            const double old = beta[j];
            const double rho = standardized.col(j).dot(residual) * inv_n + col_scale[j] * old;
            const double updated = soft_threshold(rho, lambda) / col_scale[j];
            if (updated != old) {
                residual.noalias() -= standardized.col(j) * (updated - old);
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        if (options.objective_trace) {
            const double objective =
                0.5 * inv_n * residual.squaredNorm() + lambda * beta.cwiseAbs().sum();
            options.objective_trace->push_back(objective);
        }
        if (max_change < options.tol) return beta;
    }
    throw ConvergenceError(
        "lasso did not converge within " + std::to_string(options.max_sweeps) + " sweeps",
        std::vector<double>(beta.data(), beta.data() + beta.size()), options.max_sweeps);
}

TrainedLinearModel lasso_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                             std::vector<std::string> feature_names, double lambda,
                             const LassoOptions& options) {
    check_names(feature_names, features.cols());
    StandardizedProblem problem =
        standardize_problem(features, response, options.impute_missing);
    Eigen::VectorXd beta = lasso_coordinate_descent(problem.z, problem.centered, lambda, options);
    return package_model(std::move(problem), std::move(beta), std::move(feature_names), lambda);
}

TrainedLinearModel ols_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                           std::vector<std::string> feature_names, bool impute_missing) {
    check_names(feature_names, features.cols());
    StandardizedProblem problem = standardize_problem(features, response, impute_missing);
    Eigen::VectorXd beta = ols_solve(problem.z, problem.centered);
    return package_model(std::move(problem), std::move(beta), std::move(feature_names), 0.0);
}

TrainedLinearModel ridge_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                             std::vector<std::string> feature_names, double lambda,
                             bool impute_missing) {
    if (lambda < 0) throw Error(ErrorKind::domain, "ridge: lambda must be >= 0");
    check_names(feature_names, features.cols());
    StandardizedProblem problem = standardize_problem(features, response, impute_missing);
    const Eigen::Index p = problem.z.cols();
    Eigen::VectorXd beta(p);
    if (p > 0) {
        const double n = static_cast<double>(problem.z.rows());
        Eigen::MatrixXd gram = problem.z.transpose() * problem.z / n;
        gram.diagonal().array() += lambda;
        const Eigen::VectorXd rhs = problem.z.transpose() * problem.centered / n;
        if (lambda == 0.0) {
            beta = ols_solve(problem.z, problem.centered);
        } else {
            beta = gram.ldlt().solve(rhs);
        }
    }
    return package_model(std::move(problem), std::move(beta), std::move(feature_names), lambda);
}

TrainedLinearModel stepwise_bic_fit(const Eigen::MatrixXd& features,
                                    const Eigen::VectorXd& response,
                                    std::vector<std::string> feature_names,
                                    bool impute_missing) {
    check_names(feature_names, features.cols());
    const Eigen::Index n = features.rows();
    if (n <= 2) throw Error(ErrorKind::insufficient_data, "stepwise fit needs n > 2");
    StandardizedProblem problem = standardize_problem(features, response, impute_missing);
    const Eigen::Index p = problem.z.cols();
    const double nd = static_cast<double>(n);

    auto bic_of = [&](double sse, int k) {
        const double mean_sse = std::max(sse / nd, 1e-300);
        return nd * std::log(mean_sse) + (k + 1) * std::log(nd);
    };

    std::vector<int> chosen;
    std::vector<bool> in_model(p, false);
    double best_bic = bic_of(problem.centered.squaredNorm(), 0);

    for (;;) {
        int best_j = -1;
        double best_candidate_bic = best_bic;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (in_model[j]) continue;
            std::vector<int> candidate = chosen;
            candidate.push_back(static_cast<int>(j));
            double sse;
            try {
                sse = subset_sse(problem.z, problem.centered, candidate, nullptr);
            } catch (const Error&) {
                continue;  // collinear candidate, skip
            }
            const double bic = bic_of(sse, static_cast<int>(candidate.size()));
            if (bic < best_candidate_bic) {
                best_candidate_bic = bic;
                best_j = static_cast<int>(j);
            }
        }
        if (best_j < 0) break;
        chosen.push_back(best_j);
        in_model[best_j] = true;
        best_bic = best_candidate_bic;
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    if (!chosen.empty()) {
        Eigen::VectorXd sub_beta;
        subset_sse(problem.z, problem.centered, chosen, &sub_beta);
        for (std::size_t t = 0; t < chosen.size(); ++t) beta[chosen[t]] = sub_beta[t];
    }
    return package_model(std::move(problem), std::move(beta), std::move(feature_names), 0.0);
}

KnnModel knn_fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& response,
                 std::vector<std::string> feature_names, int k, bool impute_missing) {
    check_names(feature_names, features.cols());
    if (k < 1) throw Error(ErrorKind::parameter, "knn: k must be >= 1");
    if (k > features.rows())
        throw Error(ErrorKind::parameter, "knn: k = " + std::to_string(k) + " exceeds " +
                                              std::to_string(features.rows()) + " training rows");
    KnnModel model;
    model.k = k;
    model.standardizer = fit_standardizer(features, response, impute_missing);
    model.train_features = apply_standardizer(model.standardizer, features);
    model.train_response = response;
    model.feature_names = std::move(feature_names);
    return model;
}

Eigen::VectorXd knn_predict(const KnnModel& model, const Eigen::MatrixXd& query) {
    if (query.cols() != model.train_features.cols())
        throw Error(ErrorKind::shape, "knn: query feature count mismatch");
    const Eigen::MatrixXd standardized = apply_standardizer(model.standardizer, query);
    const Eigen::Index n_train = model.train_features.rows();
    if (model.k > n_train) throw Error(ErrorKind::parameter, "knn: k exceeds training size");

    Eigen::VectorXd predictions(query.rows());
    std::vector<std::pair<double, int>> distances(static_cast<std::size_t>(n_train));
    for (Eigen::Index q = 0; q < standardized.rows(); ++q) {
        for (Eigen::Index i = 0; i < n_train; ++i) {
            const double d2 = (model.train_features.row(i) - standardized.row(q)).squaredNorm();
            distances[static_cast<std::size_t>(i)] = {d2, static_cast<int>(i)};
        }
        std::partial_sort(distances.begin(), distances.begin() + model.k, distances.end());
        double sum = 0.0;
        for (int t = 0; t < model.k; ++t) sum += model.train_response[distances[t].second];
        predictions[q] = sum / model.k;
    }
    return predictions;
}

Eigen::VectorXd predict_linear(const TrainedLinearModel& model, const Eigen::MatrixXd& features) {
    if (features.cols() != static_cast<Eigen::Index>(model.feature_names.size()))
        throw Error(ErrorKind::alignment,
                    "prediction rows have " + std::to_string(features.cols()) +
                        " features, model expects " + std::to_string(model.feature_names.size()));
    const Eigen::MatrixXd z = apply_standardizer(model.standardizer, features);
    Eigen::VectorXd predictions = Eigen::VectorXd::Constant(features.rows(), model.intercept);
    // Accumulate column by column in model order so serialized models
    // reproduce predictions exactly.
    for (Eigen::Index j = 0; j < z.cols(); ++j)
        predictions.array() += model.coefficients[j] * z.col(j).array();
    return predictions;
}

Eigen::VectorXd predict_table(const TrainedLinearModel& model, const CountyTable& table) {
    std::unordered_map<std::string, int> column_of;
    for (std::size_t j = 0; j < table.feature_names.size(); ++j)
        column_of.emplace(table.feature_names[j], static_cast<int>(j));
    Eigen::MatrixXd features(table.n_rows(), model.feature_names.size());
    for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
        const auto it = column_of.find(model.feature_names[j]);
        if (it == column_of.end())
            throw Error(ErrorKind::alignment,
                        "model feature '" + model.feature_names[j] + "' not present in table");
        for (std::size_t i = 0; i < table.n_rows(); ++i)
            features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                table.records[i].features[it->second];
    }
    return predict_linear(model, features);
}

std::vector<std::string> selected_variables(const TrainedLinearModel& model) {
    std::vector<std::string> names;
    for (Eigen::Index j = 0; j < model.coefficients.size(); ++j)
        if (model.coefficients[j] != 0.0) names.push_back(model.feature_names[j]);
    return names;
}

RegressionMetrics compute_metrics(const Eigen::VectorXd& observed,
                                  const Eigen::VectorXd& predicted) {
    if (observed.size() != predicted.size())
        throw Error(ErrorKind::shape, "metrics: length mismatch " + std::to_string(observed.size()) +
                                          " vs " + std::to_string(predicted.size()));
    const Eigen::Index n = observed.size();
    if (n < 2) throw Error(ErrorKind::shape, "metrics: need at least 2 points");

    RegressionMetrics metrics;
    metrics.mse = (observed - predicted).squaredNorm() / static_cast<double>(n);

    const double obs_mean = observed.mean();
    const double pred_mean = predicted.mean();
    const Eigen::VectorXd obs_dev = observed.array() - obs_mean;
    const Eigen::VectorXd pred_dev = predicted.array() - pred_mean;
    const double sst = obs_dev.squaredNorm();
    const double pred_ss = pred_dev.squaredNorm();

    metrics.r_squared_sse =
        sst > 0 ? 1.0 - (observed - predicted).squaredNorm() / sst
                : std::numeric_limits<double>::quiet_NaN();

    if (sst > 0 && pred_ss > 0) {
        metrics.pearson_corr = obs_dev.dot(pred_dev) / std::sqrt(sst * pred_ss);
        metrics.r_squared_corr = metrics.pearson_corr * metrics.pearson_corr;
    } else {
        metrics.corr_defined = false;
        metrics.pearson_corr = std::numeric_limits<double>::quiet_NaN();
        metrics.r_squared_corr = std::numeric_limits<double>::quiet_NaN();
    }
    return metrics;
}

void save_coefficients(const TrainedLinearModel& model, const std::filesystem::path& path) {
    std::string out;
    out += "intercept=" + fmt_double(model.intercept) + "\n";
    out += "lambda=" + fmt_double(model.lambda) + "\n";
    out += "feature,coefficient,mean,sd\n";
    for (std::size_t j = 0; j < model.feature_names.size(); ++j) {
        out += join_csv({model.feature_names[j], fmt_double(model.coefficients[j]),
                         fmt_double(model.standardizer.mean[j]),
                         fmt_double(model.standardizer.sd[j])});
        out += "\n";
    }
    write_text_file(path, out);
}

TrainedLinearModel load_coefficients(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    TrainedLinearModel model;
    bool has_intercept = false;
    bool header_seen = false;
    bool with_stats = false;
    std::vector<double> coefs, means, sds;

    for (const auto& line : lines) {
        const auto trimmed = trim(line);
        if (trimmed.empty()) continue;
        if (trimmed.rfind("intercept=", 0) == 0) {
            if (!try_parse_double(trimmed.substr(10), model.intercept))
                throw Error(ErrorKind::format, path.string() + ": bad intercept line");
            has_intercept = true;
            continue;
        }
        if (trimmed.rfind("lambda=", 0) == 0) {
            if (!try_parse_double(trimmed.substr(7), model.lambda))
                throw Error(ErrorKind::format, path.string() + ": bad lambda line");
            continue;
        }
        const auto cells = split_csv_line(trimmed);
        if (!header_seen) {
            if (cells.size() >= 2 && cells[0] == "feature" && cells[1] == "coefficient") {
                header_seen = true;
                with_stats = cells.size() >= 4 && cells[2] == "mean" && cells[3] == "sd";
                continue;
            }
            throw Error(ErrorKind::format,
                        path.string() + ": expected 'feature,coefficient' header");
        }
        if (cells.size() < 2 || (with_stats && cells.size() < 4))
            throw Error(ErrorKind::format, path.string() + ": short coefficient row");
        double coef, mean = 0.0, sd = 1.0;
        if (!try_parse_double(cells[1], coef))
            throw Error(ErrorKind::format,
                        path.string() + ": bad coefficient for '" + cells[0] + "'");
        if (with_stats &&
            (!try_parse_double(cells[2], mean) || !try_parse_double(cells[3], sd)))
            throw Error(ErrorKind::format,
                        path.string() + ": bad mean/sd for '" + cells[0] + "'");
        model.feature_names.push_back(std::string(trim(cells[0])));
        coefs.push_back(coef);
        means.push_back(mean);
        sds.push_back(sd);
    }
    if (!has_intercept || !header_seen)
        throw Error(ErrorKind::format, path.string() + ": missing intercept or coefficient table");

    const Eigen::Index p = static_cast<Eigen::Index>(coefs.size());
    model.coefficients = Eigen::Map<Eigen::VectorXd>(coefs.data(), p);
    model.standardizer.mean = Eigen::Map<Eigen::VectorXd>(means.data(), p);
    model.standardizer.sd = Eigen::Map<Eigen::VectorXd>(sds.data(), p);
    model.standardizer.response_mean = model.intercept;
    return model;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::lasso: return "lasso";
    case ModelKind::ridge: return "ridge";
    case ModelKind::ols: return "ols";
    case ModelKind::stepwise_bic: return "stepwise_bic";
    case ModelKind::knn: return "knn";
    }
    return "lasso";
}

ModelKind parse_model_kind(const std::string& text) {
    if (text == "lasso") return ModelKind::lasso;
    if (text == "ridge") return ModelKind::ridge;
    if (text == "ols") return ModelKind::ols;
    if (text == "stepwise_bic" || text == "bic") return ModelKind::stepwise_bic;
    if (text == "knn") return ModelKind::knn;
    throw Error(ErrorKind::parameter, "unknown model kind '" + text + "'");
}

bool model_needs_grid(ModelKind kind) {
    return kind == ModelKind::lasso || kind == ModelKind::ridge || kind == ModelKind::knn;
}

bool model_supports_selection(ModelKind kind) { return kind != ModelKind::knn; }

AnyModel fit_model(ModelKind kind, const Eigen::MatrixXd& features,
                   const Eigen::VectorXd& response, const std::vector<std::string>& feature_names,
                   double hyper, bool impute_missing) {
    switch (kind) {
    case ModelKind::lasso: {
        LassoOptions options;
        options.impute_missing = impute_missing;
        return lasso_fit(features, response, feature_names, hyper, options);
    }
    case ModelKind::ridge:
        return ridge_fit(features, response, feature_names, hyper, impute_missing);
    case ModelKind::ols: return ols_fit(features, response, feature_names, impute_missing);
    case ModelKind::stepwise_bic:
        return stepwise_bic_fit(features, response, feature_names, impute_missing);
    case ModelKind::knn:
        return knn_fit(features, response, feature_names, static_cast<int>(hyper),
                       impute_missing);
    }
    throw Error(ErrorKind::parameter, "unknown model kind");
}

Eigen::VectorXd predict_model(const AnyModel& model, const Eigen::MatrixXd& features) {
    if (std::holds_alternative<TrainedLinearModel>(model))
        return predict_linear(std::get<TrainedLinearModel>(model), features);
    return knn_predict(std::get<KnnModel>(model), features);
}

std::vector<double> lambda_grid(double lambda_max_value, int count, double min_ratio) {
    if (count < 1) throw Error(ErrorKind::parameter, "lambda grid needs at least one point");
    if (!(min_ratio > 0) || min_ratio > 1)
        throw Error(ErrorKind::parameter, "lambda grid min_ratio must be in (0, 1]");
    std::vector<double> grid;
    grid.reserve(count);
    if (lambda_max_value <= 0) {
        grid.assign(static_cast<std::size_t>(count), 0.0);
        return grid;
    }
    if (count == 1) {
        grid.push_back(lambda_max_value);
        return grid;
    }
    const double log_max = std::log(lambda_max_value);
    const double log_min = std::log(lambda_max_value * min_ratio);
    for (int i = 0; i < count; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(count - 1);
        grid.push_back(std::exp(log_max + t * (log_min - log_max)));
    }
    grid.front() = lambda_max_value;  // exact endpoints
    grid.back() = lambda_max_value * min_ratio;
    return grid;
}

}  // namespace countyir
