#include "countyir/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace countyir {
namespace oracle {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Largest eigenvalue of X'X/n by power iteration with a fixed start.
double top_eigenvalue(const std::vector<std::vector<double>>& x_rows, std::size_t p) {
    const std::size_t n = x_rows.size();
    std::vector<double> v(p, 1.0 / std::sqrt(static_cast<double>(p)));
    std::vector<double> xv(n), next(p);
    double eigenvalue = 0.0;
    for (int it = 0; it < 200; ++it) {
        for (std::size_t i = 0; i < n; ++i) xv[i] = dot(x_rows[i], v);
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) next[j] += x_rows[i][j] * xv[i];
        for (auto& value : next) value /= static_cast<double>(n);
        const double norm = std::sqrt(dot(next, next));
        if (norm == 0.0) return 0.0;
        eigenvalue = norm;
        for (std::size_t j = 0; j < p; ++j) v[j] = next[j] / norm;
    }
    return eigenvalue;
}

double shrink(double z, double gamma) {
    if (z > gamma) return z - gamma;
    if (z < -gamma) return z + gamma;
    return 0.0;
}

}  // namespace

std::vector<double> ista_lasso(const std::vector<std::vector<double>>& x_rows,
                               const std::vector<double>& y, double lambda, int iterations) {
    const std::size_t n = x_rows.size();
    if (n == 0 || y.size() != n) throw std::invalid_argument("ista: bad dimensions");
    const std::size_t p = x_rows[0].size();
    if (p == 0) return {};

    const double lipschitz = top_eigenvalue(x_rows, p);
    // Slightly conservative step keeps the iteration inside the convergent range.
    const double step = lipschitz > 0 ? 1.0 / (lipschitz * 1.0000001) : 1.0;

    std::vector<double> beta(p, 0.0);
    std::vector<double> residual(y);
    std::vector<double> gradient(p);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - dot(x_rows[i], beta);
        std::fill(gradient.begin(), gradient.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < p; ++j) gradient[j] += x_rows[i][j] * residual[i];
        for (std::size_t j = 0; j < p; ++j)
            beta[j] = shrink(beta[j] + step * gradient[j] / static_cast<double>(n), step * lambda);
    }
    return beta;
}

double lasso_objective(const std::vector<std::vector<double>>& x_rows,
                       const std::vector<double>& y, double lambda,
                       const std::vector<double>& beta) {
    const std::size_t n = x_rows.size();
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - dot(x_rows[i], beta);
        sse += r * r;
    }
    double l1 = 0.0;
    for (const double b : beta) l1 += std::abs(b);
    return 0.5 * sse / static_cast<double>(n) + lambda * l1;
}

std::vector<double> brute_force_local_moran(
    const std::vector<double>& values, const std::vector<std::vector<double>>& weight_matrix) {
    const std::size_t n = values.size();
    if (weight_matrix.size() != n) throw std::invalid_argument("moran oracle: bad weight matrix");
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double m2 = 0.0;
    for (const double v : values) m2 += (v - mean) * (v - mean);
    m2 /= static_cast<double>(n);
    if (m2 == 0.0) throw std::invalid_argument("moran oracle: constant field");

    std::vector<double> local(n);
    for (std::size_t i = 0; i < n; ++i) {
        double lag = 0.0;
        bool any_neighbor = false;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            if (weight_matrix[i][j] != 0.0) any_neighbor = true;
            lag += weight_matrix[i][j] * (values[j] - mean);
        }
        local[i] = any_neighbor ? (values[i] - mean) / m2 * lag
                                : std::numeric_limits<double>::quiet_NaN();
    }
    return local;
}

std::vector<ExhaustivePseudoP> exhaustive_pseudo_p(
    const std::vector<double>& values, const std::vector<std::vector<double>>& weight_matrix) {
    const std::size_t n = values.size();
    if (n < 2 || n > 8) throw std::invalid_argument("exhaustive oracle: n must be in [2, 8]");
    const std::vector<double> observed = brute_force_local_moran(values, weight_matrix);

    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    double m2 = 0.0;
    for (const double v : values) m2 += (v - mean) * (v - mean);
    m2 /= static_cast<double>(n);

    std::vector<ExhaustivePseudoP> results(n);
    for (std::size_t i = 0; i < n; ++i) {
        ExhaustivePseudoP& result = results[i];
        result.local_i = observed[i];
        if (std::isnan(observed[i])) continue;

        std::vector<double> others;
        std::vector<std::size_t> other_locations;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            others.push_back(values[j] - mean);
            other_locations.push_back(j);
        }
        std::vector<int> order(others.size());
        std::iota(order.begin(), order.end(), 0);

        const double abs_observed = std::abs(observed[i]);
        do {
            double lag = 0.0;
            for (std::size_t t = 0; t < other_locations.size(); ++t)
                lag += weight_matrix[i][other_locations[t]] * others[order[t]];
            const double stat = (values[i] - mean) / m2 * lag;
            if (std::abs(stat) >= abs_observed) ++result.exceedances;
            ++result.total;
        } while (std::next_permutation(order.begin(), order.end()));
        result.pseudo_p = (static_cast<double>(result.exceedances) + 1.0) /
                          (static_cast<double>(result.total) + 1.0);
    }
    return results;
}

}  // namespace oracle
}  // namespace countyir
