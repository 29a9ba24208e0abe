#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace countyir {
namespace oracle {

// Verification-only reimplementations of the core numerics. They share no
// code with the main paths: plain vectors, scalar loops, and a different
// optimization algorithm, so agreement between the two sides is meaningful.
// Test suites call these; nothing in the production pipeline does.

// Proximal gradient (ISTA) for (1/2n)|y - Xb|^2 + lambda*|b|_1. The step size
// is 1/L with L estimated by power iteration on X'X/n; the iteration count is
// fixed rather than tolerance-driven.
std::vector<double> ista_lasso(const std::vector<std::vector<double>>& x_rows,
                               const std::vector<double>& y, double lambda,
                               int iterations = 200000);

double lasso_objective(const std::vector<std::vector<double>>& x_rows,
                       const std::vector<double>& y, double lambda,
                       const std::vector<double>& beta);

// Direct double-loop local Moran over a dense weight matrix.
std::vector<double> brute_force_local_moran(const std::vector<double>& values,
                                            const std::vector<std::vector<double>>& weight_matrix);

struct ExhaustivePseudoP {
    double local_i = 0.0;
    long exceedances = 0;  // arrangements with |I_perm| >= |I_observed|
    long total = 0;        // (n-1)! arrangements
    double pseudo_p = 0.0; // (exceedances + 1) / (total + 1)
};

// Exact conditional-permutation reference for tiny fields (n <= 8).
std::vector<ExhaustivePseudoP> exhaustive_pseudo_p(
    const std::vector<double>& values, const std::vector<std::vector<double>>& weight_matrix);

}  // namespace oracle
}  // namespace countyir
