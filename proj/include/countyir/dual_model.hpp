#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "countyir/harness.hpp"

namespace countyir {

// Per-county comparison of the restricted and full models: the residual
// y - pred1 measures departure from the non-modifiable expectation, the
// impact pred2 - pred1 measures what the modifiable features add. Negative
// impact means they pull the predicted rate down.
struct DualModelRow {
    std::string fips;
    double observed = 0.0;
    double pred1 = 0.0;
    double pred2 = 0.0;
    double residual = 0.0;  // observed - pred1
    double impact = 0.0;    // pred2 - pred1
};

struct DualModelResult {
    std::vector<DualModelRow> rows;
    std::vector<std::string> warnings;
};

struct DualModels {
    FinalFit model1;  // non-modifiable universe
    FinalFit model2;  // full universe
    bool universes_identical = false;
};

// Trains both models with the full selection + retune protocol. Seeds derive
// independently from the master seed, except when the taxonomy has no
// modifiable features: then the universes coincide and model 2 reuses
// model 1's fit so the impact is identically zero.
DualModels fit_dual_models(const CountyTable& table, const FeatureTaxonomy& taxonomy,
                           ModelKind kind, const std::vector<double>& grid, std::uint64_t seed,
                           const HarnessOptions& options = {});

std::vector<double> residuals(const std::vector<double>& observed,
                              const std::vector<double>& pred1);
std::vector<double> modifiable_impact(const std::vector<double>& pred1,
                                      const std::vector<double>& pred2);

DualModelResult dual_model_table(const CountyTable& table, const std::vector<double>& pred1,
                                 const std::vector<double>& pred2);

std::string dual_results_csv(const DualModelResult& result);
DualModelResult load_dual_results(const std::filesystem::path& path);

}  // namespace countyir
