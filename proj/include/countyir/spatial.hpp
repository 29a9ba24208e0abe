#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "countyir/dual_model.hpp"

namespace countyir {

struct Centroid {
    std::string fips;
    double lat = 0.0;
    double lon = 0.0;
};

// Great-circle distance in km on a sphere of radius 6371.
double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b);

enum class WeightScheme { contiguity, fixed_band, inverse_distance };

struct Neighbor {
    int index;
    double weight;
};

// Neighbor lists over a fixed id order. The structure is symmetric before row
// standardization; ids with no neighbors are recorded as isolates.
struct SpatialWeights {
    WeightScheme scheme = WeightScheme::contiguity;
    double threshold_km = 0.0;  // band threshold or inverse-distance cutoff
    std::vector<std::string> ids;
    std::vector<std::vector<Neighbor>> neighbors;
    std::vector<int> isolates;
    bool row_standardized = false;

    std::size_t size() const { return ids.size(); }
    bool is_isolate(int i) const { return neighbors[i].empty(); }
};

SpatialWeights build_contiguity_weights(const std::vector<std::string>& ids,
                                        const std::vector<std::pair<std::string, std::string>>& edges);
SpatialWeights build_distance_weights(const std::vector<Centroid>& centroids, WeightScheme scheme,
                                      double threshold_km);

// Scales every non-isolate row to sum one. Idempotent.
SpatialWeights row_standardize(const SpatialWeights& weights);

// Anselin local statistic: with deviations z_i = x_i - mean and the
// population second moment m2, I_i = (z_i / m2) * sum_j w_ij z_j. Isolates
// get NaN.
std::vector<double> local_moran(const std::vector<double>& values, const SpatialWeights& weights);

enum class LisaClass { HH, LL, HL, LH, NS, ISOLATE };
const char* to_string(LisaClass cls);

struct LisaResult {
    double local_i = 0.0;
    double lag = 0.0;       // sum_j w_ij z_j, used for quadrant classification
    double z_score = 0.0;   // against the conditional permutation distribution
    double pseudo_p = 1.0;  // (exceedances + 1) / (permutations + 1)
    LisaClass cluster_class = LisaClass::NS;
    bool degenerate = false;  // permutation spread was zero
};

struct PermutationOptions {
    int permutations = 999;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    bool exhaustive = false;  // enumerate every arrangement instead of sampling
    int threads = 1;
};

// Conditional permutation: county i's value stays put while the other n-1
// values are rearranged over the other locations. Exceedances are counted
// two-sided on |I|. Each county draws from its own seed stream, so results
// are identical for any thread count.
std::vector<LisaResult> permutation_inference(const std::vector<double>& values,
                                              const SpatialWeights& weights,
                                              const PermutationOptions& options);

// Fills quadrant classes for counties with pseudo_p <= alpha; the rest stay
// NS. Quadrants compare the county's deviation and its spatial lag.
std::vector<LisaResult> classify_lisa(const std::vector<double>& values,
                                      std::vector<LisaResult> lisa, double alpha);

struct OutlierReport {
    std::vector<LisaResult> residual_lisa;
    std::vector<LisaResult> impact_lisa;
    std::vector<std::string> unexpectedly_high;  // HH members of the residual field
    std::vector<std::string> unexpectedly_low;   // LL members
    bool residual_degenerate = false;
    bool impact_degenerate = false;
    std::vector<std::string> warnings;
};

// Residual and impact fields through the same inference machinery. Constant
// fields are reported as degenerate instead of erroring.
OutlierReport outlier_counties(const DualModelResult& dual, const SpatialWeights& weights,
                               const PermutationOptions& options);

// adjacency.csv: `fips_a,fips_b` undirected edges.
std::vector<std::pair<std::string, std::string>> load_adjacency(const std::filesystem::path& path);
// centroids.csv: `fips,lat,lon` decimal degrees.
std::vector<Centroid> load_centroids(const std::filesystem::path& path);

std::string lisa_csv(const std::vector<std::string>& ids, const std::vector<double>& values,
                     const std::vector<LisaResult>& lisa);

}  // namespace countyir
