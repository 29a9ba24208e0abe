#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "countyir/dataset.hpp"
#include "countyir/spatial.hpp"

namespace countyir {
namespace synth {

// A planted block of counties whose response is shifted by `offset`,
// membership by Chebyshev radius around the center cell (radius 1 = 3x3).
struct PlantedCluster {
    int center_row = 0;
    int center_col = 0;
    int radius = 0;
    double offset = 0.0;
};

// Counties on a regular lattice: features are unit Gaussians (optionally
// rescaled to a percent-like range), the response is linear in them plus
// planted cluster offsets and Gaussian noise.
struct SynthConfig {
    int rows = 10;
    int cols = 10;
    double spacing_km = 30.0;
    int n_features = 8;
    int n_non_modifiable = 4;        // leading features; the rest are modifiable
    std::vector<int> expert_indices;
    std::vector<double> beta;        // per-feature effect on the generated scale
    double intercept = 120.0;
    double noise_sd = 1.0;
    bool percent_like = false;       // store features as clamp(50 + 10g, 0, 100)
    std::vector<PlantedCluster> clusters;
    std::uint64_t seed = 0;
    std::int64_t female_pop_min = 15000;
    std::int64_t female_pop_max = 400000;
    double origin_lat = 5.0;   // near the equator so lattice spacing stays uniform
    double origin_lon = -100.0;

    int n_counties() const { return rows * cols; }
};

struct GroundTruthRow {
    std::string fips;
    double true_beta_contribution = 0.0;
    int cluster_id = -1;  // -1 outside every planted cluster
    double noiseless_response = 0.0;
};

struct SynthBundle {
    CountyTable table;
    FeatureTaxonomy taxonomy;
    std::vector<Centroid> centroids;
    std::vector<std::pair<std::string, std::string>> adjacency;  // queen lattice edges
    std::vector<GroundTruthRow> ground_truth;
    double cell_degrees = 0.25;  // half-extent of a lattice cell square, for geometry output
};

SynthBundle generate_synthetic(const SynthConfig& config);

// counties.csv, taxonomy.csv, centroids.csv, adjacency.csv, ground_truth.csv
// and geometry.geojson (lattice cell squares). Byte-identical for the same
// config.
void write_bundle(const SynthBundle& bundle, const std::filesystem::path& directory);

std::string ground_truth_csv(const std::vector<GroundTruthRow>& rows);

}  // namespace synth
}  // namespace countyir
