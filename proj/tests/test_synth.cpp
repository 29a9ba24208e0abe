#include <doctest.h>

#include <cmath>

#include "countyir/dataset.hpp"
#include "countyir/oracles.hpp"
#include "countyir/regressors.hpp"
#include "countyir/rng.hpp"
#include "countyir/spatial.hpp"
#include "countyir/synth.hpp"
#include "countyir/textio.hpp"
#include "test_util.hpp"

using namespace countyir;

namespace {

synth::SynthConfig small_config() {
    synth::SynthConfig config;
    config.rows = 6;
    config.cols = 7;
    config.n_features = 5;
    config.n_non_modifiable = 3;
    config.beta = {2.0, -1.0, 0.5, 0.0, 0.0};
    config.noise_sd = 0.0;
    config.seed = 77;
    return config;
}

}  // namespace

TEST_CASE("identical configs produce byte-identical bundles") {
    TempDir dir;
    const auto a = dir.path() / "a";
    const auto b = dir.path() / "b";
    synth::write_bundle(synth::generate_synthetic(small_config()), a);
    synth::write_bundle(synth::generate_synthetic(small_config()), b);
    for (const char* name : {"counties.csv", "taxonomy.csv", "centroids.csv", "adjacency.csv",
                             "ground_truth.csv", "geometry.geojson"}) {
        CHECK(read_text_file(a / name) == read_text_file(b / name));
    }

    auto different = small_config();
    different.seed = 78;
    const auto c = dir.path() / "c";
    synth::write_bundle(synth::generate_synthetic(different), c);
    CHECK(read_text_file(a / "counties.csv") != read_text_file(c / "counties.csv"));
}

TEST_CASE("noise-free responses are exactly linear in the features") {
    const synth::SynthBundle bundle = synth::generate_synthetic(small_config());
    const Eigen::MatrixXd x = feature_matrix(bundle.table);
    const Eigen::VectorXd y = response_vector(bundle.table);

    const TrainedLinearModel model = ols_fit(x, y, bundle.table.feature_names);
    const Eigen::VectorXd predictions = predict_linear(model, x);
    CHECK((predictions - y).cwiseAbs().maxCoeff() < 1e-9);

    // ground truth stores the noiseless response
    for (std::size_t i = 0; i < bundle.table.n_rows(); ++i)
        CHECK(bundle.table.records[i].observed_ir ==
              doctest::Approx(bundle.ground_truth[i].noiseless_response).epsilon(1e-15));
}

TEST_CASE("planted cluster members carry exactly the configured offset") {
    auto config = small_config();
    config.clusters = {{2, 3, 1, 30.0}};
    const synth::SynthBundle bundle = synth::generate_synthetic(config);

    int members = 0;
    for (const auto& truth : bundle.ground_truth) {
        const double residual_under_linear_model =
            truth.noiseless_response - config.intercept - truth.true_beta_contribution;
        if (truth.cluster_id == 0) {
            ++members;
            CHECK(residual_under_linear_model == doctest::Approx(30.0));
        } else {
            CHECK(residual_under_linear_model == doctest::Approx(0.0));
        }
    }
    CHECK(members == 9);  // radius 1 block
}

TEST_CASE("generated bundles pass the loaders and their checks") {
    TempDir dir;
    auto config = small_config();
    config.noise_sd = 2.0;
    config.expert_indices = {0, 4};
    synth::write_bundle(synth::generate_synthetic(config), dir.path());

    CountyTable table = load_county_table(dir.file("counties.csv"));
    const FeatureTaxonomy taxonomy = load_taxonomy(dir.file("taxonomy.csv"));
    CHECK_NOTHROW(align_to_taxonomy(table, taxonomy));
    CHECK(table.n_rows() == 42);
    CHECK(taxonomy.count_non_modifiable() == 3);
    CHECK(taxonomy.count_modifiable() == 2);
    CHECK(taxonomy.count_expert() == 2);

    const auto centroids = load_centroids(dir.file("centroids.csv"));
    CHECK(centroids.size() == 42);
    const auto adjacency = load_adjacency(dir.file("adjacency.csv"));
    const SpatialWeights weights = build_contiguity_weights(
        [&] {
            std::vector<std::string> ids;
            for (const auto& record : table.records) ids.push_back(record.fips);
            return ids;
        }(),
        adjacency);
    // interior lattice cell has all eight queen neighbors
    CHECK(weights.neighbors[1 * 7 + 1].size() == 8);
    CHECK(weights.isolates.empty());
}

TEST_CASE("lattice spacing is respected by the centroids") {
    auto config = small_config();
    config.spacing_km = 25.0;
    const synth::SynthBundle bundle = synth::generate_synthetic(config);
    // vertical neighbors are exactly one spacing apart, horizontal close to it
    const auto& a = bundle.centroids[0];
    const auto& below = bundle.centroids[config.cols];
    const auto& right = bundle.centroids[1];
    CHECK(haversine_km(a.lat, a.lon, below.lat, below.lon) == doctest::Approx(25.0).epsilon(1e-6));
    CHECK(haversine_km(a.lat, a.lon, right.lat, right.lon) == doctest::Approx(25.0).epsilon(1e-3));
}

TEST_CASE("percent-like features stay inside their range") {
    auto config = small_config();
    config.percent_like = true;
    config.noise_sd = 1.0;
    const synth::SynthBundle bundle = synth::generate_synthetic(config);
    for (const auto& record : bundle.table.records)
        for (const double value : record.features) {
            CHECK(value >= 0.0);
            CHECK(value <= 100.0);
        }
}

TEST_CASE("proximal-gradient reference at the penalty boundary and at zero") {
    Rng rng(501);
    const int n = 40, p = 5;
    std::vector<std::vector<double>> x(n, std::vector<double>(p));
    std::vector<double> y(n);
    Eigen::MatrixXd xe(n, p);
    Eigen::VectorXd ye(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) {
            x[i][j] = rng.normal();
            xe(i, j) = x[i][j];
        }
        y[i] = 2.0 * x[i][0] - x[i][2] + 0.3 * rng.normal();
        ye[i] = y[i];
    }
    const double mean = ye.mean();
    for (int i = 0; i < n; ++i) {
        y[i] -= mean;
        ye[i] -= mean;
    }

    double lmax = 0.0;
    for (int j = 0; j < p; ++j) lmax = std::max(lmax, std::abs(xe.col(j).dot(ye)) / n);

    const auto at_max = oracle::ista_lasso(x, y, lmax * (1 + 1e-12), 20000);
    for (const double b : at_max) CHECK(std::abs(b) < 1e-10);

    const auto at_zero = oracle::ista_lasso(x, y, 0.0, 100000);
    const Eigen::VectorXd ls = xe.colPivHouseholderQr().solve(ye);
    for (int j = 0; j < p; ++j) CHECK(std::abs(at_zero[j] - ls[j]) < 1e-6);
}
