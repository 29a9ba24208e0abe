#include <doctest.h>

#include <cmath>

#include "countyir/dual_model.hpp"
#include "countyir/error.hpp"
#include "countyir/synth.hpp"
#include "countyir/textio.hpp"
#include "test_util.hpp"

using namespace countyir;

TEST_CASE("residual arithmetic") {
    CHECK(residuals({150.0}, {130.0})[0] == doctest::Approx(20.0));
    CHECK(residuals({100.0}, {130.0})[0] == doctest::Approx(-30.0));  // below expectation
    const auto zero = residuals({1.0, 2.0}, {1.0, 2.0});
    CHECK(zero[0] == 0.0);
    CHECK(zero[1] == 0.0);
    CHECK_THROWS_AS(residuals({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("impact arithmetic and antisymmetry") {
    CHECK(modifiable_impact({120.0}, {115.0})[0] == doctest::Approx(-5.0));
    const auto same = modifiable_impact({3.0, 4.0}, {3.0, 4.0});
    CHECK(same[0] == 0.0);

    const std::vector<double> pred1 = {1.5, -2.0, 7.25};
    const std::vector<double> pred2 = {0.5, 3.0, -1.0};
    const auto forward = modifiable_impact(pred1, pred2);
    const auto backward = modifiable_impact(pred2, pred1);
    for (std::size_t i = 0; i < forward.size(); ++i) CHECK(forward[i] == -backward[i]);
    CHECK_THROWS_AS(modifiable_impact({1.0}, {}), Error);
}

TEST_CASE("dual table rows satisfy both identities exactly") {
    synth::SynthConfig config;
    config.rows = 4;
    config.cols = 5;
    config.n_features = 3;
    config.n_non_modifiable = 2;
    config.beta = {1.0, -1.0, 0.5};
    config.noise_sd = 1.0;
    config.seed = 3;
    const auto bundle = synth::generate_synthetic(config);

    std::vector<double> pred1(bundle.table.n_rows()), pred2(bundle.table.n_rows());
    for (std::size_t i = 0; i < pred1.size(); ++i) {
        pred1[i] = 100.0 + static_cast<double>(i);
        pred2[i] = 95.0 + 2.0 * static_cast<double>(i);
    }
    const DualModelResult result = dual_model_table(bundle.table, pred1, pred2);
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        const auto& row = result.rows[i];
        CHECK(row.observed - row.residual == row.pred1);
        CHECK(row.impact == row.pred2 - row.pred1);
    }
}

TEST_CASE("dual results csv round-trips") {
    synth::SynthConfig config;
    config.rows = 3;
    config.cols = 3;
    config.n_features = 2;
    config.n_non_modifiable = 1;
    config.seed = 5;
    const auto bundle = synth::generate_synthetic(config);

    std::vector<double> pred1(9, 100.0), pred2(9, 101.5);
    const DualModelResult result = dual_model_table(bundle.table, pred1, pred2);

    TempDir dir;
    write_text_file(dir.file("dual.csv"), dual_results_csv(result));
    const DualModelResult reloaded = load_dual_results(dir.file("dual.csv"));
    REQUIRE(reloaded.rows.size() == result.rows.size());
    for (std::size_t i = 0; i < result.rows.size(); ++i) {
        CHECK(reloaded.rows[i].fips == result.rows[i].fips);
        CHECK(reloaded.rows[i].observed == result.rows[i].observed);
        CHECK(reloaded.rows[i].residual == result.rows[i].residual);
        CHECK(reloaded.rows[i].impact == result.rows[i].impact);
    }
}

TEST_CASE("zero modifiable features collapse the two models into one") {
    synth::SynthConfig config;
    config.rows = 6;
    config.cols = 6;
    config.n_features = 4;
    config.n_non_modifiable = 4;  // nothing modifiable
    config.beta = {2.0, -1.0, 0.5, 0.25};
    config.noise_sd = 0.5;
    config.seed = 11;
    const auto bundle = synth::generate_synthetic(config);

    const auto grid = std::vector<double>{0.0};
    const DualModels dual =
        fit_dual_models(bundle.table, bundle.taxonomy, ModelKind::ols, grid, 42);
    CHECK(dual.universes_identical);

    const Eigen::VectorXd p1 = predict_table(dual.model1.model, bundle.table);
    const Eigen::VectorXd p2 = predict_table(dual.model2.model, bundle.table);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("modifiable features with no true effect leave the impact near zero") {
    synth::SynthConfig config;
    config.rows = 10;
    config.cols = 10;
    config.n_features = 6;
    config.n_non_modifiable = 3;
    config.beta = {2.0, -1.5, 1.0, 0.0, 0.0, 0.0};  // modifiable features are pure noise inputs
    config.noise_sd = 0.0;
    config.seed = 19;
    const auto bundle = synth::generate_synthetic(config);

    const DualModels dual =
        fit_dual_models(bundle.table, bundle.taxonomy, ModelKind::ols, {0.0}, 23);
    CHECK_FALSE(dual.universes_identical);
    const Eigen::VectorXd p1 = predict_table(dual.model1.model, bundle.table);
    const Eigen::VectorXd p2 = predict_table(dual.model2.model, bundle.table);
    CHECK((p2 - p1).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("dual fits are deterministic in the master seed") {
    synth::SynthConfig config;
    config.rows = 8;
    config.cols = 8;
    config.n_features = 5;
    config.n_non_modifiable = 3;
    config.beta = {2.0, -1.0, 1.0, 0.5, -0.5};
    config.noise_sd = 1.0;
    config.seed = 29;
    const auto bundle = synth::generate_synthetic(config);

    const Eigen::MatrixXd x = feature_matrix(bundle.table);
    const Eigen::VectorXd y = response_vector(bundle.table);
    const Standardizer standardizer = fit_standardizer(x, y);
    const auto grid = lambda_grid(
        lambda_max(apply_standardizer(standardizer, x),
                   Eigen::VectorXd(y.array() - standardizer.response_mean)),
        15, 1e-3);

    const DualModels a =
        fit_dual_models(bundle.table, bundle.taxonomy, ModelKind::lasso, grid, 99);
    const DualModels b =
        fit_dual_models(bundle.table, bundle.taxonomy, ModelKind::lasso, grid, 99);
    CHECK(a.model1.model.coefficients == b.model1.model.coefficients);
    CHECK(a.model2.model.coefficients == b.model2.model.coefficients);
    CHECK(a.model1.chosen_hyper == b.model1.chosen_hyper);

    const DualModels c =
        fit_dual_models(bundle.table, bundle.taxonomy, ModelKind::lasso, grid, 100);
    CHECK((a.model1.model.coefficients != c.model1.model.coefficients ||
           a.model2.model.coefficients != c.model2.model.coefficients ||
           a.model1.chosen_hyper != c.model1.chosen_hyper));
}

TEST_CASE("reference tables give the documented nonzero counts through the dual frame") {
    const TrainedLinearModel model1 = load_coefficients(fixture("model1.coef"));
    const TrainedLinearModel model2 = load_coefficients(fixture("model2.coef"));
    CHECK(selected_variables(model1).size() == 31);
    CHECK(selected_variables(model2).size() == 38);
    // both tables share the same baseline rate
    CHECK(model1.intercept == model2.intercept);
}
