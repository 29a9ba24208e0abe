#include "countyir/dual_model.hpp"

#include "countyir/error.hpp"
#include "countyir/rng.hpp"
#include "countyir/textio.hpp"

namespace countyir {

DualModels fit_dual_models(const CountyTable& table, const FeatureTaxonomy& taxonomy,
                           ModelKind kind, const std::vector<double>& grid, std::uint64_t seed,
                           const HarnessOptions& options) {
    const FeatureSelection universe1 =
        select_feature_set(taxonomy, FeatureUniverse::non_modifiable_only);
    const FeatureSelection universe2 = select_feature_set(taxonomy, FeatureUniverse::all);

    DualModels result;
    const Design design1 = make_design(table, universe1);
    result.model1 = fit_final_model(design1, taxonomy, kind, grid,
                                    derive_seed(seed, 21), options);

    result.universes_identical = universe1.feature_names == universe2.feature_names;
    if (result.universes_identical) {
        result.model2 = result.model1;
        return result;
    }
    const Design design2 = make_design(table, universe2);
    result.model2 = fit_final_model(design2, taxonomy, kind, grid,
                                    derive_seed(seed, 22), options);
    return result;
}

std::vector<double> residuals(const std::vector<double>& observed,
                              const std::vector<double>& pred1) {
    if (observed.size() != pred1.size())
        throw Error(ErrorKind::shape, "residuals: length mismatch");
    std::vector<double> out(observed.size());
    for (std::size_t i = 0; i < observed.size(); ++i) out[i] = observed[i] - pred1[i];
    return out;
}

std::vector<double> modifiable_impact(const std::vector<double>& pred1,
                                      const std::vector<double>& pred2) {
    if (pred1.size() != pred2.size())
        throw Error(ErrorKind::shape, "modifiable_impact: length mismatch");
    std::vector<double> out(pred1.size());
    for (std::size_t i = 0; i < pred1.size(); ++i) out[i] = pred2[i] - pred1[i];
    return out;
}

DualModelResult dual_model_table(const CountyTable& table, const std::vector<double>& pred1,
                                 const std::vector<double>& pred2) {
    if (pred1.size() != table.n_rows() || pred2.size() != table.n_rows())
        throw Error(ErrorKind::shape, "dual_model_table: prediction length mismatch");
    DualModelResult result;
    result.rows.reserve(table.n_rows());
    for (std::size_t i = 0; i < table.n_rows(); ++i) {
        DualModelRow row;
        row.fips = table.records[i].fips;
        row.observed = table.records[i].observed_ir;
        row.pred1 = pred1[i];
        row.pred2 = pred2[i];
        row.residual = row.observed - row.pred1;
        row.impact = row.pred2 - row.pred1;
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string dual_results_csv(const DualModelResult& result) {
    std::string out = "fips,observed,pred1,pred2,residual,impact\n";
    for (const auto& row : result.rows) {
        out += join_csv({row.fips, fmt_double(row.observed), fmt_double(row.pred1),
                         fmt_double(row.pred2), fmt_double(row.residual),
                         fmt_double(row.impact)});
        out += "\n";
    }
    return out;
}

DualModelResult load_dual_results(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty() || split_csv_line(lines[0]) !=
                             std::vector<std::string>{"fips", "observed", "pred1", "pred2",
                                                      "residual", "impact"})
        throw Error(ErrorKind::schema, path.string() + ": bad dual results header");
    DualModelResult result;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 6)
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(i));
        DualModelRow row;
        row.fips = cells[0];
        if (!try_parse_double(cells[1], row.observed) || !try_parse_double(cells[2], row.pred1) ||
            !try_parse_double(cells[3], row.pred2) || !try_parse_double(cells[4], row.residual) ||
            !try_parse_double(cells[5], row.impact))
            throw Error(ErrorKind::parse,
                        path.string() + ": row " + std::to_string(i) + ": bad number");
        result.rows.push_back(std::move(row));
    }
    return result;
}

}  // namespace countyir
