#include "countyir/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "countyir/error.hpp"
#include "countyir/parallel.hpp"
#include "countyir/rng.hpp"
#include "countyir/textio.hpp"

namespace countyir {

namespace {

constexpr double kEarthRadiusKm = 6371.0;
constexpr double kDegToRad = 0.017453292519943295;
constexpr std::uint64_t kTagPermutation = 0x4C495341;  // per-county stream tag

void check_coordinate(double lat, double lon) {
    if (lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
        throw Error(ErrorKind::domain, "coordinate out of range: lat=" + fmt_double(lat) +
                                           " lon=" + fmt_double(lon));
}

void collect_isolates(SpatialWeights& weights) {
    weights.isolates.clear();
    for (std::size_t i = 0; i < weights.neighbors.size(); ++i)
        if (weights.neighbors[i].empty()) weights.isolates.push_back(static_cast<int>(i));
}

void sort_neighbor_lists(SpatialWeights& weights) {
    for (auto& list : weights.neighbors)
        std::sort(list.begin(), list.end(),
                  [](const Neighbor& a, const Neighbor& b) { return a.index < b.index; });
}

struct Deviations {
    std::vector<double> z;
    double m2 = 0.0;
};

Deviations compute_deviations(const std::vector<double>& values, std::size_t expected) {
    if (values.size() != expected)
        throw Error(ErrorKind::shape, "value vector length " + std::to_string(values.size()) +
                                          " does not match weights size " +
                                          std::to_string(expected));
    if (values.size() < 2)
        throw Error(ErrorKind::insufficient_data, "need at least 2 observations");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    Deviations dev;
    dev.z.resize(values.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        dev.z[i] = values[i] - mean;
        ss += dev.z[i] * dev.z[i];
    }
    dev.m2 = ss / n;
    if (dev.m2 == 0.0)
        throw Error(ErrorKind::degenerate, "constant field: local statistic undefined");
    return dev;
}

double lag_of(const SpatialWeights& weights, const std::vector<double>& z, int i) {
    double lag = 0.0;
    for (const auto& nb : weights.neighbors[i]) lag += nb.weight * z[nb.index];
    return lag;
}

LisaClass quadrant_of(double deviation, double lag) {
    if (deviation > 0 && lag > 0) return LisaClass::HH;
    if (deviation < 0 && lag < 0) return LisaClass::LL;
    if (deviation > 0) return LisaClass::HL;
    return LisaClass::LH;
}

}  // namespace

double haversine_km(double lat_a, double lon_a, double lat_b, double lon_b) {
    check_coordinate(lat_a, lon_a);
    check_coordinate(lat_b, lon_b);
    const double phi_a = lat_a * kDegToRad;
    const double phi_b = lat_b * kDegToRad;
    const double d_phi = (lat_b - lat_a) * kDegToRad;
    const double d_lambda = (lon_b - lon_a) * kDegToRad;
    const double s_phi = std::sin(0.5 * d_phi);
    const double s_lambda = std::sin(0.5 * d_lambda);
    const double a = s_phi * s_phi + std::cos(phi_a) * std::cos(phi_b) * s_lambda * s_lambda;
    return 2.0 * kEarthRadiusKm * std::atan2(std::sqrt(a), std::sqrt(std::max(0.0, 1.0 - a)));
}

SpatialWeights build_contiguity_weights(
    const std::vector<std::string>& ids,
    const std::vector<std::pair<std::string, std::string>>& edges) {
    SpatialWeights weights;
    weights.scheme = WeightScheme::contiguity;
    weights.ids = ids;
    weights.neighbors.resize(ids.size());

    std::unordered_map<std::string, int> index_of;
    for (std::size_t i = 0; i < ids.size(); ++i) index_of.emplace(ids[i], static_cast<int>(i));

    std::unordered_set<std::uint64_t> seen;
    for (const auto& [a, b] : edges) {
        const auto ia = index_of.find(a);
        const auto ib = index_of.find(b);
        if (ia == index_of.end())
            throw Error(ErrorKind::reference, "adjacency references unknown id '" + a + "'");
        if (ib == index_of.end())
            throw Error(ErrorKind::reference, "adjacency references unknown id '" + b + "'");
        if (ia->second == ib->second) continue;  // self loops carry no information
        const int lo = std::min(ia->second, ib->second);
        const int hi = std::max(ia->second, ib->second);
        const std::uint64_t key =
            (static_cast<std::uint64_t>(lo) << 32) | static_cast<std::uint32_t>(hi);
        if (!seen.insert(key).second) continue;
        weights.neighbors[lo].push_back({hi, 1.0});
        weights.neighbors[hi].push_back({lo, 1.0});
    }
    sort_neighbor_lists(weights);
    collect_isolates(weights);
    return weights;
}

SpatialWeights build_distance_weights(const std::vector<Centroid>& centroids, WeightScheme scheme,
                                      double threshold_km) {
    if (scheme == WeightScheme::contiguity)
        throw Error(ErrorKind::parameter, "contiguity weights need an adjacency list");
    if (!(threshold_km > 0))
        throw Error(ErrorKind::parameter, "distance threshold must be positive");

    SpatialWeights weights;
    weights.scheme = scheme;
    weights.threshold_km = threshold_km;
    weights.neighbors.resize(centroids.size());
    weights.ids.reserve(centroids.size());
    for (const auto& c : centroids) {
        check_coordinate(c.lat, c.lon);
        weights.ids.push_back(c.fips);
    }

    for (std::size_t i = 0; i < centroids.size(); ++i) {
        for (std::size_t j = i + 1; j < centroids.size(); ++j) {
            const double dist =
                haversine_km(centroids[i].lat, centroids[i].lon, centroids[j].lat, centroids[j].lon);
            if (dist <= 0.0)
                throw Error(ErrorKind::geometry, "zero distance between '" + centroids[i].fips +
                                                     "' and '" + centroids[j].fips + "'");
            if (dist > threshold_km) continue;
            const double w = scheme == WeightScheme::fixed_band ? 1.0 : 1.0 / dist;
            weights.neighbors[i].push_back({static_cast<int>(j), w});
            weights.neighbors[j].push_back({static_cast<int>(i), w});
        }
    }
    sort_neighbor_lists(weights);
    collect_isolates(weights);
    return weights;
}

SpatialWeights row_standardize(const SpatialWeights& weights) {
    SpatialWeights out = weights;
    for (auto& list : out.neighbors) {
        double sum = 0.0;
        for (const auto& nb : list) sum += nb.weight;
        if (sum > 0)
            for (auto& nb : list) nb.weight /= sum;
    }
    out.row_standardized = true;
    return out;
}

std::vector<double> local_moran(const std::vector<double>& values, const SpatialWeights& weights) {
    const Deviations dev = compute_deviations(values, weights.size());
    std::vector<double> local(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights.is_isolate(static_cast<int>(i))) {
            local[i] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        local[i] = dev.z[i] / dev.m2 * lag_of(weights, dev.z, static_cast<int>(i));
    }
    return local;
}

const char* to_string(LisaClass cls) {
    switch (cls) {
    case LisaClass::HH: return "HH";
    case LisaClass::LL: return "LL";
    case LisaClass::HL: return "HL";
    case LisaClass::LH: return "LH";
    case LisaClass::NS: return "NS";
    case LisaClass::ISOLATE: return "ISOLATE";
    }
    return "NS";
}

std::vector<LisaResult> permutation_inference(const std::vector<double>& values,
                                              const SpatialWeights& weights,
                                              const PermutationOptions& options) {
    if (!options.exhaustive && options.permutations < 99)
        throw Error(ErrorKind::parameter, "need at least 99 permutations");
    if (options.exhaustive && values.size() > 9)
        throw Error(ErrorKind::parameter,
                    "exhaustive enumeration is limited to 9 locations");
    if (!(options.alpha > 0 && options.alpha < 1))
        throw Error(ErrorKind::parameter, "alpha must lie in (0, 1)");
    const Deviations dev = compute_deviations(values, weights.size());
    const int n = static_cast<int>(values.size());

    std::vector<LisaResult> results(values.size());
    detail::run_indexed(n, options.threads, [&](int i) {
        LisaResult& result = results[i];
        if (weights.is_isolate(i)) {
            result.local_i = std::numeric_limits<double>::quiet_NaN();
            result.lag = std::numeric_limits<double>::quiet_NaN();
            result.z_score = std::numeric_limits<double>::quiet_NaN();
            result.pseudo_p = 1.0;
            result.cluster_class = LisaClass::ISOLATE;
            return;
        }
        result.lag = lag_of(weights, dev.z, i);
        result.local_i = dev.z[i] / dev.m2 * result.lag;
        const double scale = dev.z[i] / dev.m2;
        const auto& nbs = weights.neighbors[i];
        const std::size_t degree = nbs.size();

        // Values available to the permutation: everything except county i.
        std::vector<double> pool;
        pool.reserve(values.size() - 1);
        for (int j = 0; j < n; ++j)
            if (j != i) pool.push_back(dev.z[j]);

        double sum = 0.0, sum_sq = 0.0;
        long exceed = 0;
        long total = 0;
        const double abs_observed = std::abs(result.local_i);

        auto tally = [&](double perm_stat) {
            sum += perm_stat;
            sum_sq += perm_stat * perm_stat;
            if (std::abs(perm_stat) >= abs_observed) ++exceed;
            ++total;
        };

        if (options.exhaustive) {
            // Walk every arrangement of the other values over the other
            // locations; only the neighbor positions matter for the lag.
            std::vector<int> arrangement(pool.size());
            std::iota(arrangement.begin(), arrangement.end(), 0);
            std::vector<int> neighbor_slots;  // positions of neighbors within the pool ordering
            neighbor_slots.reserve(degree);
            for (const auto& nb : nbs)
                neighbor_slots.push_back(nb.index < i ? nb.index : nb.index - 1);
            do {
                double lag = 0.0;
                for (std::size_t t = 0; t < degree; ++t)
                    lag += nbs[t].weight * pool[arrangement[neighbor_slots[t]]];
                tally(scale * lag);
            } while (std::next_permutation(arrangement.begin(), arrangement.end()));
        } else {
            Rng rng(derive_seed(options.seed, kTagPermutation, static_cast<std::uint64_t>(i)));
            std::vector<int> draw(pool.size());
            std::iota(draw.begin(), draw.end(), 0);
            for (int p = 0; p < options.permutations; ++p) {
                // Partial Fisher-Yates: the first `degree` entries become a
                // uniform sample without replacement.
                for (std::size_t t = 0; t < degree; ++t) {
                    const std::size_t pick =
                        t + static_cast<std::size_t>(rng.bounded(draw.size() - t));
                    std::swap(draw[t], draw[pick]);
                }
                double lag = 0.0;
                for (std::size_t t = 0; t < degree; ++t)
                    lag += nbs[t].weight * pool[draw[t]];
                tally(scale * lag);
            }
        }

        const double mean = sum / static_cast<double>(total);
        const double var =
            (sum_sq - static_cast<double>(total) * mean * mean) / (static_cast<double>(total) - 1.0);
        if (var <= 0.0) {
            result.degenerate = true;
            result.z_score = std::numeric_limits<double>::quiet_NaN();
        } else {
            result.z_score = (result.local_i - mean) / std::sqrt(var);
        }
        result.pseudo_p =
            (static_cast<double>(exceed) + 1.0) / (static_cast<double>(total) + 1.0);
    });
    return results;
}

std::vector<LisaResult> classify_lisa(const std::vector<double>& values,
                                      std::vector<LisaResult> lisa, double alpha) {
    if (values.size() != lisa.size())
        throw Error(ErrorKind::shape, "classify_lisa: length mismatch");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    for (std::size_t i = 0; i < lisa.size(); ++i) {
        if (lisa[i].cluster_class == LisaClass::ISOLATE) continue;
        if (lisa[i].degenerate || lisa[i].pseudo_p > alpha) {
            lisa[i].cluster_class = LisaClass::NS;
            continue;
        }
        lisa[i].cluster_class = quadrant_of(values[i] - mean, lisa[i].lag);
    }
    return lisa;
}

OutlierReport outlier_counties(const DualModelResult& dual, const SpatialWeights& weights,
                               const PermutationOptions& options) {
    if (dual.rows.size() != weights.size())
        throw Error(ErrorKind::shape, "dual results and weights disagree on county count");
    for (std::size_t i = 0; i < dual.rows.size(); ++i)
        if (dual.rows[i].fips != weights.ids[i])
            throw Error(ErrorKind::alignment,
                        "dual results and weights must list the same ids in the same order");

    OutlierReport report;
    std::vector<double> residual_values(dual.rows.size());
    std::vector<double> impact_values(dual.rows.size());
    for (std::size_t i = 0; i < dual.rows.size(); ++i) {
        residual_values[i] = dual.rows[i].residual;
        impact_values[i] = dual.rows[i].impact;
    }

    PermutationOptions residual_options = options;
    residual_options.seed = derive_seed(options.seed, 31);
    PermutationOptions impact_options = options;
    impact_options.seed = derive_seed(options.seed, 32);

    try {
        auto lisa = permutation_inference(residual_values, weights, residual_options);
        report.residual_lisa = classify_lisa(residual_values, std::move(lisa), options.alpha);
        for (std::size_t i = 0; i < report.residual_lisa.size(); ++i) {
            if (report.residual_lisa[i].cluster_class == LisaClass::HH)
                report.unexpectedly_high.push_back(dual.rows[i].fips);
            else if (report.residual_lisa[i].cluster_class == LisaClass::LL)
                report.unexpectedly_low.push_back(dual.rows[i].fips);
        }
    } catch (const Error& error) {
        if (error.kind() != ErrorKind::degenerate) throw;
        report.residual_degenerate = true;
        report.warnings.push_back(std::string("residual field is degenerate: ") + error.what());
    }

    try {
        auto lisa = permutation_inference(impact_values, weights, impact_options);
        report.impact_lisa = classify_lisa(impact_values, std::move(lisa), options.alpha);
    } catch (const Error& error) {
        if (error.kind() != ErrorKind::degenerate) throw;
        report.impact_degenerate = true;
        report.warnings.push_back(std::string("impact field is degenerate: ") + error.what());
    }
    return report;
}

std::vector<std::pair<std::string, std::string>> load_adjacency(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty() ||
        split_csv_line(lines[0]) != std::vector<std::string>{"fips_a", "fips_b"})
        throw Error(ErrorKind::schema, path.string() + ": expected header 'fips_a,fips_b'");
    std::vector<std::pair<std::string, std::string>> edges;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 2)
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(i));
        edges.emplace_back(std::string(trim(cells[0])), std::string(trim(cells[1])));
    }
    return edges;
}

std::vector<Centroid> load_centroids(const std::filesystem::path& path) {
    const auto lines = split_lines(read_text_file(path));
    if (lines.empty() ||
        split_csv_line(lines[0]) != std::vector<std::string>{"fips", "lat", "lon"})
        throw Error(ErrorKind::schema, path.string() + ": expected header 'fips,lat,lon'");
    std::vector<Centroid> centroids;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto cells = split_csv_line(lines[i]);
        if (cells.size() != 3)
            throw Error(ErrorKind::parse, path.string() + ": row " + std::to_string(i));
        Centroid c;
        c.fips = std::string(trim(cells[0]));
        if (!seen.insert(c.fips).second)
            throw Error(ErrorKind::duplicate_key, path.string() + ": duplicate fips '" + c.fips + "'");
        if (!try_parse_double(cells[1], c.lat) || !try_parse_double(cells[2], c.lon))
            throw Error(ErrorKind::parse,
                        path.string() + ": row " + std::to_string(i) + ": bad coordinate");
        check_coordinate(c.lat, c.lon);
        centroids.push_back(std::move(c));
    }
    return centroids;
}

std::string lisa_csv(const std::vector<std::string>& ids, const std::vector<double>& values,
                     const std::vector<LisaResult>& lisa) {
    if (ids.size() != values.size() || ids.size() != lisa.size())
        throw Error(ErrorKind::shape, "lisa_csv: length mismatch");
    std::string out = "fips,value,local_i,z_score,pseudo_p,class\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += join_csv({ids[i], fmt_double(values[i]), fmt_double(lisa[i].local_i),
                         fmt_double(lisa[i].z_score), fmt_double(lisa[i].pseudo_p),
                         to_string(lisa[i].cluster_class)});
        out += "\n";
    }
    return out;
}

}  // namespace countyir
