#include "countyir/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "countyir/error.hpp"
#include "countyir/rng.hpp"
#include "countyir/textio.hpp"

namespace countyir {
namespace synth {

namespace {

constexpr double kKmPerDegree = 111.19492664455873;  // pi * 6371 / 180

std::string fips_of(int index) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "%05d", index + 1);
    return buffer;
}

std::string feature_name(int j) {
    char buffer[16];
    std::snprintf(buffer, sizeof(buffer), "feat_%02d", j);
    return buffer;
}

void validate(const SynthConfig& config) {
    if (config.rows < 1 || config.cols < 1)
        throw Error(ErrorKind::parameter, "lattice needs positive rows and cols");
    if (config.n_features < 0 || config.n_non_modifiable < 0 ||
        config.n_non_modifiable > config.n_features)
        throw Error(ErrorKind::parameter, "bad feature counts");
    if (!config.beta.empty() &&
        static_cast<int>(config.beta.size()) != config.n_features)
        throw Error(ErrorKind::parameter, "beta length must match n_features");
    if (config.noise_sd < 0) throw Error(ErrorKind::parameter, "noise sd must be >= 0");
    if (!(config.spacing_km > 0)) throw Error(ErrorKind::parameter, "spacing must be positive");
    for (const auto& cluster : config.clusters)
        if (cluster.radius < 0) throw Error(ErrorKind::parameter, "cluster radius must be >= 0");
    if (config.female_pop_min < 0 || config.female_pop_max < config.female_pop_min)
        throw Error(ErrorKind::parameter, "bad female population bounds");
}

int cluster_membership(const SynthConfig& config, int row, int col) {
    for (std::size_t c = 0; c < config.clusters.size(); ++c) {
        const auto& cluster = config.clusters[c];
        if (std::abs(row - cluster.center_row) <= cluster.radius &&
            std::abs(col - cluster.center_col) <= cluster.radius)
            return static_cast<int>(c);
    }
    return -1;
}

}  // namespace

SynthBundle generate_synthetic(const SynthConfig& config) {
    validate(config);
    const int n = config.n_counties();
    const int p = config.n_features;
    std::vector<double> beta = config.beta;
    if (beta.empty()) beta.assign(p, 0.0);

    SynthBundle bundle;
    bundle.table.feature_names.reserve(p);
    for (int j = 0; j < p; ++j) bundle.table.feature_names.push_back(feature_name(j));

    bundle.taxonomy.entries.reserve(p);
    for (int j = 0; j < p; ++j) {
        TaxonomyEntry entry;
        entry.feature_name = feature_name(j);
        entry.non_modifiable = j < config.n_non_modifiable;
        entry.modifiable = !entry.non_modifiable;
        entry.category =
            entry.non_modifiable ? FeatureCategory::socioeconomics : FeatureCategory::lifestyle;
        entry.expert = std::find(config.expert_indices.begin(), config.expert_indices.end(), j) !=
                       config.expert_indices.end();
        entry.definition = "synthetic feature " + std::to_string(j);
        bundle.taxonomy.entries.push_back(std::move(entry));
    }

    Rng rng(derive_seed(config.seed, 0x5EED));
    bundle.table.records.reserve(n);
    bundle.centroids.reserve(n);
    bundle.ground_truth.reserve(n);

    for (int r = 0; r < config.rows; ++r) {
        for (int c = 0; c < config.cols; ++c) {
            const int index = r * config.cols + c;
            CountyRecord record;
            record.fips = fips_of(index);
            record.name = "Synth County " + record.fips;
            record.state = "SY";
            record.female_pop = rng.uniform_int(config.female_pop_min, config.female_pop_max);

            double signal = config.intercept;
            record.features.resize(p);
            for (int j = 0; j < p; ++j) {
                const double g = rng.normal();
                signal += beta[j] * g;
                record.features[j] =
                    config.percent_like ? std::clamp(50.0 + 10.0 * g, 0.0, 100.0) : g;
            }

            GroundTruthRow truth;
            truth.fips = record.fips;
            truth.true_beta_contribution = signal - config.intercept;
            truth.cluster_id = cluster_membership(config, r, c);
            if (truth.cluster_id >= 0) signal += config.clusters[truth.cluster_id].offset;
            truth.noiseless_response = signal;

            const double noise = config.noise_sd > 0 ? config.noise_sd * rng.normal() : 0.0;
            record.observed_ir = std::max(0.0, signal + noise);
            bundle.ground_truth.push_back(std::move(truth));

            Centroid centroid;
            centroid.fips = record.fips;
            centroid.lat = config.origin_lat + r * config.spacing_km / kKmPerDegree;
            const double lat_rad = centroid.lat * 0.017453292519943295;
            centroid.lon =
                config.origin_lon + c * config.spacing_km / (kKmPerDegree * std::cos(lat_rad));
            bundle.centroids.push_back(std::move(centroid));

            bundle.table.records.push_back(std::move(record));
        }
    }

    bundle.cell_degrees = 0.4 * config.spacing_km / kKmPerDegree;

    // Queen adjacency on the lattice, each undirected edge listed once.
    for (int r = 0; r < config.rows; ++r) {
        for (int c = 0; c < config.cols; ++c) {
            const int index = r * config.cols + c;
            const int dr_dc[4][2] = {{0, 1}, {1, -1}, {1, 0}, {1, 1}};
            for (const auto& d : dr_dc) {
                const int rr = r + d[0];
                const int cc = c + d[1];
                if (rr < 0 || rr >= config.rows || cc < 0 || cc >= config.cols) continue;
                bundle.adjacency.emplace_back(fips_of(index), fips_of(rr * config.cols + cc));
            }
        }
    }
    return bundle;
}

std::string ground_truth_csv(const std::vector<GroundTruthRow>& rows) {
    std::string out = "fips,true_beta_contribution,cluster_id,noiseless_response\n";
    for (const auto& row : rows) {
        out += join_csv({row.fips, fmt_double(row.true_beta_contribution),
                         std::to_string(row.cluster_id), fmt_double(row.noiseless_response)});
        out += "\n";
    }
    return out;
}

void write_bundle(const SynthBundle& bundle, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);

    std::string counties = "fips,name,state,female_pop,ir";
    for (const auto& name : bundle.table.feature_names) counties += "," + name;
    counties += "\n";
    for (const auto& record : bundle.table.records) {
        counties += record.fips + "," + csv_escape(record.name) + "," + record.state + "," +
                    std::to_string(record.female_pop) + "," + fmt_double(record.observed_ir);
        for (const double value : record.features) counties += "," + fmt_double(value);
        counties += "\n";
    }
    write_text_file(directory / "counties.csv", counties);

    std::string taxonomy = "feature,category,non_modifiable,modifiable,expert,definition\n";
    for (const auto& entry : bundle.taxonomy.entries) {
        taxonomy += join_csv({entry.feature_name, to_string(entry.category),
                              entry.non_modifiable ? "1" : "0", entry.modifiable ? "1" : "0",
                              entry.expert ? "1" : "0", entry.definition});
        taxonomy += "\n";
    }
    write_text_file(directory / "taxonomy.csv", taxonomy);

    std::string centroids = "fips,lat,lon\n";
    for (const auto& c : bundle.centroids)
        centroids += c.fips + "," + fmt_double(c.lat) + "," + fmt_double(c.lon) + "\n";
    write_text_file(directory / "centroids.csv", centroids);

    std::string adjacency = "fips_a,fips_b\n";
    for (const auto& [a, b] : bundle.adjacency) adjacency += a + "," + b + "\n";
    write_text_file(directory / "adjacency.csv", adjacency);

    write_text_file(directory / "ground_truth.csv", ground_truth_csv(bundle.ground_truth));

    // Lattice cell squares so the rendering path has something to draw.
    std::string geometry = "{\"type\":\"FeatureCollection\",\"features\":[";
    const double d = bundle.cell_degrees;
    for (std::size_t i = 0; i < bundle.centroids.size(); ++i) {
        const auto& c = bundle.centroids[i];
        if (i) geometry += ",";
        geometry += "{\"type\":\"Feature\",\"properties\":{\"fips\":\"" + c.fips + "\"},";
        geometry += "\"geometry\":{\"type\":\"Polygon\",\"coordinates\":[[";
        const double lon0 = c.lon - d, lon1 = c.lon + d, lat0 = c.lat - d, lat1 = c.lat + d;
        geometry += "[" + fmt_double(lon0) + "," + fmt_double(lat0) + "],";
        geometry += "[" + fmt_double(lon1) + "," + fmt_double(lat0) + "],";
        geometry += "[" + fmt_double(lon1) + "," + fmt_double(lat1) + "],";
        geometry += "[" + fmt_double(lon0) + "," + fmt_double(lat1) + "],";
        geometry += "[" + fmt_double(lon0) + "," + fmt_double(lat0) + "]]]}}";
    }
    geometry += "]}";
    write_text_file(directory / "geometry.geojson", geometry);
}

}  // namespace synth
}  // namespace countyir
