#include "cdf/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"
#include "cdf/rng.hpp"

namespace cdf {

void FleetSpec::validate() const {
    if (centers < 2) throw InvalidSpecError("need >= 2 centers for cold-start donors");
    if (services < 1) throw InvalidSpecError("need >= 1 service");
    if (steps < 100) throw InvalidSpecError("need >= 100 time steps");
    if (usage_noise < 0.0 || traffic_noise < 0.0 || total_noise < 0.0) {
        throw InvalidSpecError("noise levels must be >= 0");
    }
    if (!(base_min <= base_max) || !(trend_min <= trend_max) ||
        !(gain_min <= gain_max)) {
        throw InvalidSpecError("parameter ranges must be ordered");
    }
    if (heterogeneity < 0.0) throw InvalidSpecError("heterogeneity must be >= 0");
    if (deviant_fraction < 0.0 || deviant_fraction > 1.0) {
        throw InvalidSpecError("deviant fraction must lie in [0, 1]");
    }
    if (deviant_scale < 0.0) throw InvalidSpecError("deviant scale must be >= 0");
}

namespace {

std::string center_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "center_%02zu", i);
    return buf;
}

AttributeSchema fleet_schema(std::size_t services) {
    AttributeSchema s;
    for (std::size_t k = 0; k < services; ++k) {
        s.names.push_back("usage_" + std::to_string(k + 1));
        s.roles.push_back(Role::machine_usage);
        s.known_future.push_back(true);
    }
    for (std::size_t k = 0; k < services; ++k) {
        s.names.push_back("traffic_" + std::to_string(k + 1));
        s.roles.push_back(Role::service_traffic);
        s.known_future.push_back(false);
    }
    s.names.push_back("total");
    s.roles.push_back(Role::total_traffic);
    s.known_future.push_back(false);
    return s;
}

double jitter(Rng& rng, double base, double heterogeneity) {
    return base * (1.0 + heterogeneity * rng.uniform(-1.0, 1.0));
}

} // namespace

std::pair<Fleet, GroundTruth> generate_fleet(const FleetSpec& spec) {
    spec.validate();
    const std::size_t S = spec.services, T = spec.steps;
    const std::size_t A = 2 * S + 1;
    const AttributeSchema schema = fleet_schema(S);

    // fleet-wide service profile, jittered per center below
    Rng fleet_rng(derive_seed(spec.seed, 0xf1ee7));
    std::vector<double> base(S), trend(S), amp(S), phase(S), gain(S);
    for (std::size_t k = 0; k < S; ++k) {
        base[k] = fleet_rng.uniform(spec.base_min, spec.base_max);
        trend[k] = fleet_rng.uniform(spec.trend_min, spec.trend_max);
        amp[k] = spec.seasonal_amp * fleet_rng.uniform(0.5, 1.0);
        phase[k] = fleet_rng.uniform(0.0, 2.0 * std::numbers::pi);
        gain[k] = fleet_rng.uniform(spec.gain_min, spec.gain_max);
    }

    Fleet fleet;
    GroundTruth truth;
    for (std::size_t c = 0; c < spec.centers; ++c) {
        Rng rng(derive_seed(spec.seed, 0xc0000 + c));
        const double unit = rng.uniform(0.0, 1.0);
        const double scale =
            spec.heterogeneity *
            (unit < spec.deviant_fraction ? spec.deviant_scale : 1.0);
        std::vector<double> cbase(S), ctrend(S), camp(S), cphase(S), cgain(S),
            cpersist(S);
        for (std::size_t k = 0; k < S; ++k) {
            // base magnitudes vary mildly across the whole fleet; the
            // center's deviance expresses itself through the dynamics
            cbase[k] = jitter(rng, base[k], 0.2 * spec.heterogeneity);
            ctrend[k] = jitter(rng, trend[k], scale);
            camp[k] = jitter(rng, amp[k], scale);
            cphase[k] = phase[k] + scale * rng.uniform(-1.0, 1.0);
            cgain[k] = jitter(rng, gain[k], scale);
            cpersist[k] =
                std::clamp(jitter(rng, spec.persistence, scale), 0.0, 0.95);
        }

        Matrix values(T, A);
        std::vector<double> prev_traffic(S, 0.0);
        for (std::size_t t = 0; t < T; ++t) {
            double total = rng.uniform_sigma(spec.total_noise);
            for (std::size_t k = 0; k < S; ++k) {
                const double season =
                    camp[k] * std::sin(2.0 * std::numbers::pi *
                                           static_cast<double>(t) / 7.0 +
                                       cphase[k]);
                const double usage = cbase[k] + ctrend[k] * static_cast<double>(t) +
                                     season + rng.uniform_sigma(spec.usage_noise);
                const double traffic = cgain[k] * usage +
                                       cpersist[k] * prev_traffic[k] +
                                       rng.uniform_sigma(spec.traffic_noise);
                values(t, k) = usage;
                values(t, S + k) = traffic;
                prev_traffic[k] = traffic;
                total += traffic;
            }
            values(t, 2 * S) = total;
        }
        fleet.panels.emplace_back(center_id(c), schema, std::move(values));

        Matrix adj(A, A); // [cause][target]
        for (std::size_t k = 0; k < S; ++k) {
            adj(k, S + k) = 1.0;     // usage -> traffic
            adj(S + k, 2 * S) = 1.0; // traffic -> total
        }
        truth.adjacency.push_back(std::move(adj));
        truth.gains.push_back(std::move(cgain));
        truth.persistence.push_back(std::move(cpersist));
    }
    return {std::move(fleet), std::move(truth)};
}

ColdStartScenario make_coldstart_scenario(const Fleet& fleet, std::size_t target_index,
                                          std::size_t masked_services,
                                          std::size_t cut) {
    fleet.validate();
    if (target_index >= fleet.panels.size()) {
        throw InvalidRangeError("target index out of range");
    }
    const Panel& target = fleet.panels[target_index];
    const AttributeSchema& schema = target.schema();
    const std::size_t S = schema.known_future_indices().size();
    if (masked_services > S) {
        throw InvalidRangeError("cannot mask more services than exist");
    }
    if (cut >= target.steps()) {
        throw CutOutOfRangeError("cut beyond panel end");
    }

    // pick the most trafficked services (deterministic; ties by index)
    std::vector<std::pair<double, std::size_t>> by_traffic;
    for (std::size_t k = 0; k < S; ++k) {
        const auto idx = schema.find("traffic_" + std::to_string(k + 1));
        if (!idx) continue;
        double mean = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < target.steps(); ++t) {
            if (target.observed(t, *idx)) {
                mean += target.value(t, *idx);
                ++n;
            }
        }
        by_traffic.emplace_back(n ? -mean / static_cast<double>(n) : 0.0, k);
    }
    std::sort(by_traffic.begin(), by_traffic.end());

    ColdStartScenario scenario;
    scenario.target_index = target_index;
    scenario.cut = cut;
    for (std::size_t i = 0; i < masked_services; ++i) {
        const std::size_t k = by_traffic[i].second;
        scenario.masked_attrs.push_back("usage_" + std::to_string(k + 1));
        scenario.masked_attrs.push_back("traffic_" + std::to_string(k + 1));
    }

    const auto total_idx = schema.total_traffic_index();
    if (total_idx) {
        for (std::size_t t = cut; t < target.steps(); ++t) {
            scenario.actual_totals.push_back(target.value(t, *total_idx));
        }
    }

    scenario.fleet = fleet;
    if (masked_services > 0) {
        scenario.fleet.panels[target_index] =
            mask_history(target, scenario.masked_attrs, cut);
    }
    return scenario;
}

void save_ground_truth(const GroundTruth& truth, const std::vector<std::string>& ids,
                       const std::vector<std::string>& attr_names,
                       const std::filesystem::path& path) {
    KvFile kv;
    kv.set_strings("truth", "centers", ids);
    kv.set_strings("truth", "attributes", attr_names);
    for (std::size_t c = 0; c < truth.adjacency.size(); ++c) {
        kv.set_matrix("adjacency." + ids[c], truth.adjacency[c]);
        kv.set_vector("coefficients." + ids[c], "gains", truth.gains[c]);
        kv.set_vector("coefficients." + ids[c], "persistence", truth.persistence[c]);
    }
    kv.write(path);
}

} // namespace cdf
