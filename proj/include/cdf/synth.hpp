#ifndef CDF_SYNTH_HPP
#define CDF_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "cdf/panel.hpp"

namespace cdf {

/// Generator parameters for a synthetic data-center fleet. Each center
/// carries S usage attributes (known future), S traffic attributes, and a
/// total-traffic attribute. Innovations are uniform, which keeps the
/// instantaneous structure identifiable for causal discovery.
struct FleetSpec {
    std::size_t centers = 15;
    std::size_t services = 10;
    std::size_t steps = 533;

    double usage_noise = 1.0;   // sd of usage innovations
    double traffic_noise = 0.8; // sd of traffic innovations
    double total_noise = 0.5;   // sd of total innovations

    double base_min = 20.0, base_max = 60.0;   // usage base level
    double trend_min = 0.0, trend_max = 0.03;  // usage slope per step
    double seasonal_amp = 4.0;                 // weekly seasonality amplitude
    double gain_min = 0.6, gain_max = 1.8;     // usage -> traffic gain
    double persistence = 0.35;                 // traffic lag-1 coefficient

    // cross-center heterogeneity: every parameter of a center is jittered
    // at relative scale `heterogeneity`; a `deviant_fraction` of centers
    // instead jitters at `deviant_scale` times that, modeling fleets where
    // most centers are standard and a few run unusual workloads
    double heterogeneity = 0.3;
    double deviant_fraction = 0.25;
    double deviant_scale = 4.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Planted structure for scoring discovery: adjacency[c] is the
/// [cause][target] matrix of generating edges for center c.
struct GroundTruth {
    std::vector<Matrix> adjacency;
    std::vector<std::vector<double>> gains;       // per center, per service
    std::vector<std::vector<double>> persistence; // per center, per service
};

std::pair<Fleet, GroundTruth> generate_fleet(const FleetSpec& spec);

/// Cold-start evaluation setup: the target center's most trafficked
/// services lose both usage and traffic history before `cut`; usage from
/// `cut` on stays available as known futures. Post-cut totals are kept for
/// scoring.
struct ColdStartScenario {
    Fleet fleet; // target panel replaced by its masked version
    std::size_t target_index = 0;
    std::vector<std::string> masked_attrs;
    std::size_t cut = 0;
    std::vector<double> actual_totals; // rows cut..T-1 of the target's total
};

ColdStartScenario make_coldstart_scenario(const Fleet& fleet, std::size_t target_index,
                                          std::size_t masked_services, std::size_t cut);

void save_ground_truth(const GroundTruth& truth, const std::vector<std::string>& ids,
                       const std::vector<std::string>& attr_names,
                       const std::filesystem::path& path);

} // namespace cdf

#endif // CDF_SYNTH_HPP
