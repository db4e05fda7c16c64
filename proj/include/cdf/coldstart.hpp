#ifndef CDF_COLDSTART_HPP
#define CDF_COLDSTART_HPP

#include <string>
#include <vector>

#include "cdf/model.hpp"
#include "cdf/similarity.hpp"

namespace cdf {

enum class ColdStartStrategy { gmm, gmm_sd, eros, virtual_avg, virtual_mn };

std::string strategy_name(ColdStartStrategy s);
ColdStartStrategy parse_strategy(const std::string& name);

struct ColdStartConfig {
    ColdStartStrategy strategy = ColdStartStrategy::gmm;
    std::size_t k = 5;              // donors used
    std::size_t gmm_components = 7; // mixture size for gmm-based ranking
    std::uint64_t seed = 0;
    ModelConfig model;          // used by the virtual strategies
    PipelineConfig pipeline;    // used by the virtual strategies
    DiscoveryConfig discovery;  // used by the virtual strategies
    ChronoSplit split;
};

/// A candidate data center: its (unmasked) panel and its trained model.
struct Donor {
    const Panel* panel = nullptr;
    const TrainedBundle* bundle = nullptr;
};

struct CandidateForecast {
    std::string source_id;
    Matrix values; // H x |O2|, level units
};

/// Donors ranked by the strategy's similarity notion, computed from the
/// target's observed history up to the origin. Input order never affects
/// the result: exact ties fall back to donor id.
SimilarityRanking rank_donors(const Panel& target, std::span<const Donor> donors,
                              std::size_t origin, const ColdStartConfig& config);

/// Iterative trim: drop candidates whose distance to the mean forecast
/// exceeds mean + one standard deviation of the distances; stop when
/// nothing is dropped or at most two remain; return the survivors' mean.
Matrix sd_filter_average(const std::vector<CandidateForecast>& candidates);

enum class VirtualWeighting { uniform, manhattan };

/// Pointwise (weighted) average of the donor panels. Manhattan weighting
/// uses w_c proportional to 1 / distance(donor, target) over the window;
/// zero-distance donors take all the weight.
Panel build_virtual_panel(std::span<const Panel* const> donors,
                          VirtualWeighting weighting, const Panel* target,
                          TimeRange window, std::span<const std::size_t> attrs);

/// The full similarity-based forecast at `origin` for a target whose masked
/// attributes lack history: rank donors, take the top k, run each donor's
/// model on the target's own window and known futures, and combine per the
/// strategy (mean, sd-filtered mean, or train-on-virtual-panel).
ForecastResult coldstart_forecast(const Panel& target, std::span<const Donor> donors,
                                  std::size_t origin, const ColdStartConfig& config);

/// The train-on-virtual-panel path (strategies virtual / virtual_mn).
ForecastResult virtual_strategy_forecast(const Panel& target,
                                         std::span<const Donor> donors,
                                         std::size_t origin,
                                         const ColdStartConfig& config);

/// Per-donor forecasts for the target, in donor order (audit output).
std::vector<CandidateForecast> donor_forecasts(const Panel& target,
                                               std::span<const Donor> donors,
                                               std::size_t origin,
                                               const ColdStartConfig& config);

} // namespace cdf

#endif // CDF_COLDSTART_HPP
