#ifndef CDF_PREPROCESS_HPP
#define CDF_PREPROCESS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "cdf/panel.hpp"

namespace cdf {

/// Per-attribute standardization parameters. Attributes with zero spread
/// are flagged degenerate and get sigma = 1, so applying the transform
/// only centers them.
struct ZScoreParams {
    std::vector<double> mu;
    std::vector<double> sigma;
    std::vector<std::uint8_t> degenerate;
};

/// Last observed level per attribute; the integration constant needed to
/// undo first-order differencing.
struct DifferenceAnchor {
    std::vector<double> last_levels;
};

/// Trailing (causal) median: output[t] = median(series[max(0,t-w+1) .. t]).
/// Throws ZeroWindowError for window = 0.
std::vector<double> rolling_median(std::span<const double> series, std::size_t window);

/// Panel-level trailing median. The window uses observed entries only; a
/// cell with no observed entries in its window stays masked.
Panel smooth_panel(const Panel& panel, std::size_t window);

/// Row t of the result is x[t+1] - x[t]; a diff cell is observed only when
/// both operands are. The anchor holds each attribute's last observed level.
std::pair<Panel, DifferenceAnchor> difference(const Panel& panel);

/// Cumulative sum: out[0] = anchor + diffs[0], out[h] = out[h-1] + diffs[h].
Matrix inverse_difference(const Matrix& diffs, const DifferenceAnchor& anchor);

/// Population mean/sd over observed cells; needs >= 2 observed values per
/// attribute.
ZScoreParams zscore_fit(const Panel& panel);
Panel zscore_apply(const Panel& panel, const ZScoreParams& params);
Matrix zscore_invert(const Matrix& m, const ZScoreParams& params);
/// Invert a matrix whose columns are the given attribute subset.
Matrix zscore_invert_columns(const Matrix& m, const ZScoreParams& params,
                             std::span<const std::size_t> cols);

struct PipelineConfig {
    bool smooth = true;
    std::size_t smooth_window = 7;
    bool difference = true;
    bool zscore = true;
};

/// Everything needed to map model outputs back to level units.
struct PipelineState {
    PipelineConfig config;
    std::optional<ZScoreParams> z;
    std::optional<DifferenceAnchor> anchor;
};

/// smooth -> difference -> z-score, each stage toggleable. The returned
/// state inverts forecasts exactly (z-score and differencing are exact
/// inverses; smoothing is a cleaning step and defines the level units).
std::pair<Panel, PipelineState> preprocess_pipeline(const Panel& panel,
                                                    const PipelineConfig& config);

void save_pipeline_state(const PipelineState& state, const std::filesystem::path& path);
PipelineState load_pipeline_state(const std::filesystem::path& path);

} // namespace cdf

#endif // CDF_PREPROCESS_HPP
