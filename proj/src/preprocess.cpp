#include "cdf/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"

namespace cdf {

std::vector<double> rolling_median(std::span<const double> series,
                                   std::size_t window) {
    if (window == 0) throw ZeroWindowError("rolling_median window must be >= 1");
    std::vector<double> out(series.size());
    std::vector<double> buf;
    buf.reserve(window);
    for (std::size_t t = 0; t < series.size(); ++t) {
        const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
        buf.assign(series.begin() + lo, series.begin() + t + 1);
        std::sort(buf.begin(), buf.end());
        const std::size_t n = buf.size();
        out[t] = n % 2 ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
    }
    return out;
}

Panel smooth_panel(const Panel& panel, std::size_t window) {
    if (window == 0) throw ZeroWindowError("smoothing window must be >= 1");
    const std::size_t T = panel.steps(), A = panel.attrs();
    Matrix values(T, A);
    std::vector<std::uint8_t> observed(T * A, 0);
    std::vector<double> buf;
    buf.reserve(window);
    for (std::size_t j = 0; j < A; ++j) {
        for (std::size_t t = 0; t < T; ++t) {
            const std::size_t lo = t + 1 >= window ? t + 1 - window : 0;
            buf.clear();
            for (std::size_t u = lo; u <= t; ++u) {
                if (panel.observed(u, j)) buf.push_back(panel.value(u, j));
            }
            if (buf.empty()) continue; // stays masked
            std::sort(buf.begin(), buf.end());
            const std::size_t n = buf.size();
            values(t, j) = n % 2 ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
            observed[t * A + j] = 1;
        }
    }
    return Panel(panel.id(), panel.schema(), std::move(values), std::move(observed));
}

std::pair<Panel, DifferenceAnchor> difference(const Panel& panel) {
    const std::size_t T = panel.steps(), A = panel.attrs();
    if (T < 2) throw TooShortError("difference needs T >= 2");
    Matrix values(T - 1, A);
    std::vector<std::uint8_t> observed((T - 1) * A, 0);
    for (std::size_t t = 0; t + 1 < T; ++t) {
        for (std::size_t j = 0; j < A; ++j) {
            if (panel.observed(t, j) && panel.observed(t + 1, j)) {
                values(t, j) = panel.value(t + 1, j) - panel.value(t, j);
                observed[t * A + j] = 1;
            }
        }
    }
    DifferenceAnchor anchor;
    anchor.last_levels.resize(A);
    for (std::size_t j = 0; j < A; ++j) {
        const auto last = panel.last_observed_at_or_before(T - 1, j);
        if (!last) {
            throw TooShortError("attribute " + std::to_string(j) +
                                " has no observed level for the anchor");
        }
        anchor.last_levels[j] = panel.value(*last, j);
    }
    return {Panel(panel.id(), panel.schema(), std::move(values), std::move(observed)),
            std::move(anchor)};
}

Matrix inverse_difference(const Matrix& diffs, const DifferenceAnchor& anchor) {
    if (anchor.last_levels.size() != diffs.cols()) {
        throw DimensionMismatchError("anchor length " +
                                     std::to_string(anchor.last_levels.size()) +
                                     " vs " + std::to_string(diffs.cols()) +
                                     " columns");
    }
    Matrix out(diffs.rows(), diffs.cols());
    for (std::size_t j = 0; j < diffs.cols(); ++j) {
        double level = anchor.last_levels[j];
        for (std::size_t h = 0; h < diffs.rows(); ++h) {
            level += diffs(h, j);
            out(h, j) = level;
        }
    }
    return out;
}

ZScoreParams zscore_fit(const Panel& panel) {
    const std::size_t A = panel.attrs();
    ZScoreParams p;
    p.mu.resize(A);
    p.sigma.resize(A);
    p.degenerate.assign(A, 0);
    for (std::size_t j = 0; j < A; ++j) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < panel.steps(); ++t) {
            if (panel.observed(t, j)) {
                sum += panel.value(t, j);
                ++n;
            }
        }
        if (n < 2) {
            throw InsufficientDataError("attribute " + std::to_string(j) +
                                        " has fewer than 2 observed values");
        }
        const double mu = sum / static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t t = 0; t < panel.steps(); ++t) {
            if (panel.observed(t, j)) {
                const double d = panel.value(t, j) - mu;
                ss += d * d;
            }
        }
        const double sigma = std::sqrt(ss / static_cast<double>(n));
        p.mu[j] = mu;
        if (sigma == 0.0) {
            p.sigma[j] = 1.0;
            p.degenerate[j] = 1;
        } else {
            p.sigma[j] = sigma;
        }
    }
    return p;
}

Panel zscore_apply(const Panel& panel, const ZScoreParams& params) {
    const std::size_t T = panel.steps(), A = panel.attrs();
    if (params.mu.size() != A) {
        throw DimensionMismatchError("z-score params cover " +
                                     std::to_string(params.mu.size()) +
                                     " attributes, panel has " + std::to_string(A));
    }
    Matrix values(T, A);
    std::vector<std::uint8_t> observed(T * A, 0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < A; ++j) {
            if (!panel.observed(t, j)) continue;
            values(t, j) = (panel.value(t, j) - params.mu[j]) / params.sigma[j];
            observed[t * A + j] = 1;
        }
    }
    return Panel(panel.id(), panel.schema(), std::move(values), std::move(observed));
}

Matrix zscore_invert(const Matrix& m, const ZScoreParams& params) {
    std::vector<std::size_t> cols(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) cols[j] = j;
    return zscore_invert_columns(m, params, cols);
}

Matrix zscore_invert_columns(const Matrix& m, const ZScoreParams& params,
                             std::span<const std::size_t> cols) {
    if (cols.size() != m.cols()) {
        throw DimensionMismatchError("column subset size differs from matrix width");
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::size_t j = cols[c];
        if (j >= params.mu.size()) {
            throw DimensionMismatchError("column index out of z-score params");
        }
        for (std::size_t r = 0; r < m.rows(); ++r) {
            out(r, c) = m(r, c) * params.sigma[j] + params.mu[j];
        }
    }
    return out;
}

std::pair<Panel, PipelineState> preprocess_pipeline(const Panel& panel,
                                                    const PipelineConfig& config) {
    PipelineState state;
    state.config = config;
    Panel current = panel;
    if (config.smooth) current = smooth_panel(current, config.smooth_window);
    if (config.difference) {
        auto [diffed, anchor] = difference(current);
        current = std::move(diffed);
        state.anchor = std::move(anchor);
    }
    if (config.zscore) {
        state.z = zscore_fit(current);
        current = zscore_apply(current, *state.z);
    }
    return {std::move(current), std::move(state)};
}

void save_pipeline_state(const PipelineState& state,
                         const std::filesystem::path& path) {
    KvFile kv;
    kv.set_uint("pipeline", "smooth", state.config.smooth ? 1 : 0);
    kv.set_uint("pipeline", "smooth_window", state.config.smooth_window);
    kv.set_uint("pipeline", "difference", state.config.difference ? 1 : 0);
    kv.set_uint("pipeline", "zscore", state.config.zscore ? 1 : 0);
    if (state.z) {
        kv.set_vector("zscore", "mu", state.z->mu);
        kv.set_vector("zscore", "sigma", state.z->sigma);
        std::vector<double> deg(state.z->degenerate.begin(), state.z->degenerate.end());
        kv.set_vector("zscore", "degenerate", deg);
    }
    if (state.anchor) kv.set_vector("anchor", "last_levels", state.anchor->last_levels);
    kv.write(path);
}

PipelineState load_pipeline_state(const std::filesystem::path& path) {
    const KvFile kv = KvFile::read(path);
    PipelineState state;
    state.config.smooth = kv.get_uint("pipeline", "smooth") != 0;
    state.config.smooth_window = kv.get_uint("pipeline", "smooth_window");
    state.config.difference = kv.get_uint("pipeline", "difference") != 0;
    state.config.zscore = kv.get_uint("pipeline", "zscore") != 0;
    if (kv.has_section("zscore")) {
        ZScoreParams z;
        z.mu = kv.get_vector("zscore", "mu");
        z.sigma = kv.get_vector("zscore", "sigma");
        for (double d : kv.get_vector("zscore", "degenerate")) {
            z.degenerate.push_back(d != 0.0 ? 1 : 0);
        }
        state.z = std::move(z);
    }
    if (kv.has_section("anchor")) {
        state.anchor = DifferenceAnchor{kv.get_vector("anchor", "last_levels")};
    }
    return state;
}

} // namespace cdf
