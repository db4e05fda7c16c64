#ifndef CDF_TESTS_SVAR_HPP
#define CDF_TESTS_SVAR_HPP

#include <vector>

#include "cdf/linalg.hpp"
#include "cdf/panel.hpp"
#include "cdf/rng.hpp"
#include "support/testutil.hpp"

namespace cdf::test {

/// Structural VAR(1) with a random instantaneous DAG and lag-1 effects;
/// the ground truth against which discovery is scored.
struct SvarSystem {
    std::vector<std::size_t> order; // causal order, most exogenous first
    Matrix b0;                      // row = target, strictly lower in order
    Matrix b1;                      // row = target
};

inline SvarSystem random_svar(std::size_t a, Rng& rng, double edge_prob = 0.5) {
    SvarSystem sys;
    sys.order.resize(a);
    for (std::size_t i = 0; i < a; ++i) sys.order[i] = i;
    rng.shuffle(sys.order);
    sys.b0 = Matrix(a, a);
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = i + 1; j < a; ++j) {
            if (rng.uniform() < edge_prob) {
                const double mag = rng.uniform(0.5, 0.9);
                sys.b0(sys.order[j], sys.order[i]) =
                    rng.uniform() < 0.5 ? mag : -mag;
            }
        }
    }
    sys.b1 = Matrix(a, a);
    for (std::size_t i = 0; i < a; ++i) sys.b1(i, i) = rng.uniform(0.3, 0.5);
    return sys;
}

/// x_t solved in causal order: x = B0 x + B1 x_{t-1} + e, uniform noise.
inline Panel simulate_svar(const SvarSystem& sys, std::size_t t_steps,
                           std::uint64_t seed, double noise_sd = 1.0,
                           std::size_t burn_in = 100) {
    const std::size_t a = sys.b0.rows();
    Rng rng(seed);
    Matrix values(t_steps, a);
    std::vector<double> prev(a, 0.0), cur(a, 0.0);
    for (std::size_t t = 0; t < t_steps + burn_in; ++t) {
        for (const std::size_t j : sys.order) {
            double v = rng.uniform_sigma(noise_sd);
            for (std::size_t k = 0; k < a; ++k) {
                v += sys.b1(j, k) * prev[k] + sys.b0(j, k) * cur[k];
            }
            cur[j] = v;
        }
        if (t >= burn_in) {
            for (std::size_t k = 0; k < a; ++k) values(t - burn_in, k) = cur[k];
        }
        prev = cur;
    }
    return Panel("svar", simple_schema(a), std::move(values));
}

/// Ground-truth off-diagonal edge matrix in [cause][target] orientation.
inline Matrix svar_truth_edges(const SvarSystem& sys) {
    const std::size_t a = sys.b0.rows();
    Matrix m(a, a);
    for (std::size_t j = 0; j < a; ++j) {
        for (std::size_t k = 0; k < a; ++k) {
            if (j == k) continue;
            if (sys.b0(j, k) != 0.0 || sys.b1(j, k) != 0.0) m(k, j) = 1.0;
        }
    }
    return m;
}

/// F1 over off-diagonal directed edges.
inline double edge_f1(const Matrix& truth, const Matrix& found) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < truth.rows(); ++k) {
        for (std::size_t j = 0; j < truth.cols(); ++j) {
            if (k == j) continue;
            const bool t = truth(k, j) != 0.0, f = found(k, j) != 0.0;
            tp += t && f;
            fp += !t && f;
            fn += t && !f;
        }
    }
    if (tp == 0) return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    return 2.0 * precision * recall / (precision + recall);
}

} // namespace cdf::test

#endif // CDF_TESTS_SVAR_HPP
