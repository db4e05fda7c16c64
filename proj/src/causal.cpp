#include "cdf/causal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"

namespace cdf {

namespace {

constexpr double kRidgeJitter = 1e-8;

// Maximum-entropy approximation of the differential entropy of a
// standardized variable (Hyvarinen's contrast constants).
constexpr double kEntropyK1 = 79.047;
constexpr double kEntropyK2 = 7.4129;
constexpr double kEntropyGamma = 0.37457;

double mean_of(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double population_sd(std::span<const double> v, double mu) {
    double ss = 0.0;
    for (double x : v) {
        const double d = x - mu;
        ss += d * d;
    }
    return std::sqrt(ss / static_cast<double>(v.size()));
}

void standardize(std::vector<double>& v) {
    const double mu = mean_of(v);
    const double sd = population_sd(v, mu);
    if (sd == 0.0) throw DegenerateColumnError("constant column in lingam input");
    for (double& x : v) x = (x - mu) / sd;
}

double approx_entropy(std::span<const double> u) {
    double m_logcosh = 0.0, m_uexp = 0.0;
    for (double x : u) {
        m_logcosh += std::log(std::cosh(x));
        m_uexp += x * std::exp(-0.5 * x * x);
    }
    const double n = static_cast<double>(u.size());
    m_logcosh /= n;
    m_uexp /= n;
    const double h_gauss = 0.5 * (1.0 + std::log(2.0 * std::numbers::pi));
    const double d1 = m_logcosh - kEntropyGamma;
    return h_gauss - kEntropyK1 * d1 * d1 - kEntropyK2 * m_uexp * m_uexp;
}

// Residual of y regressed on x (no intercept; callers pass centered data).
std::vector<double> regress_out(std::span<const double> y, std::span<const double> x) {
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sxy += x[i] * y[i];
        sxx += x[i] * x[i];
    }
    if (sxx == 0.0) throw DegenerateColumnError("zero-variance regressor");
    const double beta = sxy / sxx;
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) r[i] = y[i] - beta * x[i];
    return r;
}

} // namespace

VarFit fit_var(const Panel& panel, std::size_t lag_order) {
    const std::size_t T = panel.steps(), A = panel.attrs(), p = lag_order;
    if (p == 0) throw InvalidRangeError("lag order must be >= 1");
    if (!panel.fully_observed()) {
        throw MaskedInputError("fit_var requires a fully observed panel");
    }
    const std::size_t d = 1 + p * A; // intercept + lagged regressors
    if (T < p || T - p < d) {
        throw InsufficientRowsError("fit_var needs T - p >= 1 + p*A (T = " +
                                    std::to_string(T) + ", p = " + std::to_string(p) +
                                    ", A = " + std::to_string(A) + ")");
    }
    const std::size_t n = T - p;

    Matrix design(n, d);
    for (std::size_t t = 0; t < n; ++t) {
        design(t, 0) = 1.0;
        for (std::size_t tau = 1; tau <= p; ++tau) {
            for (std::size_t k = 0; k < A; ++k) {
                design(t, 1 + (tau - 1) * A + k) = panel.value(t + p - tau, k);
            }
        }
    }

    Matrix gram = matmul_tn(design, design);
    for (std::size_t i = 0; i < d; ++i) gram(i, i) += kRidgeJitter;

    VarFit fit;
    fit.lag_order = p;
    fit.intercept.resize(A);
    fit.coeffs.assign(p, Matrix(A, A));
    fit.residuals = Matrix(n, A);

    for (std::size_t j = 0; j < A; ++j) {
        std::vector<double> rhs(d, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double y = panel.value(t + p, j);
            for (std::size_t c = 0; c < d; ++c) rhs[c] += design(t, c) * y;
        }
        const std::vector<double> beta = solve_spd(gram, rhs);
        fit.intercept[j] = beta[0];
        for (std::size_t tau = 1; tau <= p; ++tau) {
            for (std::size_t k = 0; k < A; ++k) {
                fit.coeffs[tau - 1](j, k) = beta[1 + (tau - 1) * A + k];
            }
        }
        for (std::size_t t = 0; t < n; ++t) {
            double pred = 0.0;
            for (std::size_t c = 0; c < d; ++c) pred += design(t, c) * beta[c];
            fit.residuals(t, j) = panel.value(t + p, j) - pred;
        }
    }
    return fit;
}

LingamResult direct_lingam(const Matrix& residuals, double prune_threshold) {
    const std::size_t n = residuals.rows(), A = residuals.cols();
    if (n < 50) {
        throw TooFewSamplesError("direct_lingam needs >= 50 rows, got " +
                                 std::to_string(n));
    }

    // centered working copies, one per variable
    std::vector<std::vector<double>> work(A, std::vector<double>(n));
    for (std::size_t j = 0; j < A; ++j) {
        for (std::size_t t = 0; t < n; ++t) work[j][t] = residuals(t, j);
        const double mu = mean_of(work[j]);
        for (double& x : work[j]) x -= mu;
        if (population_sd(work[j], 0.0) == 0.0) {
            throw DegenerateColumnError("residual column " + std::to_string(j) +
                                        " is constant");
        }
    }

    std::vector<std::size_t> remaining(A);
    for (std::size_t j = 0; j < A; ++j) remaining[j] = j;
    std::vector<std::size_t> order;
    order.reserve(A);

    while (remaining.size() > 1) {
        // standardized copies of the current working data
        std::vector<std::vector<double>> std_cols(remaining.size());
        for (std::size_t a = 0; a < remaining.size(); ++a) {
            std_cols[a] = work[remaining[a]];
            standardize(std_cols[a]);
        }
        // score(a, b) > 0 favors a -> b; most exogenous minimizes
        // sum over b of min(0, score)^2
        double best_penalty = 0.0;
        std::size_t best = 0;
        for (std::size_t a = 0; a < remaining.size(); ++a) {
            double penalty = 0.0;
            for (std::size_t b = 0; b < remaining.size(); ++b) {
                if (a == b) continue;
                std::vector<double> r_ab = regress_out(std_cols[a], std_cols[b]);
                std::vector<double> r_ba = regress_out(std_cols[b], std_cols[a]);
                standardize(r_ab);
                standardize(r_ba);
                const double score = (approx_entropy(std_cols[b]) + approx_entropy(r_ab)) -
                                     (approx_entropy(std_cols[a]) + approx_entropy(r_ba));
                const double neg = std::min(0.0, score);
                penalty += neg * neg;
            }
            if (a == 0 || penalty < best_penalty) {
                best_penalty = penalty;
                best = a;
            }
        }
        const std::size_t chosen = remaining[best];
        order.push_back(chosen);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
        for (std::size_t rem : remaining) {
            work[rem] = regress_out(work[rem], work[chosen]);
        }
    }
    order.push_back(remaining.front());

    // sequential least squares on the original (centered) residuals
    std::vector<std::vector<double>> centered(A, std::vector<double>(n));
    for (std::size_t j = 0; j < A; ++j) {
        for (std::size_t t = 0; t < n; ++t) centered[j][t] = residuals(t, j);
        const double mu = mean_of(centered[j]);
        for (double& x : centered[j]) x -= mu;
    }
    Matrix b0(A, A);
    for (std::size_t pos = 1; pos < A; ++pos) {
        const std::size_t target = order[pos];
        Matrix gram(pos, pos);
        std::vector<double> rhs(pos, 0.0);
        for (std::size_t a = 0; a < pos; ++a) {
            for (std::size_t b = 0; b < pos; ++b) {
                double s = 0.0;
                for (std::size_t t = 0; t < n; ++t) {
                    s += centered[order[a]][t] * centered[order[b]][t];
                }
                gram(a, b) = s;
            }
            gram(a, a) += kRidgeJitter;
            double s = 0.0;
            for (std::size_t t = 0; t < n; ++t) {
                s += centered[order[a]][t] * centered[target][t];
            }
            rhs[a] = s;
        }
        const std::vector<double> beta = solve_spd(gram, rhs);
        for (std::size_t a = 0; a < pos; ++a) {
            b0(target, order[a]) = std::abs(beta[a]) > prune_threshold ? beta[a] : 0.0;
        }
    }
    return {std::move(order), std::move(b0)};
}

std::vector<Matrix> compose_lagged_effects(const VarFit& fit, const Matrix& b0) {
    const std::size_t A = b0.rows();
    if (b0.cols() != A) throw DimensionMismatchError("b0 must be square");
    Matrix factor = Matrix::identity(A);
    for (std::size_t i = 0; i < A; ++i) {
        for (std::size_t j = 0; j < A; ++j) factor(i, j) -= b0(i, j);
    }
    std::vector<Matrix> out;
    out.reserve(fit.coeffs.size());
    for (const Matrix& m : fit.coeffs) {
        if (m.rows() != A || m.cols() != A) {
            throw DimensionMismatchError("lag matrix shape differs from b0");
        }
        out.push_back(matmul(factor, m));
    }
    return out;
}

AdjacencyPair extract_adjacency(const Matrix& b0, const std::vector<Matrix>& b_lagged,
                                double threshold) {
    const std::size_t A = b0.rows();
    Matrix influence(A, A); // [cause][target]
    for (std::size_t j = 0; j < A; ++j) {
        for (std::size_t k = 0; k < A; ++k) {
            double c = std::abs(b0(j, k));
            for (const Matrix& b : b_lagged) c += std::abs(b(j, k));
            influence(k, j) = c;
        }
    }
    AdjacencyPair out;
    out.adjacency = Matrix(A, A);
    for (std::size_t k = 0; k < A; ++k) {
        for (std::size_t j = 0; j < A; ++j) {
            out.adjacency(k, j) = influence(k, j) > threshold ? 1.0 : 0.0;
        }
    }
    out.propagation = Matrix(A, A);
    for (std::size_t j = 0; j < A; ++j) {
        double colsum = 0.0;
        for (std::size_t k = 0; k < A; ++k) {
            colsum += out.adjacency(k, j) + (k == j ? 1.0 : 0.0);
        }
        for (std::size_t k = 0; k < A; ++k) {
            out.propagation(k, j) =
                (out.adjacency(k, j) + (k == j ? 1.0 : 0.0)) / colsum;
        }
    }
    return out;
}

CausalGraph discover(const Panel& panel, std::size_t lag_order, double edge_threshold) {
    const VarFit fit = fit_var(panel, lag_order);
    LingamResult lingam = direct_lingam(fit.residuals, edge_threshold);
    std::vector<Matrix> lagged = compose_lagged_effects(fit, lingam.b0);
    AdjacencyPair adj = extract_adjacency(lingam.b0, lagged, edge_threshold);
    CausalGraph g;
    g.b0 = std::move(lingam.b0);
    g.b_lagged = std::move(lagged);
    g.causal_order = std::move(lingam.causal_order);
    g.adjacency = std::move(adj.adjacency);
    g.propagation = std::move(adj.propagation);
    g.edge_threshold = edge_threshold;
    return g;
}

Matrix all_ones_propagation(std::size_t a) {
    Matrix m(a, a, 1.0 / static_cast<double>(a));
    return m;
}

void save_graph(const CausalGraph& graph, const std::vector<std::string>& attr_names,
                const std::filesystem::path& path) {
    KvFile kv;
    kv.set_strings("graph", "attributes", attr_names);
    kv.set_double("graph", "edge_threshold", graph.edge_threshold);
    kv.set_uint("graph", "lag_order", graph.b_lagged.size());
    std::vector<double> order(graph.causal_order.begin(), graph.causal_order.end());
    kv.set_vector("graph", "causal_order", order);
    kv.set_matrix("b0", graph.b0);
    for (std::size_t tau = 0; tau < graph.b_lagged.size(); ++tau) {
        kv.set_matrix("b_lag" + std::to_string(tau + 1), graph.b_lagged[tau]);
    }
    kv.set_matrix("adjacency", graph.adjacency);
    kv.set_matrix("propagation", graph.propagation);
    kv.write(path);
}

CausalGraph load_graph(const std::filesystem::path& path) {
    const KvFile kv = KvFile::read(path);
    CausalGraph g;
    g.edge_threshold = kv.get_double("graph", "edge_threshold");
    for (double v : kv.get_vector("graph", "causal_order")) {
        g.causal_order.push_back(static_cast<std::size_t>(v));
    }
    g.b0 = kv.get_matrix("b0");
    const std::size_t lags = kv.get_uint("graph", "lag_order");
    for (std::size_t tau = 1; tau <= lags; ++tau) {
        g.b_lagged.push_back(kv.get_matrix("b_lag" + std::to_string(tau)));
    }
    g.adjacency = kv.get_matrix("adjacency");
    g.propagation = kv.get_matrix("propagation");
    return g;
}

} // namespace cdf
