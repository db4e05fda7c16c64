#ifndef CDF_CAUSAL_HPP
#define CDF_CAUSAL_HPP

#include <filesystem>
#include <vector>

#include "cdf/panel.hpp"

namespace cdf {

/// VAR(p) least-squares fit. coeffs[tau-1](j, k) is the effect of
/// attribute k at lag tau on attribute j ("row = target").
struct VarFit {
    std::size_t lag_order = 1;
    std::vector<Matrix> coeffs;
    std::vector<double> intercept;
    Matrix residuals; // (T - p) x A
};

/// Per-target ordinary least squares via normal equations with a ridge
/// jitter of 1e-8 on the Gram diagonal. Requires a fully observed panel
/// and T - p >= 1 + p*A rows.
VarFit fit_var(const Panel& panel, std::size_t lag_order);

struct LingamResult {
    std::vector<std::size_t> causal_order;
    Matrix b0; // instantaneous effects, row = target; strictly lower triangular in causal_order
};

/// Deterministic LiNGAM on iid residual rows: repeatedly picks the most
/// exogenous variable by the pairwise likelihood-ratio independence score,
/// regresses it out of the rest, then re-estimates B0 by sequential least
/// squares along the discovered order and prunes entries at or below
/// prune_threshold in magnitude.
LingamResult direct_lingam(const Matrix& residuals, double prune_threshold);

/// B_tau = (I - B0) * M_tau.
std::vector<Matrix> compose_lagged_effects(const VarFit& fit, const Matrix& b0);

/// Discovered structure. b0/b_lagged use row = target; adjacency and
/// propagation use [cause][target], so column j of propagation mixes the
/// parents of attribute j (plus a self-loop) with weights summing to 1.
struct CausalGraph {
    Matrix b0;
    std::vector<Matrix> b_lagged;
    std::vector<std::size_t> causal_order;
    Matrix adjacency;   // binary
    Matrix propagation; // column-stochastic
    double edge_threshold = 0.1;
};

struct AdjacencyPair {
    Matrix adjacency;
    Matrix propagation;
};

/// Combined influence C[k][j] = |b0(j,k)| + sum_tau |b_tau(j,k)|; an edge
/// k -> j exists when C[k][j] > threshold. Propagation = column-normalized
/// (adjacency + I).
AdjacencyPair extract_adjacency(const Matrix& b0, const std::vector<Matrix>& b_lagged,
                                double threshold);

/// fit_var -> direct_lingam -> compose_lagged_effects -> extract_adjacency.
/// Deterministic given input.
CausalGraph discover(const Panel& panel, std::size_t lag_order, double edge_threshold);

/// All-ones adjacency baseline, column-normalized (every entry 1/A).
Matrix all_ones_propagation(std::size_t a);

void save_graph(const CausalGraph& graph, const std::vector<std::string>& attr_names,
                const std::filesystem::path& path);
CausalGraph load_graph(const std::filesystem::path& path);

} // namespace cdf

#endif // CDF_CAUSAL_HPP
