#ifndef CDF_SIMILARITY_HPP
#define CDF_SIMILARITY_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdf/panel.hpp"

namespace cdf {

/// Half-open row range [t0, t1) used as the comparison window.
struct TimeRange {
    std::size_t t0 = 0;
    std::size_t t1 = 0;
    std::size_t length() const { return t1 - t0; }
};

/// Attributes with >= 3 observed values inside the window in every panel.
std::vector<std::size_t> commonly_observed(std::span<const Panel* const> panels,
                                           TimeRange window);

/// Per-attribute {mean, standard deviation, lag-1 autocorrelation} over the
/// observed cells of the window, in attribute order. A constant attribute
/// gets sd = 0 and autocorrelation 0.
std::vector<double> panel_features(const Panel& panel, TimeRange window,
                                   std::span<const std::size_t> attrs);

/// Diagonal-covariance Gaussian mixture fit by EM.
struct GmmModel {
    std::size_t components = 0;
    std::vector<double> weights;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> variances; // floored at 1e-6
    double log_likelihood = 0.0;
    std::vector<double> ll_curve; // per-iteration, non-decreasing
};

/// Initialization: K distinct samples drawn by seed become the means; the
/// global per-dimension variance seeds the variances. Stops when the
/// log-likelihood moves < 1e-6 or after 200 iterations.
GmmModel gmm_fit(const std::vector<std::vector<double>>& features, std::size_t k,
                 std::uint64_t seed);

/// Posterior responsibilities of one feature vector.
std::vector<double> gmm_responsibilities(const GmmModel& model,
                                         std::span<const double> x);

struct RankedPanel {
    std::string id;
    double score;
};

/// Candidates ordered most similar first; scores non-increasing; every
/// candidate appears exactly once.
struct SimilarityRanking {
    std::vector<RankedPanel> entries;
    std::string method;
};

/// Candidates sharing the target's argmax-responsibility component come
/// first (by feature distance), then the rest by distance; exact ties fall
/// back to id order so the result is independent of input order.
SimilarityRanking gmm_rank(
    std::span<const double> target_features, const GmmModel& model,
    const std::vector<std::pair<std::string, std::vector<double>>>& candidates);

/// Eros similarity: sum_i w_i |<u_i, v_i>| over corresponding covariance
/// eigenvectors (descending eigenvalue order, deterministic signs).
/// Result lies in [0, 1]; Eros(a, a) = 1.
double eros_similarity(const Panel& a, const Panel& b, std::span<const double> weights,
                       TimeRange window, std::span<const std::size_t> attrs);

/// w_i = mean over panels of lambda_i / sum(lambda), renormalized to sum 1.
std::vector<double> eros_weights(const Fleet& fleet, TimeRange window,
                                 std::span<const std::size_t> attrs);

/// Sum of |a - b| over the window and attribute set.
double manhattan_distance(const Panel& a, const Panel& b, TimeRange window,
                          std::span<const std::size_t> attrs);

} // namespace cdf

#endif // CDF_SIMILARITY_HPP
