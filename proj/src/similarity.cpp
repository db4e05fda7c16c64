#include "cdf/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cdf/errors.hpp"
#include "cdf/linalg.hpp"
#include "cdf/rng.hpp"

namespace cdf {

namespace {

constexpr double kVarianceFloor = 1e-6;
constexpr double kLlTolerance = 1e-6;
constexpr std::size_t kMaxEmIterations = 200;

double euclidean(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

// Covariance matrix over rows of the window where every listed attribute is
// observed. Throws DegenerateCovarianceError when there are not enough
// complete rows or an attribute has zero variance.
Matrix window_covariance(const Panel& p, TimeRange window,
                         std::span<const std::size_t> attrs) {
    const std::size_t d = attrs.size();
    std::vector<std::size_t> rows;
    for (std::size_t t = window.t0; t < window.t1; ++t) {
        bool full = true;
        for (std::size_t j : attrs) {
            if (!p.observed(t, j)) {
                full = false;
                break;
            }
        }
        if (full) rows.push_back(t);
    }
    if (rows.size() < d + 1) {
        throw DegenerateCovarianceError("panel '" + p.id() + "' has " +
                                        std::to_string(rows.size()) +
                                        " complete rows, needs >= " +
                                        std::to_string(d + 1));
    }
    std::vector<double> mean(d, 0.0);
    for (std::size_t t : rows) {
        for (std::size_t c = 0; c < d; ++c) mean[c] += p.value(t, attrs[c]);
    }
    for (double& m : mean) m /= static_cast<double>(rows.size());
    Matrix cov(d, d);
    for (std::size_t t : rows) {
        for (std::size_t a = 0; a < d; ++a) {
            const double da = p.value(t, attrs[a]) - mean[a];
            for (std::size_t b = a; b < d; ++b) {
                cov(a, b) += da * (p.value(t, attrs[b]) - mean[b]);
            }
        }
    }
    for (std::size_t a = 0; a < d; ++a) {
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) /= static_cast<double>(rows.size());
            cov(b, a) = cov(a, b);
        }
        if (cov(a, a) == 0.0) {
            throw DegenerateCovarianceError("attribute " + std::to_string(attrs[a]) +
                                            " is constant in the window");
        }
    }
    return cov;
}

} // namespace

std::vector<std::size_t> commonly_observed(std::span<const Panel* const> panels,
                                           TimeRange window) {
    if (panels.empty()) return {};
    const std::size_t A = panels.front()->attrs();
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < A; ++j) {
        bool ok = true;
        for (const Panel* p : panels) {
            std::size_t n = 0;
            for (std::size_t t = window.t0; t < window.t1 && t < p->steps(); ++t) {
                if (p->observed(t, j)) ++n;
            }
            if (n < 3) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(j);
    }
    return out;
}

std::vector<double> panel_features(const Panel& panel, TimeRange window,
                                   std::span<const std::size_t> attrs) {
    if (window.t1 > panel.steps() || window.t0 >= window.t1) {
        throw InvalidRangeError("feature window outside panel");
    }
    std::vector<double> out;
    out.reserve(attrs.size() * 3);
    for (std::size_t j : attrs) {
        std::vector<double> vals;
        std::vector<std::size_t> times;
        for (std::size_t t = window.t0; t < window.t1; ++t) {
            if (panel.observed(t, j)) {
                vals.push_back(panel.value(t, j));
                times.push_back(t);
            }
        }
        if (vals.size() < 3) {
            throw InsufficientDataError("attribute " + std::to_string(j) +
                                        " has fewer than 3 observed values");
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double ss = 0.0;
        for (double v : vals) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(vals.size()));
        double ac = 0.0;
        if (sd > 0.0) {
            double num = 0.0;
            std::size_t pairs = 0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                if (times[i + 1] == times[i] + 1) {
                    num += (vals[i] - mean) * (vals[i + 1] - mean);
                    ++pairs;
                }
            }
            if (pairs > 0) ac = (num / static_cast<double>(pairs)) / (sd * sd);
        }
        out.push_back(mean);
        out.push_back(sd);
        out.push_back(ac);
    }
    return out;
}

GmmModel gmm_fit(const std::vector<std::vector<double>>& features, std::size_t k,
                 std::uint64_t seed) {
    if (k < 1) throw TooFewSamplesError("component count must be >= 1");
    const std::size_t n = features.size();
    if (n < k) {
        throw TooFewSamplesError("gmm_fit got " + std::to_string(n) +
                                 " samples for k = " + std::to_string(k));
    }
    const std::size_t d = features.front().size();
    for (const auto& f : features) {
        if (f.size() != d) throw DimensionMismatchError("feature lengths differ");
    }

    GmmModel m;
    m.components = k;
    m.weights.assign(k, 1.0 / static_cast<double>(k));

    // init: distinct seeded samples as means; pooled variance everywhere
    Rng rng(seed);
    for (std::size_t idx : rng.distinct_indices(k, n)) {
        m.means.push_back(features[idx]);
    }
    std::vector<double> global_var(d, 0.0), global_mean(d, 0.0);
    for (const auto& f : features) {
        for (std::size_t c = 0; c < d; ++c) global_mean[c] += f[c];
    }
    for (double& v : global_mean) v /= static_cast<double>(n);
    for (const auto& f : features) {
        for (std::size_t c = 0; c < d; ++c) {
            const double diff = f[c] - global_mean[c];
            global_var[c] += diff * diff;
        }
    }
    for (double& v : global_var) {
        v = std::max(v / static_cast<double>(n), kVarianceFloor);
    }
    m.variances.assign(k, global_var);

    std::vector<std::vector<double>> resp(n, std::vector<double>(k));
    double prev_ll = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < kMaxEmIterations; ++iter) {
        // E-step in log space
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double max_log = -std::numeric_limits<double>::infinity();
            std::vector<double> logp(k);
            for (std::size_t c = 0; c < k; ++c) {
                double lp = std::log(m.weights[c]);
                for (std::size_t a = 0; a < d; ++a) {
                    const double var = m.variances[c][a];
                    const double diff = features[i][a] - m.means[c][a];
                    lp += -0.5 * (std::log(2.0 * std::numbers::pi * var) +
                                  diff * diff / var);
                }
                logp[c] = lp;
                max_log = std::max(max_log, lp);
            }
            double sum = 0.0;
            for (std::size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - max_log);
            const double log_norm = max_log + std::log(sum);
            ll += log_norm;
            for (std::size_t c = 0; c < k; ++c) {
                resp[i][c] = std::exp(logp[c] - log_norm);
            }
        }
        m.ll_curve.push_back(ll);
        m.log_likelihood = ll;
        if (std::abs(ll - prev_ll) < kLlTolerance) break;
        prev_ll = ll;

        // M-step
        for (std::size_t c = 0; c < k; ++c) {
            double nk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i][c];
            if (nk <= 0.0) continue; // abandoned component keeps its params
            std::vector<double> mu(d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t a = 0; a < d; ++a) mu[a] += resp[i][c] * features[i][a];
            }
            for (double& v : mu) v /= nk;
            std::vector<double> var(d, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t a = 0; a < d; ++a) {
                    const double diff = features[i][a] - mu[a];
                    var[a] += resp[i][c] * diff * diff;
                }
            }
            for (double& v : var) v = std::max(v / nk, kVarianceFloor);
            m.weights[c] = nk / static_cast<double>(n);
            m.means[c] = std::move(mu);
            m.variances[c] = std::move(var);
        }
        double wsum = 0.0;
        for (double w : m.weights) wsum += w;
        for (double& w : m.weights) w /= wsum;
    }
    return m;
}

std::vector<double> gmm_responsibilities(const GmmModel& model,
                                         std::span<const double> x) {
    const std::size_t k = model.components, d = x.size();
    std::vector<double> logp(k);
    double max_log = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
        double lp = std::log(model.weights[c]);
        for (std::size_t a = 0; a < d; ++a) {
            const double var = model.variances[c][a];
            const double diff = x[a] - model.means[c][a];
            lp += -0.5 * (std::log(2.0 * std::numbers::pi * var) + diff * diff / var);
        }
        logp[c] = lp;
        max_log = std::max(max_log, lp);
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - max_log);
    const double log_norm = max_log + std::log(sum);
    std::vector<double> out(k);
    for (std::size_t c = 0; c < k; ++c) out[c] = std::exp(logp[c] - log_norm);
    return out;
}

SimilarityRanking gmm_rank(
    std::span<const double> target_features, const GmmModel& model,
    const std::vector<std::pair<std::string, std::vector<double>>>& candidates) {
    const std::vector<double> target_resp =
        gmm_responsibilities(model, target_features);
    const std::size_t target_cluster = static_cast<std::size_t>(
        std::max_element(target_resp.begin(), target_resp.end()) -
        target_resp.begin());

    struct Row {
        std::string id;
        bool same_cluster;
        double distance;
    };
    std::vector<Row> rows;
    rows.reserve(candidates.size());
    for (const auto& [id, feats] : candidates) {
        const std::vector<double> resp = gmm_responsibilities(model, feats);
        const std::size_t cluster = static_cast<std::size_t>(
            std::max_element(resp.begin(), resp.end()) - resp.begin());
        rows.push_back({id, cluster == target_cluster,
                        euclidean(target_features, feats)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.same_cluster != b.same_cluster) return a.same_cluster;
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });
    SimilarityRanking ranking;
    ranking.method = "gmm";
    for (const auto& r : rows) {
        ranking.entries.push_back(
            {r.id, (r.same_cluster ? 1.0 : 0.0) + 1.0 / (1.0 + r.distance)});
    }
    return ranking;
}

double eros_similarity(const Panel& a, const Panel& b, std::span<const double> weights,
                       TimeRange window, std::span<const std::size_t> attrs) {
    if (a.attrs() != b.attrs()) {
        throw SchemaMismatchError("panels have different attribute counts");
    }
    if (weights.size() != attrs.size()) {
        throw DimensionMismatchError("eros weights cover " +
                                     std::to_string(weights.size()) +
                                     " attributes, window has " +
                                     std::to_string(attrs.size()));
    }
    const EigenSym ea = eigh(window_covariance(a, window, attrs));
    const EigenSym eb = eigh(window_covariance(b, window, attrs));
    double score = 0.0;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        double inner = 0.0;
        for (std::size_t r = 0; r < attrs.size(); ++r) {
            inner += ea.vectors(r, i) * eb.vectors(r, i);
        }
        score += weights[i] * std::abs(inner);
    }
    return score;
}

std::vector<double> eros_weights(const Fleet& fleet, TimeRange window,
                                 std::span<const std::size_t> attrs) {
    if (fleet.panels.empty()) throw EmptyDonorSetError("no panels for eros weights");
    std::vector<double> w(attrs.size(), 0.0);
    for (const Panel& p : fleet.panels) {
        const EigenSym e = eigh(window_covariance(p, window, attrs));
        double total = 0.0;
        for (double v : e.values) total += std::max(v, 0.0);
        if (total <= 0.0) {
            throw DegenerateCovarianceError("panel '" + p.id() +
                                            "' has an all-zero spectrum");
        }
        for (std::size_t i = 0; i < attrs.size(); ++i) {
            w[i] += std::max(e.values[i], 0.0) / total;
        }
    }
    double sum = 0.0;
    for (double v : w) sum += v;
    for (double& v : w) v /= sum;
    return w;
}

double manhattan_distance(const Panel& a, const Panel& b, TimeRange window,
                          std::span<const std::size_t> attrs) {
    if (a.attrs() != b.attrs()) {
        throw SchemaMismatchError("panels have different attribute counts");
    }
    if (window.t1 > a.steps() || window.t1 > b.steps()) {
        throw LengthMismatchError("window extends past a panel end");
    }
    double sum = 0.0;
    for (std::size_t t = window.t0; t < window.t1; ++t) {
        for (std::size_t j : attrs) {
            if (!a.observed(t, j) || !b.observed(t, j)) continue;
            sum += std::abs(a.value(t, j) - b.value(t, j));
        }
    }
    return sum;
}

} // namespace cdf
