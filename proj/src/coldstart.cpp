#include "cdf/coldstart.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cdf/errors.hpp"

namespace cdf {

std::string strategy_name(ColdStartStrategy s) {
    switch (s) {
        case ColdStartStrategy::gmm: return "gmm";
        case ColdStartStrategy::gmm_sd: return "gmm_sd";
        case ColdStartStrategy::eros: return "eros";
        case ColdStartStrategy::virtual_avg: return "virtual";
        case ColdStartStrategy::virtual_mn: return "virtual_mn";
    }
    return "gmm";
}

ColdStartStrategy parse_strategy(const std::string& name) {
    if (name == "gmm") return ColdStartStrategy::gmm;
    if (name == "gmm_sd") return ColdStartStrategy::gmm_sd;
    if (name == "eros") return ColdStartStrategy::eros;
    if (name == "virtual") return ColdStartStrategy::virtual_avg;
    if (name == "virtual_mn") return ColdStartStrategy::virtual_mn;
    throw ConfigError("unknown cold-start strategy '" + name + "'");
}

namespace {

// Attributes with enough target history in [0, origin] shared by all donors.
std::vector<std::size_t> comparison_attrs(const Panel& target,
                                          std::span<const Donor> donors,
                                          TimeRange window) {
    std::vector<const Panel*> panels{&target};
    for (const Donor& d : donors) panels.push_back(d.panel);
    return commonly_observed(panels, window);
}

SimilarityRanking eros_rank(const Panel& target, std::span<const Donor> donors,
                            TimeRange window, std::span<const std::size_t> attrs) {
    Fleet all;
    all.panels.push_back(target);
    for (const Donor& d : donors) all.panels.push_back(*d.panel);
    const std::vector<double> weights = eros_weights(all, window, attrs);

    struct Row {
        std::string id;
        double score;
    };
    std::vector<Row> rows;
    for (const Donor& d : donors) {
        rows.push_back({d.panel->id(),
                        eros_similarity(target, *d.panel, weights, window, attrs)});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    SimilarityRanking ranking;
    ranking.method = "eros";
    for (const auto& r : rows) ranking.entries.push_back({r.id, r.score});
    return ranking;
}

SimilarityRanking gmm_based_rank(const Panel& target, std::span<const Donor> donors,
                                 TimeRange window, std::span<const std::size_t> attrs,
                                 const ColdStartConfig& config) {
    // canonical id order keeps the fit independent of donor list order
    std::vector<const Panel*> participants{&target};
    for (const Donor& d : donors) participants.push_back(d.panel);
    std::sort(participants.begin(), participants.end(),
              [](const Panel* a, const Panel* b) { return a->id() < b->id(); });

    std::vector<std::vector<double>> features;
    std::vector<double> target_features;
    std::vector<std::pair<std::string, std::vector<double>>> candidates;
    for (const Panel* p : participants) {
        std::vector<double> f = panel_features(*p, window, attrs);
        if (p == &target) {
            target_features = f;
        } else {
            candidates.emplace_back(p->id(), f);
        }
        features.push_back(std::move(f));
    }
    const std::size_t k = std::min(config.gmm_components, features.size());
    const GmmModel model = gmm_fit(features, k, config.seed);
    SimilarityRanking ranking = gmm_rank(target_features, model, candidates);
    return ranking;
}

std::vector<const Donor*> top_k_donors(const SimilarityRanking& ranking,
                                       std::span<const Donor> donors, std::size_t k) {
    std::map<std::string, const Donor*> by_id;
    for (const Donor& d : donors) by_id[d.panel->id()] = &d;
    std::vector<const Donor*> out;
    for (const auto& entry : ranking.entries) {
        if (out.size() >= k) break;
        out.push_back(by_id.at(entry.id));
    }
    return out;
}

Matrix mean_forecast(const std::vector<CandidateForecast>& candidates) {
    Matrix mean(candidates.front().values.rows(), candidates.front().values.cols());
    for (const auto& c : candidates) {
        for (std::size_t i = 0; i < mean.size(); ++i) {
            mean.data()[i] += c.values.data()[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(candidates.size());
    for (std::size_t i = 0; i < mean.size(); ++i) mean.data()[i] *= inv;
    return mean;
}

} // namespace

SimilarityRanking rank_donors(const Panel& target, std::span<const Donor> donors,
                              std::size_t origin, const ColdStartConfig& config) {
    if (donors.empty()) throw NoEligibleDonorsError("donor list is empty");
    const TimeRange window{0, origin + 1};
    const std::vector<std::size_t> attrs = comparison_attrs(target, donors, window);
    if (attrs.empty()) {
        throw StrategyPreconditionError("no commonly observed attributes in window");
    }
    if (config.strategy == ColdStartStrategy::eros) {
        return eros_rank(target, donors, window, attrs);
    }
    return gmm_based_rank(target, donors, window, attrs, config);
}

Matrix sd_filter_average(const std::vector<CandidateForecast>& candidates) {
    if (candidates.empty()) throw EmptyCandidatesError("no candidate forecasts");
    std::vector<const CandidateForecast*> alive;
    for (const auto& c : candidates) alive.push_back(&c);

    while (alive.size() > 2) {
        const std::size_t cells = alive.front()->values.size();
        std::vector<double> mean(cells, 0.0);
        for (const auto* c : alive) {
            for (std::size_t i = 0; i < cells; ++i) mean[i] += c->values.data()[i];
        }
        for (double& m : mean) m /= static_cast<double>(alive.size());

        std::vector<double> dist(alive.size(), 0.0);
        for (std::size_t a = 0; a < alive.size(); ++a) {
            double s = 0.0;
            for (std::size_t i = 0; i < cells; ++i) {
                const double d = alive[a]->values.data()[i] - mean[i];
                s += d * d;
            }
            dist[a] = std::sqrt(s);
        }
        double dmean = 0.0;
        for (double d : dist) dmean += d;
        dmean /= static_cast<double>(dist.size());
        double dvar = 0.0;
        for (double d : dist) dvar += (d - dmean) * (d - dmean);
        const double dsd = std::sqrt(dvar / static_cast<double>(dist.size()));
        const double cutoff = dmean + dsd;

        std::vector<const CandidateForecast*> kept;
        for (std::size_t a = 0; a < alive.size(); ++a) {
            if (dist[a] <= cutoff) kept.push_back(alive[a]);
        }
        if (kept.size() == alive.size() || kept.size() < 2) {
            if (kept.size() >= 2) alive = std::move(kept);
            break;
        }
        alive = std::move(kept);
    }

    std::vector<CandidateForecast> survivors;
    for (const auto* c : alive) survivors.push_back(*c);
    return mean_forecast(survivors);
}

Panel build_virtual_panel(std::span<const Panel* const> donors,
                          VirtualWeighting weighting, const Panel* target,
                          TimeRange window, std::span<const std::size_t> attrs) {
    if (donors.empty()) throw EmptyDonorSetError("no donor panels");
    const Panel& first = *donors.front();
    for (const Panel* p : donors) {
        if (!(p->schema() == first.schema())) {
            throw SchemaMismatchError("donor schemas differ");
        }
        if (p->steps() != first.steps()) {
            throw LengthMismatchError("donor lengths differ");
        }
    }

    std::vector<double> weights(donors.size(),
                                1.0 / static_cast<double>(donors.size()));
    if (weighting == VirtualWeighting::manhattan) {
        if (!target) {
            throw StrategyPreconditionError(
                "manhattan weighting needs the target panel");
        }
        std::vector<double> dist(donors.size());
        bool any_zero = false;
        for (std::size_t c = 0; c < donors.size(); ++c) {
            dist[c] = manhattan_distance(*donors[c], *target, window, attrs);
            any_zero = any_zero || dist[c] == 0.0;
        }
        if (any_zero) {
            std::size_t zeros = 0;
            for (double d : dist) zeros += d == 0.0 ? 1 : 0;
            for (std::size_t c = 0; c < donors.size(); ++c) {
                weights[c] = dist[c] == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
            }
        } else {
            double total = 0.0;
            for (double d : dist) total += 1.0 / d;
            for (std::size_t c = 0; c < donors.size(); ++c) {
                weights[c] = (1.0 / dist[c]) / total;
            }
        }
    }

    const std::size_t T = first.steps(), A = first.attrs();
    Matrix values(T, A);
    std::vector<std::uint8_t> observed(T * A, 0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < A; ++j) {
            bool all = true;
            double v = 0.0;
            for (std::size_t c = 0; c < donors.size(); ++c) {
                if (!donors[c]->observed(t, j)) {
                    all = false;
                    break;
                }
                v += weights[c] * donors[c]->value(t, j);
            }
            if (all) {
                values(t, j) = v;
                observed[t * A + j] = 1;
            }
        }
    }
    std::string id = "virtual";
    if (target) id += "_" + target->id();
    return Panel(std::move(id), first.schema(), std::move(values), std::move(observed));
}

std::vector<CandidateForecast> donor_forecasts(const Panel& target,
                                               std::span<const Donor> donors,
                                               std::size_t origin,
                                               const ColdStartConfig& config) {
    (void)config;
    std::vector<CandidateForecast> out;
    for (const Donor& d : donors) {
        ForecastResult r = predict_filled(*d.bundle, target, origin);
        out.push_back({d.panel->id(), std::move(r.values)});
    }
    return out;
}

ForecastResult coldstart_forecast(const Panel& target, std::span<const Donor> donors,
                                  std::size_t origin, const ColdStartConfig& config) {
    if (config.k < 1) throw ConfigError("k must be >= 1");
    if (config.strategy == ColdStartStrategy::virtual_avg ||
        config.strategy == ColdStartStrategy::virtual_mn) {
        return virtual_strategy_forecast(target, donors, origin, config);
    }
    const SimilarityRanking ranking = rank_donors(target, donors, origin, config);
    const std::vector<const Donor*> top =
        top_k_donors(ranking, donors, std::min(config.k, ranking.entries.size()));

    std::vector<CandidateForecast> candidates;
    for (const Donor* d : top) {
        ForecastResult r = predict_filled(*d->bundle, target, origin);
        candidates.push_back({d->panel->id(), std::move(r.values)});
    }
    Matrix combined = config.strategy == ColdStartStrategy::gmm_sd
                          ? sd_filter_average(candidates)
                          : mean_forecast(candidates);

    ForecastResult result;
    result.panel_id = target.id();
    result.method = strategy_name(config.strategy);
    result.origin = origin;
    for (std::size_t j : target.schema().forecast_indices()) {
        result.attr_names.push_back(target.schema().names[j]);
    }
    result.values = std::move(combined);
    return result;
}

ForecastResult virtual_strategy_forecast(const Panel& target,
                                         std::span<const Donor> donors,
                                         std::size_t origin,
                                         const ColdStartConfig& config) {
    ColdStartConfig rank_config = config;
    rank_config.strategy = ColdStartStrategy::gmm; // virtual strategies rank by GMM
    const SimilarityRanking ranking = rank_donors(target, donors, origin, rank_config);
    const std::vector<const Donor*> top =
        top_k_donors(ranking, donors, std::min(config.k, ranking.entries.size()));

    std::vector<const Panel*> panels;
    for (const Donor* d : top) panels.push_back(d->panel);

    const TimeRange window{0, origin + 1};
    const std::vector<std::size_t> attrs = comparison_attrs(target, donors, window);
    const Panel virtual_panel = build_virtual_panel(
        panels,
        config.strategy == ColdStartStrategy::virtual_mn ? VirtualWeighting::manhattan
                                                         : VirtualWeighting::uniform,
        &target, window, attrs);

    auto [bundle, report] = train_bundle(virtual_panel, config.model, config.pipeline,
                                         config.discovery, config.split);
    ForecastResult result = predict_filled(bundle, target, origin);
    result.method = strategy_name(config.strategy);
    result.panel_id = target.id();
    return result;
}

} // namespace cdf
