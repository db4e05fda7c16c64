#include "cdf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"
#include "cdf/rng.hpp"

namespace cdf {

namespace {

constexpr double kMapeEpsilon = 1e-8;

// seed streams
constexpr std::uint64_t kDonorStream = 0xd0;
constexpr std::uint64_t kTargetStream = 0x7a;
constexpr std::uint64_t kRankStream = 0x99;

struct ErrorAccumulator {
    std::vector<double> pred;
    std::vector<double> actual;

    void add(double p, double a) {
        pred.push_back(p);
        actual.push_back(a);
    }
    MetricReport report() const {
        Matrix p(1, pred.size()), a(1, actual.size());
        std::copy(pred.begin(), pred.end(), p.data());
        std::copy(actual.begin(), actual.end(), a.data());
        return metrics(p, a);
    }
};

Panel scoring_reference(const Panel& panel, const PipelineConfig& pipe) {
    return pipe.smooth ? smooth_panel(panel, pipe.smooth_window) : panel;
}

} // namespace

MetricReport metrics(const Matrix& pred, const Matrix& actual) {
    if (pred.rows() != actual.rows() || pred.cols() != actual.cols()) {
        throw DimensionMismatchError("metric shapes differ");
    }
    if (pred.size() == 0) throw DimensionMismatchError("empty metric input");
    MetricReport r;
    double se = 0.0, ae = 0.0, pe = 0.0;
    std::size_t mape_n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred.data()[i], a = actual.data()[i];
        if (!std::isfinite(p) || !std::isfinite(a)) {
            throw DimensionMismatchError("non-finite metric input");
        }
        const double d = p - a;
        se += d * d;
        ae += std::abs(d);
        if (std::abs(a) >= kMapeEpsilon) {
            pe += std::abs(d) / std::abs(a);
            ++mape_n;
        }
    }
    const double n = static_cast<double>(pred.size());
    r.mse = se / n;
    r.mae = ae / n;
    r.mape_excluded = pred.size() - mape_n;
    if (mape_n > 0) r.mape = pe / static_cast<double>(mape_n);
    return r;
}

std::string method_name(Method m) {
    switch (m) {
        case Method::lstm: return "lstm";
        case Method::lstm_gnn: return "lstm_gnn";
        case Method::cdf: return "cdf";
    }
    return "cdf";
}

Method parse_method(const std::string& name) {
    if (name == "lstm") return Method::lstm;
    if (name == "lstm_gnn") return Method::lstm_gnn;
    if (name == "cdf") return Method::cdf;
    throw ConfigError("unknown method '" + name + "'");
}

AdjacencyMode method_mode(Method m) {
    switch (m) {
        case Method::lstm: return AdjacencyMode::none;
        case Method::lstm_gnn: return AdjacencyMode::all_ones;
        case Method::cdf: return AdjacencyMode::causal;
    }
    return AdjacencyMode::causal;
}

std::string cs_method_name(CsMethod m) {
    switch (m) {
        case CsMethod::lstm: return "lstm";
        case CsMethod::lstm_gnn: return "lstm_gnn";
        case CsMethod::cdf: return "cdf";
        case CsMethod::gmm: return "gmm";
        case CsMethod::gmm_sd: return "gmm_sd";
        case CsMethod::eros: return "eros";
        case CsMethod::virtual_avg: return "virtual";
        case CsMethod::virtual_mn: return "virtual_mn";
    }
    return "cdf";
}

CsMethod parse_cs_method(const std::string& name) {
    if (name == "lstm") return CsMethod::lstm;
    if (name == "lstm_gnn") return CsMethod::lstm_gnn;
    if (name == "cdf") return CsMethod::cdf;
    if (name == "gmm") return CsMethod::gmm;
    if (name == "gmm_sd") return CsMethod::gmm_sd;
    if (name == "eros") return CsMethod::eros;
    if (name == "virtual") return CsMethod::virtual_avg;
    if (name == "virtual_mn") return CsMethod::virtual_mn;
    throw ConfigError("unknown cold-start strategy '" + name + "'");
}

std::vector<double> ExperimentResult::collect(const std::string& method,
                                              const std::string& metric) const {
    std::vector<double> out;
    for (const auto& row : rows) {
        if (row.method != method) continue;
        if (metric == "mse") {
            out.push_back(row.total_traffic.mse);
        } else if (metric == "mae") {
            out.push_back(row.total_traffic.mae);
        } else if (metric == "mape" && row.total_traffic.mape) {
            out.push_back(*row.total_traffic.mape);
        }
    }
    return out;
}

namespace {

// Scores a trained bundle over every valid test-split origin; returns the
// headline (total traffic) report plus per-attribute reports.
ResultRow score_bundle(const TrainedBundle& bundle, const Panel& panel,
                       const Panel& reference, const EvalConfig& config,
                       const std::string& method) {
    const std::size_t T = panel.steps();
    const std::size_t H = bundle.config.horizon;
    const std::size_t test_start = static_cast<std::size_t>(std::floor(
        (config.split.train_fraction + config.split.val_fraction) *
        static_cast<double>(T)));
    const std::vector<std::size_t> o2 = bundle.schema.forecast_indices();
    const auto total_idx = bundle.schema.total_traffic_index();

    std::vector<ErrorAccumulator> acc(o2.size());
    std::size_t origin_lo = test_start > 0 ? test_start - 1 : 0;
    bool scored = false;
    for (std::size_t t = origin_lo; t + H < T; ++t) {
        ForecastResult fr = predict(bundle, panel, t);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < o2.size(); ++c) {
                acc[c].add(fr.values(h, c), reference.value(t + 1 + h, o2[c]));
            }
        }
        scored = true;
    }
    if (!scored) {
        throw PanelTooShortError("test split has no valid forecast origin");
    }

    ResultRow row;
    row.seed = config.seed;
    row.center = panel.id();
    row.method = method;
    for (std::size_t c = 0; c < o2.size(); ++c) {
        row.per_attr.emplace_back(bundle.schema.names[o2[c]], acc[c].report());
        if (total_idx && o2[c] == *total_idx) row.total_traffic = acc[c].report();
    }
    if (!total_idx && !acc.empty()) row.total_traffic = acc.front().report();
    return row;
}

} // namespace

ExperimentResult run_forecast_experiment(const Fleet& fleet,
                                         const std::vector<Method>& methods,
                                         const EvalConfig& config) {
    fleet.validate();
    ExperimentResult result;
    for (std::size_t c = 0; c < fleet.panels.size(); ++c) {
        const Panel& panel = fleet.panels[c];
        const Panel reference = scoring_reference(panel, config.pipeline);
        for (const Method m : methods) {
            ModelConfig mc = config.model;
            mc.adjacency_mode = method_mode(m);
            // one seed per center so method comparisons are paired
            mc.seed = derive_seed(config.seed, kTargetStream + c);
            auto [bundle, report] =
                train_bundle(panel, mc, config.pipeline, config.discovery, config.split);
            result.rows.push_back(
                score_bundle(bundle, panel, reference, config, method_name(m)));
        }
    }
    return result;
}

namespace {

// Scores one cold-start forecast (H rows of total traffic from the cut).
MetricReport score_coldstart(const ForecastResult& forecast, const Panel& reference,
                             const AttributeSchema& schema, std::size_t origin) {
    const auto total_idx = schema.total_traffic_index();
    if (!total_idx) throw SchemaMismatchError("schema lacks a total-traffic attribute");
    const std::vector<std::size_t> o2 = schema.forecast_indices();
    std::size_t total_col = 0;
    for (std::size_t c = 0; c < o2.size(); ++c) {
        if (o2[c] == *total_idx) total_col = c;
    }
    const std::size_t H = forecast.values.rows();
    Matrix pred(H, 1), actual(H, 1);
    for (std::size_t h = 0; h < H; ++h) {
        pred(h, 0) = forecast.values(h, total_col);
        actual(h, 0) = reference.value(origin + 1 + h, *total_idx);
    }
    return metrics(pred, actual);
}

} // namespace

ExperimentResult run_coldstart_experiment(const Fleet& fleet,
                                          const std::vector<CsMethod>& strategies,
                                          const EvalConfig& config) {
    fleet.validate();
    if (fleet.panels.size() < 3) {
        throw InvalidSpecError("cold-start experiment needs >= 3 centers");
    }
    const std::size_t N = fleet.panels.size();
    const std::size_t T = fleet.panels.front().steps();
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(config.cut_fraction * static_cast<double>(T)));

    // donor models: one per center, trained once on the unmasked panel
    std::vector<TrainedBundle> donor_bundles;
    donor_bundles.reserve(N);
    for (std::size_t c = 0; c < N; ++c) {
        ModelConfig mc = config.model;
        mc.adjacency_mode = AdjacencyMode::causal;
        mc.seed = derive_seed(config.seed, kDonorStream + c);
        auto [bundle, report] = train_bundle(fleet.panels[c], mc, config.pipeline,
                                             config.discovery, config.split);
        donor_bundles.push_back(std::move(bundle));
    }

    ExperimentResult result;
    for (std::size_t target = 0; target < N; ++target) {
        const ColdStartScenario scenario =
            make_coldstart_scenario(fleet, target, config.masked_services, cut);
        const Panel& masked = scenario.fleet.panels[target];
        const Panel reference =
            scoring_reference(fleet.panels[target], config.pipeline);

        std::vector<Donor> donors;
        for (std::size_t c = 0; c < N; ++c) {
            if (c == target) continue;
            donors.push_back({&fleet.panels[c], &donor_bundles[c]});
        }

        for (const CsMethod s : strategies) {
            ForecastResult forecast;
            if (s == CsMethod::lstm || s == CsMethod::lstm_gnn || s == CsMethod::cdf) {
                ModelConfig mc = config.model;
                mc.adjacency_mode =
                    method_mode(s == CsMethod::lstm
                                    ? Method::lstm
                                    : (s == CsMethod::lstm_gnn ? Method::lstm_gnn
                                                               : Method::cdf));
                mc.seed = derive_seed(config.seed,
                                      kTargetStream + 64 + 8 * target +
                                          static_cast<std::size_t>(s));
                auto [bundle, report] = train_bundle(masked, mc, config.pipeline,
                                                     config.discovery, config.split);
                forecast = predict_filled(bundle, masked, cut);
                forecast.method = cs_method_name(s);
            } else {
                ColdStartConfig cs;
                cs.strategy = s == CsMethod::gmm        ? ColdStartStrategy::gmm
                              : s == CsMethod::gmm_sd   ? ColdStartStrategy::gmm_sd
                              : s == CsMethod::eros     ? ColdStartStrategy::eros
                              : s == CsMethod::virtual_avg
                                  ? ColdStartStrategy::virtual_avg
                                  : ColdStartStrategy::virtual_mn;
                cs.k = config.k;
                cs.gmm_components = config.gmm_components;
                cs.seed = derive_seed(config.seed, kRankStream + target);
                cs.model = config.model;
                cs.model.seed = derive_seed(config.seed, kRankStream + 256 + target);
                cs.pipeline = config.pipeline;
                cs.discovery = config.discovery;
                cs.split = config.split;
                forecast = coldstart_forecast(masked, donors, cut, cs);
            }
            ResultRow row;
            row.seed = config.seed;
            row.center = masked.id();
            row.method = cs_method_name(s);
            row.total_traffic =
                score_coldstart(forecast, reference, masked.schema(), cut);
            result.rows.push_back(std::move(row));
        }
    }
    return result;
}

SweepTable sweep_k(const Fleet& fleet, ColdStartStrategy strategy,
                   const std::vector<std::size_t>& values, const EvalConfig& config) {
    fleet.validate();
    if (values.empty()) throw InvalidRangeError("sweep range is empty");
    if (strategy != ColdStartStrategy::eros && strategy != ColdStartStrategy::gmm) {
        throw ConfigError("sweep supports the eros and gmm strategies");
    }
    const std::size_t N = fleet.panels.size();
    const std::size_t T = fleet.panels.front().steps();
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(config.cut_fraction * static_cast<double>(T)));

    std::vector<TrainedBundle> donor_bundles;
    for (std::size_t c = 0; c < N; ++c) {
        ModelConfig mc = config.model;
        mc.adjacency_mode = AdjacencyMode::causal;
        mc.seed = derive_seed(config.seed, kDonorStream + c);
        auto [bundle, report] = train_bundle(fleet.panels[c], mc, config.pipeline,
                                             config.discovery, config.split);
        donor_bundles.push_back(std::move(bundle));
    }

    // per-target donor forecasts and rankings are reused across the sweep
    struct TargetContext {
        Panel masked;
        Panel reference;
        std::vector<Donor> donors;
        std::vector<CandidateForecast> forecasts; // donor order
    };
    std::vector<TargetContext> targets;
    for (std::size_t target = 0; target < N; ++target) {
        const ColdStartScenario scenario =
            make_coldstart_scenario(fleet, target, config.masked_services, cut);
        TargetContext ctx{scenario.fleet.panels[target],
                          scoring_reference(fleet.panels[target], config.pipeline),
                          {},
                          {}};
        targets.push_back(std::move(ctx));
        TargetContext& back = targets.back();
        for (std::size_t c = 0; c < N; ++c) {
            if (c == target) continue;
            back.donors.push_back({&fleet.panels[c], &donor_bundles[c]});
        }
        ColdStartConfig cs;
        cs.seed = derive_seed(config.seed, kRankStream + target);
        back.forecasts = donor_forecasts(back.masked, back.donors, cut, cs);
    }

    SweepTable table;
    table.strategy = strategy_name(strategy);
    for (const std::size_t value : values) {
        std::vector<double> mses, maes, mapes;
        for (std::size_t target = 0; target < N; ++target) {
            TargetContext& ctx = targets[target];
            ColdStartConfig cs;
            cs.strategy = strategy;
            cs.k = strategy == ColdStartStrategy::eros ? value : config.k;
            cs.gmm_components =
                strategy == ColdStartStrategy::gmm ? value : config.gmm_components;
            cs.seed = derive_seed(config.seed, kRankStream + target);

            const SimilarityRanking ranking =
                rank_donors(ctx.masked, ctx.donors, cut, cs);
            const std::size_t use_k = std::min(cs.k, ranking.entries.size());
            std::vector<CandidateForecast> chosen;
            for (std::size_t i = 0; i < use_k; ++i) {
                for (std::size_t c = 0; c < ctx.donors.size(); ++c) {
                    if (ctx.forecasts[c].source_id == ranking.entries[i].id) {
                        chosen.push_back(ctx.forecasts[c]);
                        break;
                    }
                }
            }
            Matrix combined(chosen.front().values.rows(), chosen.front().values.cols());
            for (const auto& c : chosen) {
                for (std::size_t i = 0; i < combined.size(); ++i) {
                    combined.data()[i] += c.values.data()[i];
                }
            }
            for (std::size_t i = 0; i < combined.size(); ++i) {
                combined.data()[i] /= static_cast<double>(chosen.size());
            }
            ForecastResult fr;
            fr.values = std::move(combined);
            const MetricReport rep =
                score_coldstart(fr, ctx.reference, ctx.masked.schema(), cut);
            mses.push_back(rep.mse);
            maes.push_back(rep.mae);
            if (rep.mape) mapes.push_back(*rep.mape);
        }
        SweepRow row;
        row.value = value;
        row.mse_median = median(mses);
        row.mae_median = median(maes);
        if (!mapes.empty()) row.mape_median = median(mapes);
        table.rows.push_back(row);
    }
    return table;
}

void write_result_csv(const ExperimentResult& result,
                      const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << "seed,center,method,metric,value\n";
    for (const auto& row : result.rows) {
        const auto emit = [&](const std::string& metric, double v) {
            f << row.seed << ',' << row.center << ',' << row.method << ',' << metric
              << ',' << KvFile::format_double(v) << '\n';
        };
        emit("mse", row.total_traffic.mse);
        emit("mae", row.total_traffic.mae);
        if (row.total_traffic.mape) {
            emit("mape", *row.total_traffic.mape);
        } else {
            f << row.seed << ',' << row.center << ',' << row.method << ",mape,na\n";
        }
        for (const auto& [attr, rep] : row.per_attr) {
            emit("mse." + attr, rep.mse);
            emit("mae." + attr, rep.mae);
        }
    }
    if (!f) throw IoError("write failed for " + path.string());
}

void write_result_summary(const ExperimentResult& result,
                          const std::filesystem::path& path) {
    std::vector<std::string> methods;
    for (const auto& row : result.rows) {
        if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) {
            methods.push_back(row.method);
        }
    }
    KvFile kv;
    for (const auto& m : methods) {
        std::vector<double> mses = {};
        std::vector<double> maes = {};
        for (const auto& row : result.rows) {
            if (row.method != m) continue;
            mses.push_back(row.total_traffic.mse);
            maes.push_back(row.total_traffic.mae);
        }
        kv.set_uint(m, "rows", mses.size());
        kv.set_double(m, "mse_median", median(mses));
        kv.set_double(m, "mae_median", median(maes));
    }
    kv.write(path);
}

void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path.string());
    f << "k,mse_median,mae_median,mape_median\n";
    for (const auto& row : table.rows) {
        f << row.value << ',' << KvFile::format_double(row.mse_median) << ','
          << KvFile::format_double(row.mae_median) << ',';
        if (row.mape_median) {
            f << KvFile::format_double(*row.mape_median);
        } else {
            f << "na";
        }
        f << '\n';
    }
    if (!f) throw IoError("write failed for " + path.string());
}

double median(std::vector<double> values) {
    if (values.empty()) throw InvalidRangeError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace cdf
