// cdf: causal demand forecasting for data-center fleets, with cold-start
// support. Subcommands: synth | discover | train | forecast | coldstart |
// experiment | sweep. Every command writes a run manifest next to its
// artifacts; outputs are byte-identical given the same config and seed.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "cdf/coldstart.hpp"
#include "cdf/errors.hpp"
#include "cdf/eval.hpp"
#include "cdf/kvfile.hpp"
#include "cdf/model.hpp"
#include "cdf/panel.hpp"
#include "cdf/rng.hpp"
#include "cdf/synth.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct RunConfig {
    std::string data_dir;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    unsigned jobs = 1;

    cdf::ModelConfig model;
    cdf::PipelineConfig pipeline;
    cdf::DiscoveryConfig discovery;
    cdf::ChronoSplit split;
    cdf::FleetSpec fleet;

    std::string adjacency_mode = "causal";
    std::string strategy = "gmm_sd";
    std::size_t k = 5;
    std::size_t gmm_components = 7;
    std::size_t masked_services = 3;
    double cut_fraction = 0.75;

    std::size_t experiment_seeds = 1;
    std::string methods = "lstm,lstm_gnn,cdf";
    std::string strategies = "cdf,eros,gmm,gmm_sd,virtual,virtual_mn";

    cdf::EvalConfig eval() const {
        cdf::EvalConfig e;
        e.model = model;
        e.model.adjacency_mode = cdf::parse_adjacency_mode(adjacency_mode);
        e.pipeline = pipeline;
        e.discovery = discovery;
        e.split = split;
        e.seed = seed;
        e.masked_services = masked_services;
        e.cut_fraction = cut_fraction;
        e.k = k;
        e.gmm_components = gmm_components;
        return e;
    }
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t pos = s.find(',', start);
        if (pos == std::string::npos) {
            if (start < s.size()) out.push_back(s.substr(start));
            break;
        }
        if (pos > start) out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

// The config file uses the same sectioned key-value format as every other
// artifact; any CLI flag overrides its config key.
void apply_config_file(RunConfig& cfg, const fs::path& path) {
    const cdf::KvFile kv = cdf::KvFile::read(path);
    const auto get_u = [&](const char* sec, const char* key, auto& field) {
        if (kv.has(sec, key)) field = static_cast<std::decay_t<decltype(field)>>(
            kv.get_uint(sec, key));
    };
    const auto get_d = [&](const char* sec, const char* key, double& field) {
        if (kv.has(sec, key)) field = kv.get_double(sec, key);
    };
    const auto get_s = [&](const char* sec, const char* key, std::string& field) {
        if (kv.has(sec, key)) field = kv.get(sec, key);
    };
    const auto get_b = [&](const char* sec, const char* key, bool& field) {
        if (kv.has(sec, key)) field = kv.get_uint(sec, key) != 0;
    };

    get_s("paths", "data_dir", cfg.data_dir);
    get_s("paths", "out_dir", cfg.out_dir);
    get_u("run", "seed", cfg.seed);
    get_u("run", "jobs", cfg.jobs);

    get_u("model", "lookback", cfg.model.lookback);
    get_u("model", "horizon", cfg.model.horizon);
    get_u("model", "graph_dim", cfg.model.graph_dim);
    get_u("model", "lstm_dim", cfg.model.lstm_dim);
    get_u("model", "lstm_layers", cfg.model.lstm_layers);
    get_d("model", "learning_rate", cfg.model.learning_rate);
    get_u("model", "epochs", cfg.model.epochs);
    get_u("model", "batch_size", cfg.model.batch_size);
    get_s("model", "adjacency_mode", cfg.adjacency_mode);

    get_b("pipeline", "smooth", cfg.pipeline.smooth);
    get_u("pipeline", "smooth_window", cfg.pipeline.smooth_window);
    get_b("pipeline", "difference", cfg.pipeline.difference);
    get_b("pipeline", "zscore", cfg.pipeline.zscore);

    get_u("causal", "lag_order", cfg.discovery.lag_order);
    get_d("causal", "edge_threshold", cfg.discovery.edge_threshold);

    get_s("coldstart", "strategy", cfg.strategy);
    get_u("coldstart", "k", cfg.k);
    get_u("coldstart", "gmm_components", cfg.gmm_components);
    get_u("coldstart", "masked_services", cfg.masked_services);
    get_d("coldstart", "cut_fraction", cfg.cut_fraction);

    get_u("fleet", "centers", cfg.fleet.centers);
    get_u("fleet", "services", cfg.fleet.services);
    get_u("fleet", "steps", cfg.fleet.steps);
    get_d("fleet", "usage_noise", cfg.fleet.usage_noise);
    get_d("fleet", "traffic_noise", cfg.fleet.traffic_noise);
    get_d("fleet", "total_noise", cfg.fleet.total_noise);
    get_d("fleet", "base_min", cfg.fleet.base_min);
    get_d("fleet", "base_max", cfg.fleet.base_max);
    get_d("fleet", "trend_min", cfg.fleet.trend_min);
    get_d("fleet", "trend_max", cfg.fleet.trend_max);
    get_d("fleet", "seasonal_amp", cfg.fleet.seasonal_amp);
    get_d("fleet", "gain_min", cfg.fleet.gain_min);
    get_d("fleet", "gain_max", cfg.fleet.gain_max);
    get_d("fleet", "persistence", cfg.fleet.persistence);
    get_d("fleet", "heterogeneity", cfg.fleet.heterogeneity);

    get_u("experiment", "seeds", cfg.experiment_seeds);
    get_s("experiment", "methods", cfg.methods);
    get_s("experiment", "strategies", cfg.strategies);
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const fs::path& out_dir) {
    cdf::KvFile kv;
    kv.set("run", "command", command);
    kv.set("run", "version", kVersion);
    kv.set_uint("run", "seed", cfg.seed);
    kv.set_uint("run", "jobs", cfg.jobs);
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    kv.set_uint("run", "timestamp_s",
                static_cast<std::uint64_t>(
                    std::chrono::duration_cast<std::chrono::seconds>(now).count()));
    kv.set("paths", "data_dir", cfg.data_dir);
    kv.set("paths", "out_dir", cfg.out_dir);
    kv.set_uint("model", "lookback", cfg.model.lookback);
    kv.set_uint("model", "horizon", cfg.model.horizon);
    kv.set_uint("model", "graph_dim", cfg.model.graph_dim);
    kv.set_uint("model", "lstm_dim", cfg.model.lstm_dim);
    kv.set_uint("model", "lstm_layers", cfg.model.lstm_layers);
    kv.set_double("model", "learning_rate", cfg.model.learning_rate);
    kv.set_uint("model", "epochs", cfg.model.epochs);
    kv.set_uint("model", "batch_size", cfg.model.batch_size);
    kv.set("model", "adjacency_mode", cfg.adjacency_mode);
    kv.set_uint("pipeline", "smooth", cfg.pipeline.smooth ? 1 : 0);
    kv.set_uint("pipeline", "smooth_window", cfg.pipeline.smooth_window);
    kv.set_uint("pipeline", "difference", cfg.pipeline.difference ? 1 : 0);
    kv.set_uint("pipeline", "zscore", cfg.pipeline.zscore ? 1 : 0);
    kv.set_uint("causal", "lag_order", cfg.discovery.lag_order);
    kv.set_double("causal", "edge_threshold", cfg.discovery.edge_threshold);
    kv.set("coldstart", "strategy", cfg.strategy);
    kv.set_uint("coldstart", "k", cfg.k);
    kv.set_uint("coldstart", "gmm_components", cfg.gmm_components);
    kv.set_uint("coldstart", "masked_services", cfg.masked_services);
    kv.set_double("coldstart", "cut_fraction", cfg.cut_fraction);
    kv.set_uint("fleet", "centers", cfg.fleet.centers);
    kv.set_uint("fleet", "services", cfg.fleet.services);
    kv.set_uint("fleet", "steps", cfg.fleet.steps);
    kv.set_uint("experiment", "seeds", cfg.experiment_seeds);
    kv.set("experiment", "methods", cfg.methods);
    kv.set("experiment", "strategies", cfg.strategies);
    kv.write(out_dir / "manifest.txt");
}

void write_forecast_csv(const cdf::ForecastResult& forecast, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw cdf::IoError("cannot write " + path.string());
    f << "step";
    for (const auto& name : forecast.attr_names) f << ',' << name;
    f << '\n';
    for (std::size_t h = 0; h < forecast.values.rows(); ++h) {
        f << forecast.origin + 1 + h;
        for (std::size_t c = 0; c < forecast.values.cols(); ++c) {
            f << ',' << cdf::KvFile::format_double(forecast.values(h, c));
        }
        f << '\n';
    }
}

cdf::Fleet require_fleet(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) {
        throw cdf::ConfigError("--data is required for this command");
    }
    if (!fs::exists(fs::path(cfg.data_dir) / "schema.txt")) {
        throw cdf::IoError("no fleet found under '" + cfg.data_dir +
                           "' (missing schema.txt)");
    }
    return cdf::load_fleet(cfg.data_dir);
}

int cmd_synth(const RunConfig& cfg) {
    auto [fleet, truth] = cdf::generate_fleet(cfg.fleet);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    cdf::save_fleet(fleet, out);
    std::vector<std::string> ids;
    for (const auto& p : fleet.panels) ids.push_back(p.id());
    cdf::save_ground_truth(truth, ids, fleet.panels.front().schema().names,
                           out / "ground_truth.txt");
    write_manifest(cfg, "synth", out);
    std::cout << "wrote " << fleet.panels.size() << " panels to " << out.string()
              << "\n";
    return 0;
}

int cmd_discover(const RunConfig& cfg, const std::string& center) {
    const cdf::Fleet fleet = require_fleet(cfg);
    const cdf::Panel& panel =
        center.empty() ? fleet.panels.front() : fleet.by_id(center);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    // discovery operates on the preprocessed training split
    cdf::Panel base = panel;
    if (cfg.pipeline.smooth) base = cdf::smooth_panel(base, cfg.pipeline.smooth_window);
    cdf::PipelineConfig pipe_rest = cfg.pipeline;
    pipe_rest.smooth = false;
    auto [processed, state] = cdf::preprocess_pipeline(base, pipe_rest);
    const std::size_t train_end = static_cast<std::size_t>(
        cfg.split.train_fraction * static_cast<double>(processed.steps()));
    const cdf::Panel train_slice = cdf::slice(processed, 0, std::max<std::size_t>(train_end, 2));
    const cdf::CausalGraph graph = cdf::discover(train_slice, cfg.discovery.lag_order,
                                                 cfg.discovery.edge_threshold);
    cdf::save_graph(graph, panel.schema().names, out / (panel.id() + "_graph.txt"));
    write_manifest(cfg, "discover", out);
    std::cout << "graph for " << panel.id() << " -> "
              << (out / (panel.id() + "_graph.txt")).string() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& center,
              const std::string& graph_file) {
    const cdf::Fleet fleet = require_fleet(cfg);
    const cdf::Panel& panel =
        center.empty() ? fleet.panels.front() : fleet.by_id(center);
    cdf::ModelConfig mc = cfg.model;
    mc.adjacency_mode = cdf::parse_adjacency_mode(cfg.adjacency_mode);
    mc.seed = cfg.seed;
    cdf::DiscoveryConfig disc = cfg.discovery;
    if (!graph_file.empty()) {
        disc.supplied_propagation = cdf::load_graph(graph_file).propagation;
    }
    auto [bundle, report] =
        cdf::train_bundle(panel, mc, cfg.pipeline, disc, cfg.split);
    const fs::path out(cfg.out_dir);
    cdf::save_bundle(bundle, out);
    write_manifest(cfg, "train", out);
    if (!report.train_loss.empty()) {
        std::cout << "final train loss " << report.train_loss.back()
                  << ", val loss " << report.val_loss.back() << "\n";
    }
    std::cout << "bundle written to " << out.string() << "\n";
    return 0;
}

int cmd_forecast(const RunConfig& cfg, const std::string& bundle_dir,
                 const std::string& center, long long origin_flag) {
    if (!fs::exists(fs::path(bundle_dir) / "model.txt")) {
        throw cdf::IoError("model bundle not found at '" + bundle_dir + "'");
    }
    const cdf::TrainedBundle bundle = cdf::load_bundle(bundle_dir);
    const cdf::Fleet fleet = require_fleet(cfg);
    const cdf::Panel& panel =
        center.empty() ? fleet.by_id(bundle.panel_id) : fleet.by_id(center);
    const std::size_t origin =
        origin_flag >= 0 ? static_cast<std::size_t>(origin_flag)
                         : panel.steps() - 1 - bundle.config.horizon;
    const cdf::ForecastResult forecast = cdf::predict(bundle, panel, origin);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_forecast_csv(forecast, out / "forecast.csv");
    write_manifest(cfg, "forecast", out);
    std::cout << "forecast for " << panel.id() << " at origin " << origin << " -> "
              << (out / "forecast.csv").string() << "\n";
    return 0;
}

int cmd_coldstart(const RunConfig& cfg, const std::string& target,
                  long long cut_flag, bool dump_candidates) {
    const cdf::Fleet fleet = require_fleet(cfg);
    const std::size_t target_index =
        target.empty() ? 0 : fleet.index_of(target);
    const std::size_t T = fleet.panels[target_index].steps();
    const std::size_t cut =
        cut_flag >= 0 ? static_cast<std::size_t>(cut_flag)
                      : static_cast<std::size_t>(cfg.cut_fraction *
                                                 static_cast<double>(T));
    const cdf::ColdStartScenario scenario =
        cdf::make_coldstart_scenario(fleet, target_index, cfg.masked_services, cut);
    const cdf::Panel& masked = scenario.fleet.panels[target_index];

    std::vector<cdf::TrainedBundle> donor_bundles;
    std::vector<cdf::Donor> donors;
    for (std::size_t c = 0; c < fleet.panels.size(); ++c) {
        if (c == target_index) continue;
        cdf::ModelConfig mc = cfg.model;
        mc.adjacency_mode = cdf::AdjacencyMode::causal;
        mc.seed = cdf::derive_seed(cfg.seed, 0xd0 + c);
        auto [bundle, report] = cdf::train_bundle(fleet.panels[c], mc, cfg.pipeline,
                                                  cfg.discovery, cfg.split);
        donor_bundles.push_back(std::move(bundle));
        donors.push_back({&fleet.panels[c], nullptr});
    }
    for (std::size_t i = 0; i < donors.size(); ++i) {
        donors[i].bundle = &donor_bundles[i];
    }

    cdf::ColdStartConfig cs;
    cs.strategy = cdf::parse_strategy(cfg.strategy);
    cs.k = cfg.k;
    cs.gmm_components = cfg.gmm_components;
    cs.seed = cdf::derive_seed(cfg.seed, 0x99);
    cs.model = cfg.model;
    cs.model.seed = cdf::derive_seed(cfg.seed, 0x9a);
    cs.pipeline = cfg.pipeline;
    cs.discovery = cfg.discovery;
    cs.split = cfg.split;

    const cdf::ForecastResult forecast =
        cdf::coldstart_forecast(masked, donors, cut, cs);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    write_forecast_csv(forecast, out / "forecast.csv");
    if (dump_candidates) {
        std::ofstream f(out / "candidates.csv");
        f << "donor,step,attribute,value\n";
        for (const auto& cand : cdf::donor_forecasts(masked, donors, cut, cs)) {
            for (std::size_t h = 0; h < cand.values.rows(); ++h) {
                for (std::size_t c = 0; c < cand.values.cols(); ++c) {
                    f << cand.source_id << ',' << cut + 1 + h << ','
                      << forecast.attr_names[c] << ','
                      << cdf::KvFile::format_double(cand.values(h, c)) << '\n';
                }
            }
        }
    }
    write_manifest(cfg, "coldstart", out);
    std::cout << "cold-start forecast (" << cfg.strategy << ") for " << masked.id()
              << " -> " << (out / "forecast.csv").string() << "\n";
    return 0;
}

int cmd_experiment(const RunConfig& cfg, const std::string& kind) {
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);

    std::vector<cdf::ExperimentResult> partials(cfg.experiment_seeds);
    const bool from_dir = !cfg.data_dir.empty();
    const std::int64_t n = static_cast<std::int64_t>(cfg.experiment_seeds);

#pragma omp parallel for schedule(dynamic) num_threads(static_cast<int>(cfg.jobs)) \
    if (cfg.jobs > 1)
    for (std::int64_t i = 0; i < n; ++i) {
        cdf::EvalConfig eval = cfg.eval();
        eval.seed = cdf::derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
        cdf::Fleet fleet;
        if (from_dir) {
            fleet = cdf::load_fleet(cfg.data_dir);
        } else {
            cdf::FleetSpec spec = cfg.fleet;
            spec.seed = eval.seed;
            fleet = cdf::generate_fleet(spec).first;
        }
        if (kind == "forecast") {
            std::vector<cdf::Method> methods;
            for (const auto& m : split_list(cfg.methods)) {
                methods.push_back(cdf::parse_method(m));
            }
            partials[static_cast<std::size_t>(i)] =
                cdf::run_forecast_experiment(fleet, methods, eval);
        } else {
            std::vector<cdf::CsMethod> strategies;
            for (const auto& s : split_list(cfg.strategies)) {
                strategies.push_back(cdf::parse_cs_method(s));
            }
            partials[static_cast<std::size_t>(i)] =
                cdf::run_coldstart_experiment(fleet, strategies, eval);
        }
    }

    cdf::ExperimentResult merged;
    for (const auto& part : partials) {
        merged.rows.insert(merged.rows.end(), part.rows.begin(), part.rows.end());
    }
    cdf::write_result_csv(merged, out / "result.csv");
    cdf::write_result_summary(merged, out / "summary.txt");
    write_manifest(cfg, "experiment", out);
    std::cout << "experiment (" << kind << ", " << cfg.experiment_seeds
              << " seeds) -> " << (out / "result.csv").string() << "\n";
    return 0;
}

int cmd_sweep(const RunConfig& cfg, const std::string& strategy, std::size_t k_min,
              std::size_t k_max) {
    if (k_min < 1 || k_max < k_min) throw cdf::ConfigError("bad sweep range");
    const fs::path out(cfg.out_dir);
    fs::create_directories(out);
    cdf::Fleet fleet;
    if (!cfg.data_dir.empty()) {
        fleet = cdf::load_fleet(cfg.data_dir);
    } else {
        cdf::FleetSpec spec = cfg.fleet;
        spec.seed = cfg.seed;
        fleet = cdf::generate_fleet(spec).first;
    }
    std::vector<std::size_t> values;
    for (std::size_t k = k_min; k <= k_max; ++k) values.push_back(k);
    const cdf::SweepTable table =
        cdf::sweep_k(fleet, cdf::parse_strategy(strategy), values, cfg.eval());
    cdf::write_sweep_csv(table, out / "sweep.csv");
    write_manifest(cfg, "sweep", out);
    std::cout << "sweep (" << strategy << ", k in [" << k_min << ',' << k_max
              << "]) -> " << (out / "sweep.csv").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    // --config is resolved before option defaults so flags can override it
    RunConfig cfg;
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                apply_config_file(cfg, argv[i + 1]);
            } catch (const std::exception& e) {
                std::cerr << "config error: " << e.what() << "\n";
                return 2;
            }
        }
    }

    CLI::App app{"causal demand forecasting with cold-start support"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "config file (sectioned key = value)");
    app.add_option("--seed", cfg.seed, "master seed");
    app.add_option("--jobs", cfg.jobs, "worker parallelism for experiments");
    app.add_option("--out", cfg.out_dir, "output directory");
    app.add_option("--data", cfg.data_dir, "fleet directory (schema.txt + CSVs)");

    const auto add_model_flags = [&](CLI::App* sub) {
        sub->add_option("--lookback", cfg.model.lookback, "past window U");
        sub->add_option("--horizon", cfg.model.horizon, "forecast horizon H");
        sub->add_option("--graph-dim", cfg.model.graph_dim, "graph layer width");
        sub->add_option("--lstm-dim", cfg.model.lstm_dim, "hidden units");
        sub->add_option("--lstm-layers", cfg.model.lstm_layers, "LSTM layers");
        sub->add_option("--learning-rate", cfg.model.learning_rate, "RMSProp rate");
        sub->add_option("--epochs", cfg.model.epochs, "training epochs");
        sub->add_option("--batch-size", cfg.model.batch_size, "minibatch size");
        sub->add_option("--lag-order", cfg.discovery.lag_order, "VAR lag order");
        sub->add_option("--edge-threshold", cfg.discovery.edge_threshold,
                        "causal edge threshold");
        sub->add_option("--smooth-window", cfg.pipeline.smooth_window,
                        "rolling median window");
        sub->add_flag("--no-smooth{false}", cfg.pipeline.smooth,
                      "disable median smoothing");
        sub->add_flag("--no-difference{false}", cfg.pipeline.difference,
                      "disable first-order differencing");
        sub->add_flag("--no-zscore{false}", cfg.pipeline.zscore,
                      "disable standardization");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic fleet");
    synth->add_option("--centers", cfg.fleet.centers, "data centers");
    synth->add_option("--services", cfg.fleet.services, "services per center");
    synth->add_option("--steps", cfg.fleet.steps, "time steps");
    synth->add_option("--heterogeneity", cfg.fleet.heterogeneity,
                      "cross-center parameter jitter");
    synth->add_option("--usage-noise", cfg.fleet.usage_noise, "usage noise sd");
    synth->add_option("--traffic-noise", cfg.fleet.traffic_noise, "traffic noise sd");
    synth->add_option("--total-noise", cfg.fleet.total_noise, "total noise sd");

    std::string center, graph_file, bundle_dir, target;
    long long origin_flag = -1, cut_flag = -1;
    bool dump_candidates = false;

    auto* discover = app.add_subcommand("discover", "run causal discovery");
    discover->add_option("--center", center, "panel id (default: first)");
    add_model_flags(discover);

    auto* train = app.add_subcommand("train", "train one forecasting model");
    train->add_option("--center", center, "panel id (default: first)");
    train->add_option("--method", cfg.adjacency_mode,
                      "adjacency mode: causal | all_ones | none");
    train->add_option("--graph", graph_file, "use this graph file, skip discovery");
    add_model_flags(train);

    auto* forecast = app.add_subcommand("forecast", "forecast from a bundle");
    forecast->add_option("--bundle", bundle_dir, "trained bundle directory")
        ->required();
    forecast->add_option("--center", center, "panel id (default: bundle's panel)");
    forecast->add_option("--origin", origin_flag, "forecast origin row");

    auto* coldstart = app.add_subcommand("coldstart", "similarity-based forecast "
                                                      "for a masked target");
    coldstart->add_option("--target", target, "target panel id (default: first)");
    coldstart->add_option("--strategy", cfg.strategy,
                          "gmm | gmm_sd | eros | virtual | virtual_mn");
    coldstart->add_option("-k,--k", cfg.k, "similar donors used");
    coldstart->add_option("--gmm-components", cfg.gmm_components, "mixture size");
    coldstart->add_option("--masked-services", cfg.masked_services,
                          "services masked on the target");
    coldstart->add_option("--cut", cut_flag, "mask boundary (default 0.75 T)");
    coldstart->add_flag("--dump-candidates", dump_candidates,
                        "write per-donor forecasts");
    add_model_flags(coldstart);

    std::string kind = "forecast";
    auto* experiment = app.add_subcommand("experiment", "multi-seed comparison");
    experiment->add_option("--kind", kind, "forecast | coldstart");
    experiment->add_option("--seeds", cfg.experiment_seeds, "seeded repetitions");
    experiment->add_option("--methods", cfg.methods, "forecast methods (csv)");
    experiment->add_option("--strategies", cfg.strategies, "cold-start strategies");
    experiment->add_option("--centers", cfg.fleet.centers, "data centers");
    experiment->add_option("--services", cfg.fleet.services, "services per center");
    experiment->add_option("--steps", cfg.fleet.steps, "time steps");
    experiment->add_option("-k,--k", cfg.k, "similar donors used");
    experiment->add_option("--gmm-components", cfg.gmm_components, "mixture size");
    experiment->add_option("--masked-services", cfg.masked_services,
                           "services masked on the target");
    experiment->add_option("--cut-fraction", cfg.cut_fraction, "mask boundary");
    add_model_flags(experiment);

    std::string sweep_strategy = "eros";
    std::size_t k_min = 1, k_max = 10;
    auto* sweep = app.add_subcommand("sweep", "error versus donor/component count");
    sweep->add_option("--strategy", sweep_strategy, "eros | gmm");
    sweep->add_option("--k-min", k_min, "sweep start");
    sweep->add_option("--k-max", k_max, "sweep end");
    sweep->add_option("--centers", cfg.fleet.centers, "data centers");
    sweep->add_option("--services", cfg.fleet.services, "services per center");
    sweep->add_option("--steps", cfg.fleet.steps, "time steps");
    sweep->add_option("-k,--k", cfg.k, "similar donors used (gmm sweep)");
    sweep->add_option("--gmm-components", cfg.gmm_components, "mixture size");
    sweep->add_option("--masked-services", cfg.masked_services,
                      "services masked on the target");
    sweep->add_option("--cut-fraction", cfg.cut_fraction, "mask boundary");
    add_model_flags(sweep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_synth(cfg);
        if (discover->parsed()) return cmd_discover(cfg, center);
        if (train->parsed()) return cmd_train(cfg, center, graph_file);
        if (forecast->parsed()) return cmd_forecast(cfg, bundle_dir, center, origin_flag);
        if (coldstart->parsed()) return cmd_coldstart(cfg, target, cut_flag,
                                                      dump_candidates);
        if (experiment->parsed()) return cmd_experiment(cfg, kind);
        if (sweep->parsed()) return cmd_sweep(cfg, sweep_strategy, k_min, k_max);
    } catch (const cdf::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const cdf::InvalidSpecError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
