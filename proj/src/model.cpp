#include "cdf/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cdf/errors.hpp"
#include "cdf/kvfile.hpp"

namespace cdf {

namespace {

constexpr std::uint64_t kShuffleStream = 0x7368666c;

void load_matrix_into(const KvFile& kv, const std::string& sec, Matrix& m) {
    m = kv.get_matrix(sec);
}

} // namespace

std::string adjacency_mode_name(AdjacencyMode m) {
    switch (m) {
        case AdjacencyMode::causal: return "causal";
        case AdjacencyMode::all_ones: return "all_ones";
        case AdjacencyMode::none: return "none";
    }
    return "causal";
}

AdjacencyMode parse_adjacency_mode(const std::string& name) {
    if (name == "causal") return AdjacencyMode::causal;
    if (name == "all_ones") return AdjacencyMode::all_ones;
    if (name == "none") return AdjacencyMode::none;
    throw ConfigError("unknown adjacency mode '" + name + "'");
}

void ModelConfig::validate() const {
    if (lookback < 1 || horizon < 1) {
        throw ConfigError("lookback and horizon must be >= 1");
    }
    if (graph_dim < 1 || lstm_dim < 1 || lstm_layers < 1) {
        throw ConfigError("layer widths must be >= 1");
    }
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::vector<WindowSample> make_windows(const Panel& panel, const ModelConfig& config) {
    const std::size_t T = panel.steps(), A = panel.attrs();
    const std::size_t U = config.lookback, H = config.horizon;
    if (T < U + H) {
        throw PanelTooShortError("panel has " + std::to_string(T) +
                                 " steps, needs >= " + std::to_string(U + H));
    }
    const std::vector<std::size_t> o1 = panel.schema().known_future_indices();
    const std::vector<std::size_t> o2 = panel.schema().forecast_indices();

    std::vector<WindowSample> out;
    for (std::size_t t = U - 1; t + H + 1 <= T; ++t) {
        bool ok = true;
        for (std::size_t r = t + 1 - U; ok && r <= t; ++r) {
            for (std::size_t j = 0; j < A; ++j) {
                if (!panel.observed(r, j)) {
                    ok = false;
                    break;
                }
            }
        }
        for (std::size_t h = 1; ok && h <= H; ++h) {
            for (std::size_t j = 0; j < A; ++j) {
                if (!panel.observed(t + h, j)) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) continue;

        WindowSample s;
        s.origin = t;
        s.x = Matrix(U, A);
        for (std::size_t r = 0; r < U; ++r) {
            for (std::size_t j = 0; j < A; ++j) {
                s.x(r, j) = panel.value(t + 1 - U + r, j);
            }
        }
        s.known_future = Matrix(H, o1.size());
        s.target = Matrix(H, o2.size());
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t c = 0; c < o1.size(); ++c) {
                s.known_future(h, c) = panel.value(t + 1 + h, o1[c]);
            }
            for (std::size_t c = 0; c < o2.size(); ++c) {
                s.target(h, c) = panel.value(t + 1 + h, o2[c]);
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

CdfModel::CdfModel(ModelConfig config, AttributeSchema schema,
                   std::optional<Matrix> propagation)
    : config_(std::move(config)), schema_(std::move(schema)) {
    config_.validate();
    schema_.validate();
    known_idx_ = schema_.known_future_indices();
    forecast_idx_ = schema_.forecast_indices();
    const std::size_t A = schema_.size();
    const std::size_t H = config_.horizon;

    Rng rng(config_.seed);
    std::size_t lstm_input = A;
    if (config_.adjacency_mode != AdjacencyMode::none) {
        Matrix prop;
        if (config_.adjacency_mode == AdjacencyMode::all_ones) {
            prop = all_ones_propagation(A);
        } else {
            if (!propagation) {
                throw ConfigError("causal mode needs a propagation matrix");
            }
            prop = *propagation;
            if (prop.rows() != A || prop.cols() != A) {
                throw DimensionMismatchError("propagation matrix must be A x A");
            }
        }
        graph_ = GraphLayer::glorot(std::move(prop), config_.graph_dim, rng);
        lstm_input = config_.graph_dim;
    }
    for (std::size_t l = 0; l < config_.lstm_layers; ++l) {
        lstm_.push_back(LstmLayer::glorot(l == 0 ? lstm_input : config_.lstm_dim,
                                          config_.lstm_dim, rng));
    }
    head_ = DenseLayer::glorot(config_.lstm_dim, H * A, Activation::identity, rng);
    fusion_ = DenseLayer::glorot(H * A, H * forecast_idx_.size(),
                                 Activation::identity, rng);
}

Matrix CdfModel::forward(const Matrix& x, const Matrix& known_future) const {
    Trace scratch;
    return forward_cached(x, known_future, scratch);
}

Matrix CdfModel::forward_cached(const Matrix& x, const Matrix& known_future,
                                Trace& trace) const {
    const std::size_t A = schema_.size(), U = config_.lookback, H = config_.horizon;
    if (x.rows() != U || x.cols() != A) {
        throw DimensionMismatchError("input window must be U x A");
    }
    if (known_future.rows() != H || known_future.cols() != known_idx_.size()) {
        throw DimensionMismatchError("known futures must be H x |O1|");
    }

    Matrix z = x;
    if (graph_) z = graph_forward_cached(*graph_, x, trace.graph);

    trace.lstm.resize(lstm_.size());
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        z = lstm_forward_cached(lstm_[l], z, trace.lstm[l]);
    }
    Matrix final_h(1, config_.lstm_dim);
    for (std::size_t k = 0; k < config_.lstm_dim; ++k) final_h(0, k) = z(U - 1, k);

    const Matrix prelim_flat = dense_forward_cached(head_, final_h, trace.head);

    // preliminary H x A forecast with known futures substituted in place
    Matrix fused(H, A);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t j = 0; j < A; ++j) fused(h, j) = prelim_flat(0, h * A + j);
    }
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c = 0; c < known_idx_.size(); ++c) {
            fused(h, known_idx_[c]) = known_future(h, c);
        }
    }
    trace.fused = fused;

    Matrix fused_flat(1, H * A);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t j = 0; j < A; ++j) fused_flat(0, h * A + j) = fused(h, j);
    }
    const Matrix out_flat = dense_forward_cached(fusion_, fused_flat, trace.fusion);

    Matrix out(H, forecast_idx_.size());
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c = 0; c < forecast_idx_.size(); ++c) {
            out(h, c) = out_flat(0, h * forecast_idx_.size() + c);
        }
    }
    trace.ready = true;
    return out;
}

void CdfModel::backward(const Trace& trace, const Matrix& dout,
                        Gradients& grads) const {
    if (!trace.ready) throw MissingCacheError("forward trace not populated");
    const std::size_t A = schema_.size(), U = config_.lookback, H = config_.horizon;
    const std::size_t n_fore = forecast_idx_.size();

    Matrix dout_flat(1, H * n_fore);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c = 0; c < n_fore; ++c) {
            dout_flat(0, h * n_fore + c) = dout(h, c);
        }
    }
    if (grads.lstm.empty()) grads.lstm.resize(lstm_.size());

    const Matrix dfused_flat = dense_backward(fusion_, trace.fusion, dout_flat,
                                              grads.fusion);

    // gradient reaches the preliminary head only through forecast columns;
    // substituted known-future entries are inputs, not outputs
    Matrix dprelim_flat(1, H * A);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t c = 0; c < n_fore; ++c) {
            const std::size_t j = forecast_idx_[c];
            dprelim_flat(0, h * A + j) = dfused_flat(0, h * A + j);
        }
    }
    const Matrix dfinal_h = dense_backward(head_, trace.head, dprelim_flat, grads.head);

    Matrix dh_seq(U, config_.lstm_dim);
    for (std::size_t k = 0; k < config_.lstm_dim; ++k) {
        dh_seq(U - 1, k) = dfinal_h(0, k);
    }
    for (std::size_t l = lstm_.size(); l-- > 0;) {
        dh_seq = lstm_backward(lstm_[l], trace.lstm[l], dh_seq, grads.lstm[l]);
    }
    if (graph_) graph_backward(*graph_, trace.graph, dh_seq, grads.graph);
}

std::vector<double*> CdfModel::param_ptrs() {
    std::vector<double*> out;
    auto push_matrix = [&](Matrix& m) {
        for (std::size_t i = 0; i < m.size(); ++i) out.push_back(m.data() + i);
    };
    auto push_vector = [&](std::vector<double>& v) {
        for (double& x : v) out.push_back(&x);
    };
    if (graph_) push_matrix(graph_->w);
    for (auto& l : lstm_) {
        push_matrix(l.wf);
        push_matrix(l.wi);
        push_matrix(l.wo);
        push_matrix(l.wc);
        push_vector(l.bf);
        push_vector(l.bi);
        push_vector(l.bo);
        push_vector(l.bc);
    }
    push_matrix(head_.w);
    push_vector(head_.b);
    push_matrix(fusion_.w);
    push_vector(fusion_.b);
    return out;
}

std::size_t CdfModel::param_count() const {
    std::size_t n = 0;
    if (graph_) n += graph_->w.size();
    for (const auto& l : lstm_) {
        n += l.wf.size() + l.wi.size() + l.wo.size() + l.wc.size();
        n += l.bf.size() + l.bi.size() + l.bo.size() + l.bc.size();
    }
    n += head_.w.size() + head_.b.size();
    n += fusion_.w.size() + fusion_.b.size();
    return n;
}

void CdfModel::flatten(const Gradients& grads, std::vector<double>& out) {
    out.clear();
    auto push_matrix = [&](const Matrix& m) {
        out.insert(out.end(), m.data(), m.data() + m.size());
    };
    auto push_vector = [&](const std::vector<double>& v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    if (grads.graph.w.size() > 0) push_matrix(grads.graph.w);
    for (const auto& l : grads.lstm) {
        push_matrix(l.wf);
        push_matrix(l.wi);
        push_matrix(l.wo);
        push_matrix(l.wc);
        push_vector(l.bf);
        push_vector(l.bi);
        push_vector(l.bo);
        push_vector(l.bc);
    }
    push_matrix(grads.head.w);
    push_vector(grads.head.b);
    push_matrix(grads.fusion.w);
    push_vector(grads.fusion.b);
}

TrainReport train(CdfModel& model, const std::vector<WindowSample>& train_samples,
                  const std::vector<WindowSample>& val_samples,
                  const ModelConfig& config) {
    TrainReport report;
    if (config.epochs == 0) return report;
    if (train_samples.empty()) {
        throw EmptyTrainingSetError("no training samples");
    }

    std::vector<double*> params = model.param_ptrs();
    RmsProp opt(params.size(), config.learning_rate);
    Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));

    std::vector<std::size_t> order(train_samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<double> flat;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            CdfModel::Gradients grads;
            double batch_loss = 0.0;
            for (std::size_t i = start; i < stop; ++i) {
                const WindowSample& s = train_samples[order[i]];
                CdfModel::Trace trace;
                const Matrix pred = model.forward_cached(s.x, s.known_future, trace);
                const LossGrad lg = mse_loss(pred, s.target);
                batch_loss += lg.loss;
                model.backward(trace, lg.grad, grads);
            }
            const double inv_n = 1.0 / static_cast<double>(stop - start);
            CdfModel::flatten(grads, flat);
            for (double& g : flat) g *= inv_n;
            opt.step(params, flat);
            epoch_loss += batch_loss * inv_n;
            ++batches;
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(batches));
        report.val_loss.push_back(val_samples.empty()
                                      ? std::numeric_limits<double>::quiet_NaN()
                                      : evaluate_loss(model, val_samples));
    }
    return report;
}

double evaluate_loss(const CdfModel& model, const std::vector<WindowSample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    double total = 0.0;
    for (const auto& s : samples) {
        const Matrix pred = model.forward(s.x, s.known_future);
        total += mse_loss(pred, s.target).loss;
    }
    return total / static_cast<double>(samples.size());
}

TuneGrid TuneGrid::full_grid() {
    TuneGrid g;
    g.learning_rates = {1e-1, 1e-2, 1e-3, 1e-4};
    g.epochs = {10, 20, 30, 50, 70, 100};
    g.batch_sizes = {16, 32, 64, 128};
    g.hidden_dims = {10, 20, 100, 200, 300};
    g.layer_counts = {1, 2, 3};
    return g;
}

TuneGrid TuneGrid::desk_grid() {
    TuneGrid g;
    g.learning_rates = {1e-2, 1e-3};
    g.epochs = {20, 30};
    g.batch_sizes = {32};
    g.hidden_dims = {20};
    g.layer_counts = {1};
    return g;
}

namespace {

struct Prepared {
    Panel processed;
    PipelineState state;
    std::vector<WindowSample> train_windows;
    std::vector<WindowSample> val_windows;
    std::optional<CausalGraph> graph;
    bool graph_fallback = false;
    std::optional<Matrix> propagation;
    std::vector<double> input_fill;

    Prepared(Panel p, PipelineState s) : processed(std::move(p)), state(std::move(s)) {}
};

// Longest contiguous run of fully observed rows within [0, limit).
std::pair<std::size_t, std::size_t> longest_observed_run(const Panel& panel,
                                                         std::size_t limit) {
    std::size_t best_lo = 0, best_len = 0, run_lo = 0, run_len = 0;
    for (std::size_t t = 0; t < limit; ++t) {
        bool full = true;
        for (std::size_t j = 0; j < panel.attrs(); ++j) {
            if (!panel.observed(t, j)) {
                full = false;
                break;
            }
        }
        if (full) {
            if (run_len == 0) run_lo = t;
            ++run_len;
            if (run_len > best_len) {
                best_len = run_len;
                best_lo = run_lo;
            }
        } else {
            run_len = 0;
        }
    }
    return {best_lo, best_len};
}

Prepared prepare(const Panel& panel, const ModelConfig& config,
                 const PipelineConfig& pipeline, const DiscoveryConfig& discovery,
                 const ChronoSplit& split) {
    PipelineState state;
    state.config = pipeline;
    Panel base = panel;
    if (pipeline.smooth) base = smooth_panel(base, pipeline.smooth_window);
    if (pipeline.difference) {
        auto [diffed, anchor] = difference(base);
        base = std::move(diffed);
        state.anchor = std::move(anchor);
    }

    // split boundaries in level rows, shifted into diff coordinates
    const std::size_t T_levels = panel.steps();
    const std::size_t train_levels = static_cast<std::size_t>(
        std::floor(split.train_fraction * static_cast<double>(T_levels)));
    const std::size_t val_levels = static_cast<std::size_t>(
        std::floor((split.train_fraction + split.val_fraction) *
                   static_cast<double>(T_levels)));
    const std::size_t shift = pipeline.difference ? 1 : 0;
    const std::size_t train_end =
        std::min(base.steps(), train_levels > shift ? train_levels - shift : 0);
    const std::size_t val_end =
        std::min(base.steps(), val_levels > shift ? val_levels - shift : 0);

    // standardization parameters come from the training region only
    if (pipeline.zscore) {
        const std::size_t fit_end = std::max<std::size_t>(train_end, 2);
        state.z = zscore_fit(slice(base, 0, std::min(fit_end, base.steps())));
        base = zscore_apply(base, *state.z);
    }
    Prepared prep(std::move(base), std::move(state));

    const std::size_t H = config.horizon;
    for (auto& w : make_windows(prep.processed, config)) {
        const std::size_t t = w.origin;
        if (t + H < train_end) {
            prep.train_windows.push_back(std::move(w));
        } else if (t + 1 >= train_end && t + H < val_end) {
            prep.val_windows.push_back(std::move(w));
        }
    }

    if (config.adjacency_mode == AdjacencyMode::causal) {
        if (discovery.supplied_propagation) {
            prep.propagation = discovery.supplied_propagation;
        } else {
            // discovery consumes the differenced, standardized training
            // split; the median filter stays out of its input
            Panel disc_base = panel;
            if (pipeline.difference) {
                disc_base = difference(disc_base).first;
            }
            const std::size_t disc_end = std::min(disc_base.steps(), train_end);
            if (pipeline.zscore && disc_end >= 2) {
                const ZScoreParams z = zscore_fit(slice(disc_base, 0, disc_end));
                disc_base = zscore_apply(disc_base, z);
            }
            const auto [lo, len] = longest_observed_run(disc_base, disc_end);
            const std::size_t p = discovery.lag_order;
            const std::size_t min_rows =
                p + std::max<std::size_t>(50, 1 + p * panel.attrs());
            if (len >= min_rows) {
                const Panel disc_slice = slice(disc_base, lo, lo + len);
                try {
                    CausalGraph g = discover(disc_slice, discovery.lag_order,
                                             discovery.edge_threshold);
                    prep.propagation = g.propagation;
                    prep.graph = std::move(g);
                } catch (const Error&) {
                    prep.graph_fallback = true;
                }
            } else {
                prep.graph_fallback = true;
            }
            if (prep.graph_fallback) {
                prep.propagation = Matrix::identity(panel.attrs());
            }
        }
    }

    // per-attribute mean of observed preprocessed cells in the train region
    prep.input_fill.assign(panel.attrs(), 0.0);
    for (std::size_t j = 0; j < panel.attrs(); ++j) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < train_end; ++t) {
            if (prep.processed.observed(t, j)) {
                sum += prep.processed.value(t, j);
                ++n;
            }
        }
        prep.input_fill[j] = n > 0 ? sum / static_cast<double>(n) : 0.0;
    }
    return prep;
}

} // namespace

std::pair<TrainedBundle, TrainReport> train_bundle(const Panel& panel,
                                                   const ModelConfig& config,
                                                   const PipelineConfig& pipeline,
                                                   const DiscoveryConfig& discovery,
                                                   const ChronoSplit& split) {
    config.validate();
    Prepared prep = prepare(panel, config, pipeline, discovery, split);
    CdfModel model(config, panel.schema(), prep.propagation);
    const TrainReport report = train(model, prep.train_windows, prep.val_windows,
                                     config);
    TrainedBundle bundle{config,
                         panel.schema(),
                         std::move(prep.state),
                         std::move(prep.graph),
                         prep.graph_fallback,
                         std::move(prep.input_fill),
                         panel.id(),
                         std::move(model)};
    return {std::move(bundle), report};
}

ModelConfig tune(const Panel& panel, const ModelConfig& base,
                 const PipelineConfig& pipeline, const DiscoveryConfig& discovery,
                 const TuneGrid& grid, const ChronoSplit& split) {
    if (grid.learning_rates.empty() || grid.epochs.empty() ||
        grid.batch_sizes.empty() || grid.hidden_dims.empty() ||
        grid.layer_counts.empty()) {
        throw EmptyGridError("every tuning dimension needs at least one value");
    }
    ModelConfig best = base;
    double best_loss = std::numeric_limits<double>::infinity();
    bool first = true;
    for (double lr : grid.learning_rates) {
        for (std::size_t ep : grid.epochs) {
            for (std::size_t bs : grid.batch_sizes) {
                for (std::size_t hidden : grid.hidden_dims) {
                    for (std::size_t layers : grid.layer_counts) {
                        ModelConfig cfg = base;
                        cfg.learning_rate = lr;
                        cfg.epochs = ep;
                        cfg.batch_size = bs;
                        cfg.lstm_dim = hidden;
                        cfg.lstm_layers = layers;
                        Prepared prep = prepare(panel, cfg, pipeline, discovery, split);
                        CdfModel model(cfg, panel.schema(), prep.propagation);
                        train(model, prep.train_windows, prep.val_windows, cfg);
                        const double loss = evaluate_loss(model, prep.val_windows);
                        if (first || loss < best_loss) {
                            first = false;
                            best_loss = loss;
                            best = cfg;
                        }
                    }
                }
            }
        }
    }
    return best;
}

namespace {

struct AssembledInput {
    Matrix x;            // U x A, preprocessed space
    Matrix known_future; // H x |O1|, preprocessed space
    std::vector<double> anchor; // smoothed level at origin per forecast attribute
};

// Gathers and preprocesses exactly the rows predict is allowed to read:
// all attributes up to the origin, known-future attributes through
// origin + H. Unobserved required cells either fail or take fill values.
AssembledInput assemble_input(const TrainedBundle& bundle, const Panel& panel,
                              std::size_t origin, bool fill_missing) {
    const ModelConfig& cfg = bundle.config;
    const PipelineConfig& pipe = bundle.pipeline.config;
    const std::size_t A = panel.attrs(), U = cfg.lookback, H = cfg.horizon;
    const std::size_t diff_extra = pipe.difference ? 1 : 0;
    const std::size_t smooth_extra = pipe.smooth ? pipe.smooth_window - 1 : 0;

    if (origin + 1 < U + diff_extra) {
        throw InsufficientHistoryError("origin " + std::to_string(origin) +
                                       " leaves no room for the lookback window");
    }
    if (origin + H >= panel.steps()) {
        throw MissingKnownFutureError("origin " + std::to_string(origin) +
                                      " needs rows beyond the panel end");
    }
    const std::size_t lowest_needed = origin + 1 - U - diff_extra;
    const std::size_t g0 = lowest_needed > smooth_extra ? lowest_needed - smooth_extra
                                                        : 0;

    const std::vector<std::size_t> o1 = bundle.schema.known_future_indices();
    const std::vector<std::size_t> o2 = bundle.schema.forecast_indices();
    std::vector<std::uint8_t> is_known(A, 0);
    for (std::size_t j : o1) is_known[j] = 1;

    // gather raw values; row index r corresponds to panel row g0 + r
    const std::size_t span = origin + H - g0 + 1;
    Matrix raw(span, A);
    std::vector<std::uint8_t> have(span * A, 0);
    for (std::size_t r = 0; r < span; ++r) {
        const std::size_t t = g0 + r;
        for (std::size_t j = 0; j < A; ++j) {
            if (t > origin && !is_known[j]) continue; // not allowed to read
            if (!panel.observed(t, j)) continue;      // never read masked cells
            raw(r, j) = panel.value(t, j);
            have[r * A + j] = 1;
        }
    }

    // trailing median per column over gathered rows
    Matrix level = raw;
    std::vector<std::uint8_t> level_have = have;
    if (pipe.smooth) {
        std::vector<double> buf;
        for (std::size_t j = 0; j < A; ++j) {
            const std::size_t rmax = is_known[j] ? span : origin - g0 + 1;
            for (std::size_t r = 0; r < rmax; ++r) {
                const std::size_t lo =
                    r + 1 >= pipe.smooth_window ? r + 1 - pipe.smooth_window : 0;
                buf.clear();
                for (std::size_t u = lo; u <= r; ++u) {
                    if (have[u * A + j]) buf.push_back(raw(u, j));
                }
                if (buf.empty()) {
                    level_have[r * A + j] = 0;
                    continue;
                }
                std::sort(buf.begin(), buf.end());
                const std::size_t n = buf.size();
                level(r, j) = n % 2 ? buf[n / 2] : 0.5 * (buf[n / 2 - 1] + buf[n / 2]);
                level_have[r * A + j] = 1;
            }
        }
    }

    auto working_cell = [&](std::size_t t, std::size_t j, double& out) -> bool {
        // preprocessed-space value at diff/level row t (panel coordinates)
        if (pipe.difference) {
            const std::size_t r0 = t - g0, r1 = t + 1 - g0;
            if (!level_have[r0 * A + j] || !level_have[r1 * A + j]) return false;
            out = level(r1, j) - level(r0, j);
        } else {
            const std::size_t r = t - g0;
            if (!level_have[r * A + j]) return false;
            out = level(r, j);
        }
        if (pipe.zscore) {
            out = (out - bundle.pipeline.z->mu[j]) / bundle.pipeline.z->sigma[j];
        }
        return true;
    };

    AssembledInput in;
    in.x = Matrix(U, A);
    // lookback rows in preprocessed coordinates end just before the origin
    // when differencing (diff row origin-1 spans levels origin-1 -> origin)
    const std::size_t x_last = pipe.difference ? origin - 1 : origin;
    for (std::size_t r = 0; r < U; ++r) {
        const std::size_t t = x_last + 1 - U + r;
        for (std::size_t j = 0; j < A; ++j) {
            double v = 0.0;
            if (working_cell(t, j, v)) {
                in.x(r, j) = v;
            } else if (fill_missing) {
                in.x(r, j) = bundle.input_fill[j];
            } else {
                throw InsufficientHistoryError(
                    "unobserved history at row " + std::to_string(t) + ", attribute " +
                    std::to_string(j));
            }
        }
    }
    in.known_future = Matrix(H, o1.size());
    for (std::size_t h = 0; h < H; ++h) {
        const std::size_t t = pipe.difference ? origin + h : origin + 1 + h;
        for (std::size_t c = 0; c < o1.size(); ++c) {
            double v = 0.0;
            if (!working_cell(t, o1[c], v)) {
                throw MissingKnownFutureError("known future unavailable at row " +
                                              std::to_string(t));
            }
            in.known_future(h, c) = v;
        }
    }
    in.anchor.resize(o2.size());
    for (std::size_t c = 0; c < o2.size(); ++c) {
        const std::size_t j = o2[c];
        const std::size_t r = origin - g0;
        if (!level_have[r * A + j]) {
            throw InsufficientHistoryError("no observed level at the origin for "
                                           "attribute " + std::to_string(j));
        }
        in.anchor[c] = level(r, j);
    }
    return in;
}

ForecastResult run_predict(const TrainedBundle& bundle, const Panel& panel,
                           std::size_t origin, bool fill_missing) {
    const AssembledInput in = assemble_input(bundle, panel, origin, fill_missing);
    Matrix out = bundle.model.forward(in.x, in.known_future);

    const std::vector<std::size_t> o2 = bundle.schema.forecast_indices();
    if (bundle.pipeline.config.zscore) {
        out = zscore_invert_columns(out, *bundle.pipeline.z, o2);
    }
    if (bundle.pipeline.config.difference) {
        out = inverse_difference(out, DifferenceAnchor{in.anchor});
    }

    ForecastResult result;
    result.panel_id = panel.id();
    result.method = adjacency_mode_name(bundle.config.adjacency_mode);
    result.origin = origin;
    for (std::size_t j : o2) result.attr_names.push_back(bundle.schema.names[j]);
    result.values = std::move(out);
    return result;
}

} // namespace

ForecastResult predict(const TrainedBundle& bundle, const Panel& panel,
                       std::size_t origin) {
    return run_predict(bundle, panel, origin, false);
}

ForecastResult predict_filled(const TrainedBundle& bundle, const Panel& panel,
                              std::size_t origin) {
    return run_predict(bundle, panel, origin, true);
}

void CdfModel::save(const std::filesystem::path& path) const {
    KvFile kv;
    kv.set_uint("meta", "format_version", 1);
    kv.set("meta", "adjacency_mode", adjacency_mode_name(config_.adjacency_mode));
    kv.set_uint("meta", "lookback", config_.lookback);
    kv.set_uint("meta", "horizon", config_.horizon);
    kv.set_uint("meta", "graph_dim", config_.graph_dim);
    kv.set_uint("meta", "lstm_dim", config_.lstm_dim);
    kv.set_uint("meta", "lstm_layers", config_.lstm_layers);
    kv.set_double("meta", "learning_rate", config_.learning_rate);
    kv.set_uint("meta", "epochs", config_.epochs);
    kv.set_uint("meta", "batch_size", config_.batch_size);
    kv.set_uint("meta", "seed", config_.seed);
    if (graph_) {
        kv.set_matrix("graph.propagation", graph_->propagation);
        kv.set_matrix("graph.w", graph_->w);
    }
    for (std::size_t l = 0; l < lstm_.size(); ++l) {
        const std::string p = "lstm" + std::to_string(l);
        kv.set_matrix(p + ".wf", lstm_[l].wf);
        kv.set_matrix(p + ".wi", lstm_[l].wi);
        kv.set_matrix(p + ".wo", lstm_[l].wo);
        kv.set_matrix(p + ".wc", lstm_[l].wc);
        kv.set_vector(p + ".bias", "bf", lstm_[l].bf);
        kv.set_vector(p + ".bias", "bi", lstm_[l].bi);
        kv.set_vector(p + ".bias", "bo", lstm_[l].bo);
        kv.set_vector(p + ".bias", "bc", lstm_[l].bc);
    }
    kv.set_matrix("head.w", head_.w);
    kv.set_vector("head.bias", "b", head_.b);
    kv.set_matrix("fusion.w", fusion_.w);
    kv.set_vector("fusion.bias", "b", fusion_.b);
    kv.write(path);
}

CdfModel CdfModel::load(const std::filesystem::path& path, AttributeSchema schema) {
    const KvFile kv = KvFile::read(path);
    if (kv.get_uint("meta", "format_version") != 1) {
        throw IoError("unsupported model format in " + path.string());
    }
    ModelConfig cfg;
    cfg.adjacency_mode = parse_adjacency_mode(kv.get("meta", "adjacency_mode"));
    cfg.lookback = kv.get_uint("meta", "lookback");
    cfg.horizon = kv.get_uint("meta", "horizon");
    cfg.graph_dim = kv.get_uint("meta", "graph_dim");
    cfg.lstm_dim = kv.get_uint("meta", "lstm_dim");
    cfg.lstm_layers = kv.get_uint("meta", "lstm_layers");
    cfg.learning_rate = kv.get_double("meta", "learning_rate");
    cfg.epochs = kv.get_uint("meta", "epochs");
    cfg.batch_size = kv.get_uint("meta", "batch_size");
    cfg.seed = kv.get_uint("meta", "seed");

    std::optional<Matrix> prop;
    if (kv.has_section("graph.propagation")) {
        prop = kv.get_matrix("graph.propagation");
    }
    CdfModel model(cfg, std::move(schema),
                   cfg.adjacency_mode == AdjacencyMode::causal ? prop : std::nullopt);
    if (model.graph_) {
        load_matrix_into(kv, "graph.w", model.graph_->w);
        if (cfg.adjacency_mode == AdjacencyMode::all_ones && prop) {
            model.graph_->propagation = *prop;
        }
    }
    for (std::size_t l = 0; l < model.lstm_.size(); ++l) {
        const std::string p = "lstm" + std::to_string(l);
        load_matrix_into(kv, p + ".wf", model.lstm_[l].wf);
        load_matrix_into(kv, p + ".wi", model.lstm_[l].wi);
        load_matrix_into(kv, p + ".wo", model.lstm_[l].wo);
        load_matrix_into(kv, p + ".wc", model.lstm_[l].wc);
        model.lstm_[l].bf = kv.get_vector(p + ".bias", "bf");
        model.lstm_[l].bi = kv.get_vector(p + ".bias", "bi");
        model.lstm_[l].bo = kv.get_vector(p + ".bias", "bo");
        model.lstm_[l].bc = kv.get_vector(p + ".bias", "bc");
    }
    load_matrix_into(kv, "head.w", model.head_.w);
    model.head_.b = kv.get_vector("head.bias", "b");
    load_matrix_into(kv, "fusion.w", model.fusion_.w);
    model.fusion_.b = kv.get_vector("fusion.bias", "b");
    return model;
}

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    bundle.model.save(dir / "model.txt");
    save_pipeline_state(bundle.pipeline, dir / "pipeline.txt");
    save_schema(bundle.schema, dir / "schema.txt");
    if (bundle.graph) {
        save_graph(*bundle.graph, bundle.schema.names, dir / "graph.txt");
    }
    KvFile kv;
    kv.set("bundle", "panel_id", bundle.panel_id);
    kv.set_uint("bundle", "graph_fallback", bundle.graph_fallback ? 1 : 0);
    kv.set_vector("bundle", "input_fill", bundle.input_fill);
    kv.write(dir / "bundle.txt");
}

TrainedBundle load_bundle(const std::filesystem::path& dir) {
    AttributeSchema schema = load_schema(dir / "schema.txt");
    CdfModel model = CdfModel::load(dir / "model.txt", schema);
    const KvFile kv = KvFile::read(dir / "bundle.txt");
    std::optional<CausalGraph> graph;
    if (std::filesystem::exists(dir / "graph.txt")) {
        graph = load_graph(dir / "graph.txt");
    }
    TrainedBundle bundle{model.config(),
                         std::move(schema),
                         load_pipeline_state(dir / "pipeline.txt"),
                         std::move(graph),
                         kv.get_uint("bundle", "graph_fallback") != 0,
                         kv.get_vector("bundle", "input_fill"),
                         kv.get("bundle", "panel_id"),
                         std::move(model)};
    return bundle;
}

} // namespace cdf
