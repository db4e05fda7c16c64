#ifndef CDF_MODEL_HPP
#define CDF_MODEL_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdf/causal.hpp"
#include "cdf/nn.hpp"
#include "cdf/panel.hpp"
#include "cdf/preprocess.hpp"

namespace cdf {

enum class AdjacencyMode { causal, all_ones, none };

std::string adjacency_mode_name(AdjacencyMode m);
AdjacencyMode parse_adjacency_mode(const std::string& name);

struct ModelConfig {
    std::size_t lookback = 12;  // U
    std::size_t horizon = 10;   // H
    std::size_t graph_dim = 8;  // D_g
    std::size_t lstm_dim = 32;  // D_l
    std::size_t lstm_layers = 1;
    AdjacencyMode adjacency_mode = AdjacencyMode::causal;
    double learning_rate = 1e-3;
    std::size_t epochs = 30;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

/// One training example: a lookback block over all attributes, the known
/// future values of the given attributes over the horizon, and the forecast
/// targets. All cells come from observed data.
struct WindowSample {
    Matrix x;            // U x A
    Matrix known_future; // H x |O1|
    Matrix target;       // H x |O2|
    std::size_t origin = 0;
};

/// One sample per origin t in [U-1, T-H-1]; windows touching any
/// unobserved required cell are dropped. Throws PanelTooShortError when
/// T < U + H.
std::vector<WindowSample> make_windows(const Panel& panel, const ModelConfig& config);

/// Forecasting network: optional graph propagation layer, LSTM stack,
/// preliminary head mapping the final hidden state to an H x A forecast,
/// and a fusion head that re-reads the preliminary forecast with known
/// future values substituted in.
class CdfModel {
public:
    /// `propagation` is required for mode causal, ignored otherwise.
    CdfModel(ModelConfig config, AttributeSchema schema,
             std::optional<Matrix> propagation);

    const ModelConfig& config() const { return config_; }
    const AttributeSchema& schema() const { return schema_; }

    Matrix forward(const Matrix& x, const Matrix& known_future) const;

    struct Trace {
        GraphCache graph;
        std::vector<LstmCache> lstm;
        DenseCache head;
        DenseCache fusion;
        Matrix fused; // H x A with known futures substituted
        bool ready = false;
    };
    Matrix forward_cached(const Matrix& x, const Matrix& known_future,
                          Trace& trace) const;

    struct Gradients {
        GraphGrads graph;
        std::vector<LstmGrads> lstm;
        DenseGrads head;
        DenseGrads fusion;
    };
    /// Accumulates exact gradients for every parameter; no gradient flows
    /// into the substituted known-future entries.
    void backward(const Trace& trace, const Matrix& dout, Gradients& grads) const;

    /// Deterministically ordered view of all learnable parameters.
    std::vector<double*> param_ptrs();
    std::size_t param_count() const;
    /// Flattens grads in param_ptrs() order.
    static void flatten(const Gradients& grads, std::vector<double>& out);

    bool has_graph_layer() const { return graph_.has_value(); }
    const GraphLayer& graph_layer() const { return *graph_; }
    const std::vector<LstmLayer>& lstm_stack() const { return lstm_; }
    const DenseLayer& head() const { return head_; }
    const DenseLayer& fusion() const { return fusion_; }

    void save(const std::filesystem::path& path) const;
    static CdfModel load(const std::filesystem::path& path, AttributeSchema schema);

private:
    CdfModel() = default;
    ModelConfig config_;
    AttributeSchema schema_;
    std::vector<std::size_t> known_idx_, forecast_idx_;
    std::optional<GraphLayer> graph_;
    std::vector<LstmLayer> lstm_;
    DenseLayer head_;   // D_l -> H*A
    DenseLayer fusion_; // H*A -> H*|O2|
};

struct TrainReport {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
};

/// Mini-batch RMSProp on MSE; batch order shuffled from the config seed.
/// epochs = 0 leaves the model untouched and the report empty.
TrainReport train(CdfModel& model, const std::vector<WindowSample>& train_samples,
                  const std::vector<WindowSample>& val_samples,
                  const ModelConfig& config);

/// Mean MSE of model forecasts over the given samples.
double evaluate_loss(const CdfModel& model, const std::vector<WindowSample>& samples);

struct TuneGrid {
    std::vector<double> learning_rates;
    std::vector<std::size_t> epochs;
    std::vector<std::size_t> batch_sizes;
    std::vector<std::size_t> hidden_dims;
    std::vector<std::size_t> layer_counts;

    /// The full search space used for headline runs.
    static TuneGrid full_grid();
    /// Small default subset for desk-scale runs.
    static TuneGrid desk_grid();
};

struct ChronoSplit {
    double train_fraction = 0.8;
    double val_fraction = 0.1;
};

/// End-to-end preparation + training for one panel: preprocess, discover
/// the causal graph when the mode asks for one, build windows, train.
struct TrainedBundle {
    ModelConfig config;
    AttributeSchema schema;
    PipelineState pipeline;
    std::optional<CausalGraph> graph;
    bool graph_fallback = false; // discovery not possible; identity propagation used
    std::vector<double> input_fill; // per-attribute mean of preprocessed training inputs
    std::string panel_id;
    CdfModel model;
};

struct DiscoveryConfig {
    std::size_t lag_order = 1;
    double edge_threshold = 0.1;
    std::optional<Matrix> supplied_propagation; // bypasses discovery when set
};

std::pair<TrainedBundle, TrainReport> train_bundle(const Panel& panel,
                                                   const ModelConfig& config,
                                                   const PipelineConfig& pipeline,
                                                   const DiscoveryConfig& discovery,
                                                   const ChronoSplit& split);

/// Grid search: trains one model per grid point on the training split and
/// returns the configuration with the lowest validation loss (ties go to
/// the earlier grid point in deterministic nested order: learning rate,
/// epochs, batch size, hidden units, layer count).
ModelConfig tune(const Panel& panel, const ModelConfig& base,
                 const PipelineConfig& pipeline, const DiscoveryConfig& discovery,
                 const TuneGrid& grid, const ChronoSplit& split);

struct ForecastResult {
    std::string panel_id;
    std::string method;
    std::size_t origin = 0;
    std::vector<std::string> attr_names; // forecast attributes, schema order
    Matrix values;                       // H x |O2|, level units
};

/// Forecast at the given origin: assembles the model input from rows up to
/// the origin (plus declared known futures), runs the network, and inverts
/// the pipeline back to level units. Reads nothing else.
ForecastResult predict(const TrainedBundle& bundle, const Panel& panel,
                       std::size_t origin);

/// Same as predict, but unobserved input cells are replaced by the
/// bundle's stored per-attribute training mean instead of failing. Used for
/// cold-start targets whose masked attributes have no lookback history.
ForecastResult predict_filled(const TrainedBundle& bundle, const Panel& panel,
                              std::size_t origin);

void save_bundle(const TrainedBundle& bundle, const std::filesystem::path& dir);
TrainedBundle load_bundle(const std::filesystem::path& dir);

} // namespace cdf

#endif // CDF_MODEL_HPP
