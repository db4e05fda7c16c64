#ifndef CDF_EVAL_HPP
#define CDF_EVAL_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cdf/coldstart.hpp"
#include "cdf/model.hpp"
#include "cdf/panel.hpp"
#include "cdf/synth.hpp"

namespace cdf {

struct MetricReport {
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> mape; // absent when every term was excluded
    std::size_t mape_excluded = 0;
};

/// MSE / MAE over all entries; MAPE as a ratio over terms with
/// |actual| >= 1e-8 (excluded count reported).
MetricReport metrics(const Matrix& pred, const Matrix& actual);

/// Methods compared in the forecasting experiment.
enum class Method { lstm, lstm_gnn, cdf };
std::string method_name(Method m);
Method parse_method(const std::string& name);
AdjacencyMode method_mode(Method m);

/// Everything the harness needs for one experiment run on one fleet.
struct EvalConfig {
    ModelConfig model;
    PipelineConfig pipeline;
    DiscoveryConfig discovery;
    ChronoSplit split;
    std::uint64_t seed = 0;

    // cold start protocol
    std::size_t masked_services = 3;
    double cut_fraction = 0.75;
    std::size_t k = 3;
    std::size_t gmm_components = 2;
};

struct ResultRow {
    std::uint64_t seed = 0;
    std::string center;
    std::string method;
    MetricReport total_traffic;
    std::vector<std::pair<std::string, MetricReport>> per_attr;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;

    std::vector<double> collect(const std::string& method,
                                const std::string& metric) const;
};

/// Per center: 80/10/10 chronological split, one model per method, scored
/// in level units over every valid test-split origin. The total-traffic
/// attribute is the headline metric.
ExperimentResult run_forecast_experiment(const Fleet& fleet,
                                         const std::vector<Method>& methods,
                                         const EvalConfig& config);

/// Cold-start strategies compared in the leave-one-center-out experiment.
/// The first three train on the masked target itself; the rest use donors.
enum class CsMethod { lstm, lstm_gnn, cdf, gmm, gmm_sd, eros, virtual_avg, virtual_mn };
std::string cs_method_name(CsMethod m);
CsMethod parse_cs_method(const std::string& name);

/// Each center in turn becomes the cold-start target (services masked up
/// to the cut); the other centers act as trained donors; every strategy
/// forecasts the post-cut horizon and is scored on total traffic.
ExperimentResult run_coldstart_experiment(const Fleet& fleet,
                                          const std::vector<CsMethod>& strategies,
                                          const EvalConfig& config);

struct SweepRow {
    std::size_t value = 0; // donor count k (eros) or component count K (gmm)
    double mse_median = 0.0;
    double mae_median = 0.0;
    std::optional<double> mape_median;
};

struct SweepTable {
    std::string strategy;
    std::vector<SweepRow> rows;
};

/// Error versus k: for eros the donor count varies; for gmm the component
/// count varies with the donor count fixed at config.k. Donor models and
/// forecasts are computed once and reused across the sweep.
SweepTable sweep_k(const Fleet& fleet, ColdStartStrategy strategy,
                   const std::vector<std::size_t>& values, const EvalConfig& config);

/// Long-format CSV: seed,center,method,metric,value.
void write_result_csv(const ExperimentResult& result,
                      const std::filesystem::path& path);
void write_result_summary(const ExperimentResult& result,
                          const std::filesystem::path& path);
void write_sweep_csv(const SweepTable& table, const std::filesystem::path& path);

double median(std::vector<double> values);

} // namespace cdf

#endif // CDF_EVAL_HPP
