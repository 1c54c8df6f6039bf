#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gtcausin/data.hpp"
#include "gtcausin/model.hpp"

namespace gtc {

// -------------------------------------------------------------- metrics ----

struct MetricValues {
	double mae = 0.0;
	double rmse = 0.0;
	double mape = 0.0;           // fraction, not percent
	std::size_t count = 0;        // observed entries
	std::size_t mape_skipped = 0; // observed entries with truth 0
};

// Entries with mask == 0 are ignored. Throws DataError when nothing is observed.
double masked_mae(const Tensor& pred, const Tensor& truth, const Tensor& mask);
double masked_rmse(const Tensor& pred, const Tensor& truth, const Tensor& mask);
double masked_mape(const Tensor& pred, const Tensor& truth, const Tensor& mask, std::size_t* skipped = nullptr);
MetricValues masked_metrics(const Tensor& pred, const Tensor& truth, const Tensor& mask);

// (base - ours) / base.
double improvement(double base, double ours);

// ------------------------------------------------------------- training ----

struct EpochRecord {
	std::size_t epoch = 0;
	double train_mae = 0.0;
	double val_mae = 0.0;
	double lr = 0.0;
};

struct TrainOptions {
	std::size_t epochs = 100;
	std::size_t batch_size = 16;
	std::size_t patience = 15;
	std::uint64_t seed = 0;
	double lr = 0.004;
	double gamma = 0.5;
	std::size_t lr_start = 180;
	std::size_t lr_step = 50;
	// Restore the best-on-selection parameters at the end; otherwise keep the last.
	bool keep_best = true;
	// Called after every epoch.
	std::function<void(const EpochRecord&)> on_epoch;
	// Checked after every epoch; returning true ends training.
	std::function<bool(const EpochRecord&)> stop_when;
};

struct TrainResult {
	std::vector<EpochRecord> curve;
	// 0 when no epoch improved on the initial parameters.
	std::size_t best_epoch = 0;
	double best_val_mae = 0.0;
	bool stopped_early = false;
	// Epochs actually run.
	std::size_t epochs_run = 0;
	std::vector<std::string> warnings;
};

// Trains in place. With keep_best the model ends holding the best-on-validation
// parameters (the training split is used when validation has no windows).
TrainResult train(Model& model, const SpeedDataset& ds, const TrainOptions& opts);

// Masked MAE over all output steps of every window in a split.
double split_mae(Model& model, const std::vector<Window>& windows);

std::string loss_curve_csv(const std::vector<EpochRecord>& curve);

// ----------------------------------------------------------- evaluation ----

struct HorizonMetrics {
	std::size_t steps = 0;
	std::size_t minutes = 0;
	MetricValues metrics;
};

struct MetricsReport {
	std::string variant;
	std::string split;
	std::uint64_t seed = 0;
	std::string config_digest;
	std::vector<HorizonMetrics> horizons;
	std::size_t windows = 0;

	const HorizonMetrics& at_minutes(std::size_t minutes) const;
	std::string to_json() const;
};

MetricsReport evaluate(Model& model, const SpeedDataset& ds, SplitKind split);

// ------------------------------------------------------------- ablation ----

struct AblationRow {
	std::string label;
	ModelConfig config;
	std::vector<MetricsReport> runs;  // one per seed
	std::vector<HorizonMetrics> mean; // averaged over seeds
};

struct AblationTable {
	std::vector<AblationRow> rows;
	double mean_mae(std::size_t row, std::size_t minutes) const;
	// improvement of row `ours` over row `base` in MAE at a horizon.
	double mae_improvement(std::size_t base, std::size_t ours, std::size_t minutes) const;
	std::string to_json() const;
	std::string to_csv() const;
};

std::string ablation_label(const ModelConfig& config);

AblationTable ablation_run(const std::vector<ModelConfig>& configs, const SensorGraph& graph, const SpeedDataset& ds,
                           const std::vector<std::uint64_t>& seeds, const TrainOptions& opts,
                           SplitKind eval_split = SplitKind::Test);

} // namespace gtc
