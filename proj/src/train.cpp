#include "gtcausin/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "gtcausin/csv.hpp"
#include "gtcausin/digest.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/optim.hpp"

namespace gtc {

using nlohmann::json;

namespace {

void check_metric_shapes(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
	if (pred.shape() != truth.shape() || pred.shape() != mask.shape()) {
		throw InputError("metric shapes differ: " + shape_string(pred.shape()) + ", " + shape_string(truth.shape()) +
		                 ", " + shape_string(mask.shape()));
	}
}

} // namespace

MetricValues masked_metrics(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
	check_metric_shapes(pred, truth, mask);
	MetricValues m;
	double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
	std::size_t pct_count = 0;
	for (std::size_t i = 0; i < pred.size(); ++i) {
		if (mask[i] == 0.0) {
			continue;
		}
		const double e = pred[i] - truth[i];
		abs_sum += std::abs(e);
		sq_sum += e * e;
		++m.count;
		if (truth[i] == 0.0) {
			++m.mape_skipped;
		} else {
			pct_sum += std::abs(e / truth[i]);
			++pct_count;
		}
	}
	if (m.count == 0) {
		throw DataError("metric undefined: no observed entries");
	}
	m.mae = abs_sum / static_cast<double>(m.count);
	m.rmse = std::sqrt(sq_sum / static_cast<double>(m.count));
	m.mape = pct_count ? pct_sum / static_cast<double>(pct_count) : 0.0;
	return m;
}

double masked_mae(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
	return masked_metrics(pred, truth, mask).mae;
}

double masked_rmse(const Tensor& pred, const Tensor& truth, const Tensor& mask) {
	return masked_metrics(pred, truth, mask).rmse;
}

double masked_mape(const Tensor& pred, const Tensor& truth, const Tensor& mask, std::size_t* skipped) {
	const auto m = masked_metrics(pred, truth, mask);
	if (skipped) {
		*skipped = m.mape_skipped;
	}
	return m.mape;
}

double improvement(double base, double ours) {
	require(base != 0.0, "improvement: base metric is zero");
	return (base - ours) / base;
}

// ------------------------------------------------------------- training ----

namespace {

double mask_count(const Window& w) {
	return std::accumulate(w.target_mask.data().begin(), w.target_mask.data().end(), 0.0);
}

bool grads_finite(const ParamStore& store) {
	for (const auto& [name, e] : store.entries()) {
		if (!e.grad.all_finite()) {
			return false;
		}
	}
	return true;
}

} // namespace

double split_mae(Model& model, const std::vector<Window>& windows) {
	double abs_sum = 0.0, count = 0.0;
	for (const auto& w : windows) {
		Tape tape;
		Var y = model.forward(tape, w.input, w.calendar);
		abs_sum += tape.value(ops::masked_abs_sum(tape, y, w.target, w.target_mask))[0];
		count += mask_count(w);
	}
	if (count == 0.0) {
		throw DataError("no observed targets in split");
	}
	return abs_sum / count;
}

TrainResult train(Model& model, const SpeedDataset& ds, const TrainOptions& opts) {
	require(opts.batch_size >= 1, "batch size must be positive");
	const auto& cfg = model.config();
	if (ds.nodes() != model.nodes() || ds.node_ids != model.graph().node_ids) {
		throw InputError("dataset sensors do not match the model graph");
	}
	TrainResult result;
	const DenseView dense = interpolate_training(ds);
	result.warnings = dense.warnings;
	const auto train_w =
	    make_windows(ds, dense, SplitKind::Train, cfg.input_window, cfg.output_window, &result.warnings);
	const auto val_w = make_windows(ds, dense, SplitKind::Val, cfg.input_window, cfg.output_window, &result.warnings);
	if (train_w.empty()) {
		throw DataError("training split has no complete windows");
	}
	const bool use_val = !val_w.empty();
	if (!use_val) {
		result.warnings.push_back("validation split has no windows; selecting on training MAE");
	}
	const auto& select_w = use_val ? val_w : train_w;

	OptimState state = make_optim_state(opts.lr, opts.gamma, opts.lr_start, opts.lr_step);
	std::mt19937_64 rng(opts.seed);
	std::vector<std::size_t> order(train_w.size());
	std::iota(order.begin(), order.end(), std::size_t{0});

	ParamStore& params = model.params();
	result.best_val_mae = opts.epochs > 0 ? split_mae(model, select_w) : 0.0;
	ParamStore best = params;
	std::size_t since_best = 0;

	for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
		state.schedule_step = epoch - 1;
		std::shuffle(order.begin(), order.end(), rng);
		double abs_sum = 0.0, count = 0.0;
		for (std::size_t b = 0; b < order.size(); b += opts.batch_size) {
			const std::size_t e = std::min(order.size(), b + opts.batch_size);
			double batch_count = 0.0;
			for (std::size_t i = b; i < e; ++i) {
				batch_count += mask_count(train_w[order[i]]);
			}
			if (batch_count == 0.0) {
				continue;
			}
			params.zero_grads();
			for (std::size_t i = b; i < e; ++i) {
				const Window& w = train_w[order[i]];
				Tape tape;
				Var y = model.forward(tape, w.input, w.calendar);
				Var loss = ops::masked_abs_sum(tape, y, w.target, w.target_mask);
				const double v = tape.value(loss)[0];
				if (!std::isfinite(v)) {
					throw NumericError("loss diverged at epoch " + std::to_string(epoch) + ", window starting at step " +
					                   std::to_string(w.start));
				}
				abs_sum += v;
				tape.backward(loss, Tensor({1}, 1.0 / batch_count));
			}
			count += batch_count;
			if (!grads_finite(params)) {
				throw NumericError("non-finite gradient at epoch " + std::to_string(epoch));
			}
			adam_step(params, state);
		}
		EpochRecord rec{epoch, abs_sum / count, split_mae(model, select_w), lr_at(state, epoch - 1)};
		if (!std::isfinite(rec.val_mae)) {
			throw NumericError("validation MAE is not finite at epoch " + std::to_string(epoch));
		}
		result.curve.push_back(rec);
		result.epochs_run = epoch;
		if (opts.on_epoch) {
			opts.on_epoch(rec);
		}
		if (rec.val_mae < result.best_val_mae) {
			result.best_val_mae = rec.val_mae;
			result.best_epoch = epoch;
			best = params;
			since_best = 0;
		} else if (++since_best >= opts.patience) {
			result.stopped_early = true;
			break;
		}
		if (opts.stop_when && opts.stop_when(rec)) {
			result.stopped_early = epoch < opts.epochs;
			break;
		}
	}
	if (opts.keep_best) {
		for (auto& [name, e] : params.entries()) {
			e.value = best.at(name).value;
		}
	}
	params.zero_grads();
	return result;
}

std::string loss_curve_csv(const std::vector<EpochRecord>& curve) {
	std::ostringstream os;
	os << "epoch,train_mae,val_mae,lr\n";
	for (const auto& r : curve) {
		os << r.epoch << ',' << csv::format_double(r.train_mae) << ',' << csv::format_double(r.val_mae) << ','
		   << csv::format_double(r.lr) << '\n';
	}
	return os.str();
}

// ----------------------------------------------------------- evaluation ----

const HorizonMetrics& MetricsReport::at_minutes(std::size_t minutes) const {
	for (const auto& h : horizons) {
		if (h.minutes == minutes) {
			return h;
		}
	}
	throw InputError("report has no " + std::to_string(minutes) + " min horizon");
}

namespace {

json horizon_json(const HorizonMetrics& h) {
	return {{"steps", h.steps},
	        {"minutes", h.minutes},
	        {"mae", h.metrics.mae},
	        {"rmse", h.metrics.rmse},
	        {"mape", h.metrics.mape},
	        {"count", h.metrics.count},
	        {"mape_skipped", h.metrics.mape_skipped}};
}

} // namespace

std::string MetricsReport::to_json() const {
	json hs = json::array();
	for (const auto& h : horizons) {
		hs.push_back(horizon_json(h));
	}
	json j = {{"variant", variant}, {"split", split},     {"seed", seed},
	          {"config_digest", config_digest}, {"windows", windows}, {"horizons", hs}};
	return j.dump(2);
}

MetricsReport evaluate(Model& model, const SpeedDataset& ds, SplitKind split) {
	const auto& cfg = model.config();
	if (ds.node_ids != model.graph().node_ids) {
		throw InputError("dataset sensors do not match the checkpoint graph");
	}
	if (!(ds.norm == model.norm())) {
		throw InputError("dataset normalisation stats do not match the checkpoint");
	}
	const DenseView dense = interpolate_training(ds);
	const auto windows = make_windows(ds, dense, split, cfg.input_window, cfg.output_window);
	if (windows.empty()) {
		throw DataError(std::string(to_string(split)) + " split has no complete windows");
	}
	const std::size_t n = model.nodes();
	const std::size_t nw = windows.size();
	MetricsReport report;
	report.variant = to_string(cfg.variant);
	report.split = to_string(split);
	report.seed = cfg.seed;
	report.config_digest = sha256_hex(cfg.to_json());
	report.windows = nw;

	const std::size_t nh = cfg.eval_horizons.size();
	std::vector<Tensor> pred(nh, Tensor({nw, n})), truth(nh, Tensor({nw, n})), mask(nh, Tensor({nw, n}));
	for (std::size_t w = 0; w < nw; ++w) {
		const auto f = model.predict(windows[w].input, windows[w].calendar);
		for (std::size_t h = 0; h < nh; ++h) {
			const std::size_t k = cfg.eval_horizons[h] - 1;
			for (std::size_t j = 0; j < n; ++j) {
				pred[h](w, j) = f.values(j, 0, k);
				truth[h](w, j) = windows[w].target(j, 0, k);
				mask[h](w, j) = windows[w].target_mask(j, 0, k);
			}
		}
	}
	const std::int64_t spacing = ds.spacing() > 0 ? ds.spacing() : 300;
	for (std::size_t h = 0; h < nh; ++h) {
		const std::size_t steps = cfg.eval_horizons[h];
		report.horizons.push_back(
		    {steps, static_cast<std::size_t>(steps * spacing / 60), masked_metrics(pred[h], truth[h], mask[h])});
	}
	return report;
}

// ------------------------------------------------------------- ablation ----

std::string ablation_label(const ModelConfig& config) {
	return std::string(to_string(config.variant)) + " L=" + std::to_string(config.num_blocks);
}

double AblationTable::mean_mae(std::size_t row, std::size_t minutes) const {
	for (const auto& h : rows.at(row).mean) {
		if (h.minutes == minutes) {
			return h.metrics.mae;
		}
	}
	throw InputError("ablation row has no " + std::to_string(minutes) + " min horizon");
}

double AblationTable::mae_improvement(std::size_t base, std::size_t ours, std::size_t minutes) const {
	return improvement(mean_mae(base, minutes), mean_mae(ours, minutes));
}

std::string AblationTable::to_json() const {
	json out = json::array();
	for (std::size_t r = 0; r < rows.size(); ++r) {
		const auto& row = rows[r];
		json mean = json::array();
		for (const auto& h : row.mean) {
			mean.push_back(horizon_json(h));
		}
		json seeds = json::array();
		for (const auto& run : row.runs) {
			seeds.push_back(run.seed);
		}
		json imp = json::object();
		for (std::size_t b = 0; b < rows.size(); ++b) {
			if (b == r) {
				continue;
			}
			json per = json::object();
			for (const auto& h : row.mean) {
				per[std::to_string(h.minutes) + "min"] = mae_improvement(b, r, h.minutes);
			}
			imp[rows[b].label] = per;
		}
		out.push_back({{"label", row.label},
		               {"variant", to_string(row.config.variant)},
		               {"blocks", row.config.num_blocks},
		               {"seeds", seeds},
		               {"mean", mean},
		               {"mae_improvement_over", imp}});
	}
	return json{{"rows", out}}.dump(2);
}

std::string AblationTable::to_csv() const {
	std::ostringstream os;
	os << "label,variant,blocks,minutes,mae,rmse,mape\n";
	for (const auto& row : rows) {
		for (const auto& h : row.mean) {
			os << row.label << ',' << to_string(row.config.variant) << ',' << row.config.num_blocks << ',' << h.minutes
			   << ',' << csv::format_double(h.metrics.mae) << ',' << csv::format_double(h.metrics.rmse) << ','
			   << csv::format_double(h.metrics.mape) << '\n';
		}
	}
	return os.str();
}

AblationTable ablation_run(const std::vector<ModelConfig>& configs, const SensorGraph& graph, const SpeedDataset& ds,
                           const std::vector<std::uint64_t>& seeds, const TrainOptions& opts, SplitKind eval_split) {
	require(!seeds.empty(), "ablation needs at least one seed");
	AblationTable table;
	for (const auto& base : configs) {
		AblationRow row;
		row.label = ablation_label(base);
		row.config = base;
		for (auto seed : seeds) {
			ModelConfig c = base;
			c.seed = seed;
			Model model(c, graph, ds.norm);
			TrainOptions o = opts;
			o.seed = seed;
			train(model, ds, o);
			row.runs.push_back(evaluate(model, ds, eval_split));
		}
		row.mean = row.runs.front().horizons;
		for (std::size_t h = 0; h < row.mean.size(); ++h) {
			MetricValues m{};
			m.count = row.runs.front().horizons[h].metrics.count;
			for (const auto& run : row.runs) {
				m.mae += run.horizons[h].metrics.mae;
				m.rmse += run.horizons[h].metrics.rmse;
				m.mape += run.horizons[h].metrics.mape;
				m.mape_skipped = run.horizons[h].metrics.mape_skipped;
			}
			const double k = static_cast<double>(row.runs.size());
			m.mae /= k;
			m.rmse /= k;
			m.mape /= k;
			row.mean[h].metrics = m;
		}
		table.rows.push_back(std::move(row));
	}
	return table;
}

} // namespace gtc
