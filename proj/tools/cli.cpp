#include "cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gtcausin/causal.hpp"
#include "gtcausin/csv.hpp"
#include "gtcausin/data.hpp"
#include "gtcausin/digest.hpp"
#include "gtcausin/error.hpp"
#include "gtcausin/graph.hpp"
#include "gtcausin/model.hpp"
#include "gtcausin/synthetic.hpp"
#include "gtcausin/train.hpp"

namespace gtc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ------------------------------------------------------------ manifest ----

struct Manifest {
	std::string command;
	json config = json::object();
	std::string config_path;
	std::uint64_t seed = 0;
	std::vector<std::string> inputs;
	std::vector<std::string> outputs;  // relative to the manifest directory
	bool record_wall_clock = false;
	std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
};

json digest_entry(const std::string& path, const std::string& shown) {
	return {{"path", shown}, {"sha256", sha256_file(path)}};
}

void write_manifest(const fs::path& dir, const Manifest& m, const std::string& name = "manifest.json") {
	json inputs = json::array();
	for (const auto& p : m.inputs) {
		if (fs::is_directory(p)) {
			std::vector<std::string> files;
			for (const auto& e : fs::directory_iterator(p)) {
				if (e.is_regular_file() && e.path().filename().string().find("manifest.json") == std::string::npos) {
					files.push_back(e.path().string());
				}
			}
			std::sort(files.begin(), files.end());
			for (const auto& f : files) {
				inputs.push_back(digest_entry(f, f));
			}
		} else {
			inputs.push_back(digest_entry(p, p));
		}
	}
	json outputs = json::array();
	for (const auto& p : m.outputs) {
		outputs.push_back(digest_entry((dir / p).string(), p));
	}
	json j = {{"command", m.command},
	          {"tool_version", kToolVersion},
	          {"config", m.config},
	          {"config_path", m.config_path.empty() ? json(nullptr) : json(m.config_path)},
	          {"seed", m.seed},
	          {"inputs", inputs},
	          {"outputs", outputs},
	          {"wall_clock_seconds", nullptr}};
	if (m.record_wall_clock) {
		j["wall_clock_seconds"] =
		    std::chrono::duration<double>(std::chrono::steady_clock::now() - m.started).count();
	}
	csv::write_text((dir / name).string(), j.dump(2) + "\n");
}

// --------------------------------------------------------- prepared data ----

struct Prepared {
	SpeedDataset ds;
	SensorGraph graph;
};

Prepared load_prepared(const fs::path& dir) {
	const fs::path meta_path = dir / "dataset.json";
	if (!fs::exists(meta_path)) {
		throw InputError("'" + dir.string() + "' is not a prepared data directory (no dataset.json)");
	}
	std::ifstream in(meta_path);
	json meta;
	try {
		meta = json::parse(in);
	} catch (const json::exception& e) {
		throw InputError("bad dataset.json: " + std::string(e.what()));
	}
	LoadOptions opts;
	opts.unit = meta.value("unit", opts.unit);
	opts.zero_is_missing = meta.value("zero_is_missing", opts.zero_is_missing);
	Prepared p;
	p.ds = load_speed_csv((dir / "speeds.csv").string(), opts);
	prepare_splits(p.ds);
	if (p.ds.split.train_end != meta.at("split").at("train_end").get<std::size_t>() ||
	    p.ds.split.val_end != meta.at("split").at("val_end").get<std::size_t>() ||
	    p.ds.norm.mean != meta.at("norm").at("mean").get<double>() ||
	    p.ds.norm.std != meta.at("norm").at("std").get<double>()) {
		throw InputError("dataset.json does not match speeds.csv in '" + dir.string() + "'");
	}
	p.graph = read_adjacency_csv((dir / "adjacency.csv").string());
	if (p.graph.node_ids != p.ds.node_ids) {
		throw InputError("adjacency.csv sensors do not match speeds.csv");
	}
	return p;
}

std::size_t resolve_station(const std::vector<std::string>& ids, const std::string& station) {
	for (std::size_t i = 0; i < ids.size(); ++i) {
		if (ids[i] == station) {
			return i;
		}
	}
	std::size_t idx = 0;
	const auto [ptr, ec] = std::from_chars(station.data(), station.data() + station.size(), idx);
	if (ec != std::errc() || ptr != station.data() + station.size()) {
		throw InputError("unknown station '" + station + "'");
	}
	if (idx >= ids.size()) {
		throw InputError("station index " + station + " out of range (" + std::to_string(ids.size()) + " sensors)");
	}
	return idx;
}

void ensure_dir(const fs::path& dir) {
	fs::create_directories(dir);
}

std::string read_text(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw InputError("cannot open '" + path + "'");
	}
	std::ostringstream os;
	os << in.rdbuf();
	return os.str();
}

// Fills a json object with only the options the user actually passed.
template <typename T>
void flag_over(json& cfg, CLI::App* app, const char* flag, const char* key, const T& value) {
	if (app->count(flag) > 0) {
		cfg[key] = value;
	}
}

// ------------------------------------------------------------- commands ----

struct SynthArgs {
	std::string kind = "planted";
	std::size_t nodes = 20;
	std::size_t steps = 2000;
	std::uint64_t seed = 0;
	double missing = 0.0;
	std::string out;
};

void cmd_synth(const SynthArgs& a, bool wall, std::ostream& out) {
	SyntheticGraphOptions g;
	g.nodes = a.nodes;
	g.seed = a.seed;
	SyntheticData d;
	if (a.kind == "planted") {
		PlantedOptions p;
		p.steps = a.steps;
		p.seed = a.seed;
		p.missing_rate = a.missing;
		d = make_planted(g, p);
	} else {
		PeriodicOptions p;
		p.steps = a.steps;
		p.seed = a.seed;
		d = make_periodic(g, p);
	}
	const fs::path dir(a.out);
	ensure_dir(dir);
	save_speed_csv((dir / "speeds.csv").string(), d.dataset);
	write_distance_csv((dir / "distances.csv").string(), d.distances);
	Manifest m;
	m.command = "synth";
	m.config = {{"kind", a.kind}, {"nodes", a.nodes}, {"steps", a.steps}, {"missing", a.missing},
	            {"sigma", d.sigma},  {"kappa", d.kappa}};
	m.seed = a.seed;
	m.outputs = {"speeds.csv", "distances.csv"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	out << "wrote " << a.nodes << " sensors x " << a.steps << " steps to " << dir.string() << "\n";
}

struct PrepareArgs {
	std::string speeds, distances, out, unit = "km/h";
	double sigma = 0.0, kappa = 0.0;
	bool zero_valid = false;
};

void cmd_prepare(const PrepareArgs& a, bool wall, std::ostream& out) {
	LoadOptions opts;
	opts.unit = a.unit;
	opts.zero_is_missing = !a.zero_valid;
	SpeedDataset ds = aggregate_5min(load_speed_csv(a.speeds, opts));
	prepare_splits(ds);
	const auto dist = read_distance_csv(a.distances);
	const SensorGraph graph = build_adjacency(ds.node_ids, dist, a.sigma, a.kappa);
	const DenseView dense = interpolate_training(ds);

	const fs::path dir(a.out);
	ensure_dir(dir);
	save_speed_csv((dir / "speeds.csv").string(), ds);
	write_adjacency_csv((dir / "adjacency.csv").string(), graph);
	std::size_t observed = 0;
	for (auto o : ds.observed) {
		observed += o;
	}
	json meta = {{"unit", ds.unit},
	             {"zero_is_missing", ds.zero_is_missing},
	             {"steps", ds.steps()},
	             {"nodes", ds.nodes()},
	             {"node_ids", ds.node_ids},
	             {"spacing_seconds", ds.spacing()},
	             {"first_timestamp", format_timestamp(ds.timestamps.front())},
	             {"last_timestamp", format_timestamp(ds.timestamps.back())},
	             {"observed_entries", observed},
	             {"split", {{"train_end", ds.split.train_end}, {"val_end", ds.split.val_end}, {"order", "train|val|test"}}},
	             {"norm", {{"mean", ds.norm.mean}, {"std", ds.norm.std}}},
	             {"sigma", a.sigma},
	             {"kappa", a.kappa},
	             {"warnings", dense.warnings},
	             {"rejected_sensors", dense.rejected_sensors}};
	csv::write_text((dir / "dataset.json").string(), meta.dump(2) + "\n");
	Manifest m;
	m.command = "prepare-data";
	m.config = {{"sigma", a.sigma}, {"kappa", a.kappa}, {"unit", a.unit}, {"zero_is_missing", !a.zero_valid}};
	m.inputs = {a.speeds, a.distances};
	m.outputs = {"speeds.csv", "adjacency.csv", "dataset.json"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	for (const auto& w : dense.warnings) {
		out << "warning: " << w << "\n";
	}
	out << "prepared " << ds.nodes() << " sensors, " << ds.steps() << " steps (train " << ds.split.train_end
	    << ", val " << ds.split.val_end - ds.split.train_end << ", test " << ds.steps() - ds.split.val_end << ")\n";
}

struct TrainArgs {
	std::string data, out, config_path;
	std::string variant = "gt-causin";
	std::size_t blocks = 4, epochs = 100, batch = 16, patience = 15;
	std::uint64_t seed = 0;
	double lr = 0.004, gamma = 0.5;
	std::size_t lr_start = 180, lr_step = 50;
};

// Defaults, then the config file, then explicit flags.
json effective_train_config(const TrainArgs& a, CLI::App* app) {
	const TrainArgs defaults;
	json cfg = {{"variant", defaults.variant}, {"blocks", defaults.blocks},     {"epochs", defaults.epochs},
	            {"batch", defaults.batch},     {"patience", defaults.patience}, {"seed", defaults.seed},
	            {"lr", defaults.lr},           {"gamma", defaults.gamma},       {"lr_start", defaults.lr_start},
	            {"lr_step", defaults.lr_step}};
	if (!a.config_path.empty()) {
		json file;
		try {
			file = json::parse(read_text(a.config_path));
		} catch (const json::exception& e) {
			throw InputError("bad config file '" + a.config_path + "': " + e.what());
		}
		for (auto it = file.begin(); it != file.end(); ++it) {
			if (!cfg.contains(it.key())) {
				throw InputError("unknown config key '" + it.key() + "'");
			}
			cfg[it.key()] = it.value();
		}
	}
	flag_over(cfg, app, "--variant", "variant", a.variant);
	flag_over(cfg, app, "--blocks", "blocks", a.blocks);
	flag_over(cfg, app, "--epochs", "epochs", a.epochs);
	flag_over(cfg, app, "--batch", "batch", a.batch);
	flag_over(cfg, app, "--patience", "patience", a.patience);
	flag_over(cfg, app, "--seed", "seed", a.seed);
	flag_over(cfg, app, "--lr", "lr", a.lr);
	flag_over(cfg, app, "--gamma", "gamma", a.gamma);
	flag_over(cfg, app, "--lr-start", "lr_start", a.lr_start);
	flag_over(cfg, app, "--lr-step", "lr_step", a.lr_step);
	return cfg;
}

void cmd_train(const TrainArgs& a, CLI::App* app, bool wall, std::ostream& out) {
	const json cfg = effective_train_config(a, app);
	const Prepared p = load_prepared(a.data);
	ModelConfig mc;
	mc.variant = parse_variant(cfg.at("variant"));
	mc.num_blocks = cfg.at("blocks");
	mc.seed = cfg.at("seed");
	TrainOptions opts;
	opts.epochs = cfg.at("epochs");
	opts.batch_size = cfg.at("batch");
	opts.patience = cfg.at("patience");
	opts.seed = mc.seed;
	opts.lr = cfg.at("lr");
	opts.gamma = cfg.at("gamma");
	opts.lr_start = cfg.at("lr_start");
	opts.lr_step = cfg.at("lr_step");
	opts.on_epoch = [&out](const EpochRecord& r) {
		out << "epoch " << r.epoch << "  train_mae " << r.train_mae << "  val_mae " << r.val_mae << "  lr " << r.lr
		    << "\n";
	};
	Model model(mc, p.graph, p.ds.norm);
	const TrainResult result = train(model, p.ds, opts);
	const fs::path dir(a.out);
	ensure_dir(dir);
	model.save((dir / "checkpoint.bin").string());
	csv::write_text((dir / "loss.csv").string(), loss_curve_csv(result.curve));
	Manifest m;
	m.command = "train";
	m.config = cfg;
	m.config["model"] = json::parse(mc.to_json());
	m.config["best_epoch"] = result.best_epoch;
	m.config["stopped_early"] = result.stopped_early;
	m.config_path = a.config_path;
	m.seed = mc.seed;
	m.inputs = {a.data};
	m.outputs = {"checkpoint.bin", "loss.csv"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	for (const auto& w : result.warnings) {
		out << "warning: " << w << "\n";
	}
	out << "best epoch " << result.best_epoch << ", selection MAE " << result.best_val_mae << "\n";
}

struct EvalArgs {
	std::string checkpoint, data, split = "test", out;
};

void cmd_evaluate(const EvalArgs& a, bool wall, std::ostream& out) {
	Model model = Model::load(a.checkpoint);
	const Prepared p = load_prepared(a.data);
	const MetricsReport r = evaluate(model, p.ds, parse_split(a.split));
	const fs::path dir(a.out);
	ensure_dir(dir);
	csv::write_text((dir / "metrics.json").string(), r.to_json() + "\n");
	Manifest m;
	m.command = "evaluate";
	m.config = {{"split", a.split}};
	m.seed = model.config().seed;
	m.inputs = {a.checkpoint, a.data};
	m.outputs = {"metrics.json"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	for (const auto& h : r.horizons) {
		out << h.minutes << " min: MAE " << h.metrics.mae << "  RMSE " << h.metrics.rmse << "  MAPE "
		    << 100.0 * h.metrics.mape << "%  (n=" << h.metrics.count << ")\n";
	}
}

struct ExtractArgs {
	std::string data, graph, mode = "random", out;
	std::size_t batch = 2000, repeats = 100;
	std::uint64_t seed = 0;
	double threshold = 3.0;
	std::size_t duration = 3;
};

void cmd_causal_extract(const ExtractArgs& a, bool wall, std::ostream& out) {
	Prepared p = load_prepared(a.data);
	if (!a.graph.empty()) {
		p.graph = read_adjacency_csv(a.graph);
		if (p.graph.node_ids != p.ds.node_ids) {
			throw InputError("graph sensors do not match the dataset");
		}
	}
	const TransitionSet ts = build_transitions(p.graph);
	SampleOptions opts;
	opts.batch_size = a.batch;
	opts.repeats = a.repeats;
	opts.mode = parse_sample_source(a.mode);
	opts.seed = a.seed;
	opts.events.threshold_sigma = a.threshold;
	opts.events.min_duration = a.duration;
	const SampleResult r = sample_batches(p.ds, ts, opts);
	const fs::path dir(a.out);
	ensure_dir(dir / "batches");
	export_batches((dir / "batches").string(), r.batches);
	Manifest m;
	m.command = "causal-extract";
	m.config = {{"mode", a.mode},           {"batch", a.batch},
	            {"repeats", a.repeats},     {"event_threshold_sigma", a.threshold},
	            {"event_min_duration", a.duration}, {"warnings", r.warnings}};
	m.seed = a.seed;
	m.inputs = {a.data};
	if (!a.graph.empty()) {
		m.inputs.push_back(a.graph);
	}
	for (std::size_t i = 0; i < r.batches.size(); ++i) {
		char name[40];
		std::snprintf(name, sizeof name, "batches/batch_%03zu.csv", i);
		m.outputs.push_back(name);
	}
	if (opts.mode == SampleSource::Event) {
		std::ostringstream os;
		os << "node,station,t,timestamp,duration,magnitude\n";
		for (const auto& e : detect_events(p.ds, ts, opts.events)) {
			os << e.node << ',' << p.ds.node_ids[e.node] << ',' << e.t << ',' << format_timestamp(p.ds.timestamps[e.t])
			   << ',' << e.duration << ',' << csv::format_double(e.magnitude) << '\n';
		}
		csv::write_text((dir / "events.csv").string(), os.str());
		m.outputs.push_back("events.csv");
	}
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	for (const auto& w : r.warnings) {
		out << "warning: " << w << "\n";
	}
	std::size_t rows = 0;
	for (const auto& b : r.batches) {
		rows += b.size();
	}
	out << "wrote " << r.batches.size() << " batches, " << rows << " rows\n";
}

struct CorrelateArgs {
	std::string batches, out;
	std::size_t bins = 20;
};

void cmd_correlate(const CorrelateArgs& a, bool wall, std::ostream& out) {
	// Accepts either the batch directory or the causal-extract output above it.
	const fs::path nested = fs::path(a.batches) / "batches";
	const std::string source = fs::is_directory(nested) ? nested.string() : a.batches;
	const auto batches = import_batches(source);
	const RelationMatrix rm = pearson_matrix(batches);
	const LinkReport report = neighbor_link_report(rm);
	std::vector<double> x_var;
	for (const auto& b : batches) {
		for (std::size_t i = 0; i < b.size(); ++i) {
			x_var.push_back(b.rows(i, 0));
		}
	}
	const auto dist = distribution_summary(x_var, a.bins);
	const fs::path dir(a.out);
	ensure_dir(dir);
	write_relation_csv((dir / "relation.csv").string(), rm);
	RelationMatrix mean = rm;
	if (rm.repeats > 0) {
		for (std::size_t i = 0; i < mean.c.size(); ++i) {
			mean.c[i] = rm.sum[i] / static_cast<double>(rm.repeats);
		}
	}
	write_relation_csv((dir / "relation_batch_mean.csv").string(), mean);
	json flagged = json::array();
	for (std::size_t i = 0; i < rm.zero_variance.size(); ++i) {
		if (rm.zero_variance[i]) {
			flagged.push_back(causal_variable_names()[i]);
		}
	}
	json j = json::parse(report.to_json());
	j["rows"] = rm.rows;
	j["repeats"] = rm.repeats;
	j["zero_variance_columns"] = flagged;
	j["x_variation_distribution"] = {{"mean", dist.mean},         {"std", dist.std},
	                                 {"skewness", dist.skewness}, {"excess_kurtosis", dist.excess_kurtosis},
	                                 {"bin_edges", dist.bin_edges}, {"counts", dist.counts}};
	csv::write_text((dir / "report.json").string(), j.dump(2) + "\n");
	Manifest m;
	m.command = "correlate";
	m.config = {{"bins", a.bins}};
	m.inputs = {source};
	m.outputs = {"relation.csv", "relation_batch_mean.csv", "report.json"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	out << "rows " << rm.rows << "  triangle |r| " << report.triangle_mean << "  second-order |r| "
	    << report.second_order_mean << "\n";
}

struct AttentionArgs {
	std::string checkpoint, data, station = "0", out;
	std::size_t t = 0;
};

void cmd_inspect_attention(const AttentionArgs& a, bool wall, std::ostream& out) {
	Model model = Model::load(a.checkpoint);
	const Prepared p = load_prepared(a.data);
	if (p.ds.node_ids != model.graph().node_ids) {
		throw InputError("dataset sensors do not match the checkpoint graph");
	}
	const std::size_t station = resolve_station(p.ds.node_ids, a.station);
	const DenseView dense = interpolate_training(p.ds);
	const auto& cfg = model.config();
	const Window w = make_window(p.ds, dense, a.t, cfg.input_window, cfg.output_window);
	const AttentionTrace tr = model.attention(w.input, w.calendar);
	const auto mode = cfg.variant == Variant::CausIn ? TokenMode::Neighbors : TokenMode::Repeated;
	const StationAttention sa = station_attention(tr, p.ds.node_ids, station, mode);
	const fs::path path(a.out);
	if (path.has_parent_path()) {
		ensure_dir(path.parent_path());
	}
	csv::write_text(path.string(), attention_csv(sa));
	Manifest m;
	m.command = "inspect-attention";
	m.config = {{"station", p.ds.node_ids[station]}, {"t", a.t}};
	m.seed = cfg.seed;
	m.inputs = {a.checkpoint, a.data};
	m.outputs = {path.filename().string()};
	m.record_wall_clock = wall;
	write_manifest(path.has_parent_path() ? path.parent_path() : fs::path("."), m, path.filename().string() + ".manifest.json");
	out << "attention rows for " << p.ds.node_ids[station] << " written to " << path.string() << "\n";
}

struct AblateArgs {
	std::string data, out;
	std::vector<std::string> variants{"gt-causin"};
	std::vector<std::size_t> blocks{4};
	std::vector<std::uint64_t> seeds{0};
	std::size_t epochs = 100, batch = 16, patience = 15;
	double lr = 0.004;
	std::string split = "test";
};

void cmd_ablate(const AblateArgs& a, bool wall, std::ostream& out) {
	const Prepared p = load_prepared(a.data);
	std::vector<ModelConfig> configs;
	for (const auto& v : a.variants) {
		for (auto L : a.blocks) {
			ModelConfig c;
			c.variant = parse_variant(v);
			c.num_blocks = L;
			configs.push_back(c);
		}
	}
	TrainOptions opts;
	opts.epochs = a.epochs;
	opts.batch_size = a.batch;
	opts.patience = a.patience;
	opts.lr = a.lr;
	const AblationTable t = ablation_run(configs, p.graph, p.ds, a.seeds, opts, parse_split(a.split));
	const fs::path dir(a.out);
	ensure_dir(dir);
	csv::write_text((dir / "ablation.json").string(), t.to_json() + "\n");
	csv::write_text((dir / "ablation.csv").string(), t.to_csv());
	Manifest m;
	m.command = "ablate";
	m.config = {{"variants", a.variants}, {"blocks", a.blocks},   {"seeds", a.seeds}, {"epochs", a.epochs},
	            {"batch", a.batch},       {"patience", a.patience}, {"lr", a.lr},     {"split", a.split}};
	m.seed = a.seeds.front();
	m.inputs = {a.data};
	m.outputs = {"ablation.json", "ablation.csv"};
	m.record_wall_clock = wall;
	write_manifest(dir, m);
	for (std::size_t r = 0; r < t.rows.size(); ++r) {
		out << t.rows[r].label << "  60 min MAE " << t.mean_mae(r, 60) << "\n";
	}
}

struct PlotArgs {
	std::string kind, checkpoint, data, split = "test", station = "0", relation, icd, attention, ablation, out;
	std::size_t t = 0;
};

std::string plot_prediction(const PlotArgs& a, std::vector<std::string>& inputs) {
	if (a.checkpoint.empty() || a.data.empty()) {
		throw CLI::ValidationError("prediction-vs-truth needs --checkpoint and --data");
	}
	Model model = Model::load(a.checkpoint);
	const Prepared p = load_prepared(a.data);
	if (p.ds.node_ids != model.graph().node_ids) {
		throw InputError("dataset sensors do not match the checkpoint graph");
	}
	inputs = {a.checkpoint, a.data};
	const std::size_t station = resolve_station(p.ds.node_ids, a.station);
	const DenseView dense = interpolate_training(p.ds);
	const auto& cfg = model.config();
	const auto windows = make_windows(p.ds, dense, parse_split(a.split), cfg.input_window, cfg.output_window);
	std::ostringstream os;
	os << "timestamp,station,horizon_minutes,prediction,truth,observed\n";
	const std::int64_t spacing = p.ds.spacing() > 0 ? p.ds.spacing() : 300;
	for (auto h : cfg.eval_horizons) {
		for (const auto& w : windows) {
			const auto f = model.predict(w.input, w.calendar);
			const std::size_t t = w.start + cfg.input_window + h - 1;
			const bool obs = w.target_mask(station, 0, h - 1) != 0.0;
			os << format_timestamp(p.ds.timestamps[t]) << ',' << p.ds.node_ids[station] << ',' << h * spacing / 60 << ','
			   << csv::format_double(f.values(station, 0, h - 1)) << ','
			   << (obs ? csv::format_double(w.target(station, 0, h - 1)) : "") << ',' << (obs ? 1 : 0) << '\n';
		}
	}
	return os.str();
}

std::string plot_correlation(const PlotArgs& a, std::vector<std::string>& inputs) {
	if (a.relation.empty()) {
		throw CLI::ValidationError("correlation-circles needs --relation");
	}
	const RelationMatrix r = import_relation(a.relation);
	inputs = {a.relation};
	RelationMatrix icd;
	if (!a.icd.empty()) {
		icd = import_relation(a.icd);
		inputs.push_back(a.icd);
	}
	const auto& names = causal_variable_names();
	std::ostringstream os;
	os << "variable_a,variable_b,pearson_r,abs_r" << (a.icd.empty() ? "" : ",icd") << '\n';
	for (std::size_t i = 0; i < kCausalVariables; ++i) {
		for (std::size_t j = i + 1; j < kCausalVariables; ++j) {
			os << names[i] << ',' << names[j] << ',' << csv::format_double(r.c(i, j)) << ','
			   << csv::format_double(std::abs(r.c(i, j)));
			if (!a.icd.empty()) {
				os << ',' << csv::format_double(icd.c(i, j));
			}
			os << '\n';
		}
	}
	return os.str();
}

std::string plot_attention(const PlotArgs& a, std::vector<std::string>& inputs) {
	if (a.attention.empty()) {
		throw CLI::ValidationError("attention-heatmap needs --attention (output of inspect-attention)");
	}
	inputs = {a.attention};
	const auto lines = csv::read_lines(a.attention);
	if (lines.empty() || lines[0] != "row_token,token_label,score,weight") {
		throw InputError("'" + a.attention + "' is not an inspect-attention CSV");
	}
	std::vector<std::string> rows, cols;
	std::ostringstream os;
	os << "row_index,column_index,row_token,column_token,weight,score\n";
	for (std::size_t i = 1; i < lines.size(); ++i) {
		const auto f = csv::split(lines[i]);
		if (f.size() != 4) {
			throw InputError("'" + a.attention + "' line " + std::to_string(i + 1) + ": expected 4 fields");
		}
		auto index_of = [](std::vector<std::string>& v, const std::string& s) {
			auto it = std::find(v.begin(), v.end(), s);
			if (it == v.end()) {
				v.push_back(s);
				return v.size() - 1;
			}
			return static_cast<std::size_t>(it - v.begin());
		};
		const std::size_t r = index_of(rows, f[0]);
		const std::size_t c = index_of(cols, f[1]);
		os << r << ',' << c << ',' << f[0] << ',' << f[1] << ',' << f[3] << ',' << f[2] << '\n';
	}
	return os.str();
}

std::string plot_lsweep(const PlotArgs& a, std::vector<std::string>& inputs) {
	if (a.ablation.empty()) {
		throw CLI::ValidationError("l-sweep needs --ablation (ablation.json from the ablate command)");
	}
	inputs = {a.ablation};
	json j;
	try {
		j = json::parse(read_text(a.ablation));
	} catch (const json::exception& e) {
		throw InputError("bad ablation file: " + std::string(e.what()));
	}
	std::ostringstream os;
	os << "variant,blocks,minutes,mae,rmse,mape\n";
	for (const auto& row : j.at("rows")) {
		for (const auto& h : row.at("mean")) {
			os << row.at("variant").get<std::string>() << ',' << row.at("blocks").get<std::size_t>() << ','
			   << h.at("minutes").get<std::size_t>() << ',' << csv::format_double(h.at("mae").get<double>()) << ','
			   << csv::format_double(h.at("rmse").get<double>()) << ','
			   << csv::format_double(h.at("mape").get<double>()) << '\n';
		}
	}
	return os.str();
}

void cmd_emit_plot(const PlotArgs& a, bool wall, std::ostream& out) {
	std::vector<std::string> inputs;
	std::string body;
	if (a.kind == "prediction-vs-truth") {
		body = plot_prediction(a, inputs);
	} else if (a.kind == "correlation-circles") {
		body = plot_correlation(a, inputs);
	} else if (a.kind == "attention-heatmap") {
		body = plot_attention(a, inputs);
	} else {
		body = plot_lsweep(a, inputs);
	}
	const fs::path path(a.out);
	if (path.has_parent_path()) {
		ensure_dir(path.parent_path());
	}
	csv::write_text(path.string(), body);
	Manifest m;
	m.command = "emit-plot";
	m.config = {{"kind", a.kind}, {"split", a.split}, {"station", a.station}};
	m.inputs = inputs;
	m.outputs = {path.filename().string()};
	m.record_wall_clock = wall;
	write_manifest(path.has_parent_path() ? path.parent_path() : fs::path("."), m, path.filename().string() + ".manifest.json");
	out << a.kind << " data written to " << path.string() << "\n";
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
	CLI::App app{"GT-CausIn traffic forecasting toolkit", "gtcausin"};
	app.require_subcommand(1);
	app.set_version_flag("--version", kToolVersion);
	bool wall = false;
	app.add_flag("--record-wall-clock", wall, "Store elapsed time in manifests (breaks byte-identical reruns)");

	SynthArgs sa;
	auto* synth = app.add_subcommand("synth", "Generate a synthetic speed dataset and distance table");
	synth->add_option("--kind", sa.kind, "planted or periodic")->check(CLI::IsMember({"planted", "periodic"}));
	synth->add_option("--nodes", sa.nodes)->check(CLI::Range(2, 100000));
	synth->add_option("--steps", sa.steps)->check(CLI::Range(2, 100000000));
	synth->add_option("--seed", sa.seed);
	synth->add_option("--missing", sa.missing, "Fraction of readings dropped")->check(CLI::Range(0.0, 0.99));
	synth->add_option("--out", sa.out)->required();

	PrepareArgs pa;
	auto* prep = app.add_subcommand("prepare-data", "Aggregate, split, normalise and build the sensor graph");
	prep->add_option("--speeds", pa.speeds)->required()->check(CLI::ExistingFile);
	prep->add_option("--distances", pa.distances)->required()->check(CLI::ExistingFile);
	prep->add_option("--sigma", pa.sigma)->required()->check(CLI::PositiveNumber);
	prep->add_option("--kappa", pa.kappa)->required()->check(CLI::PositiveNumber);
	prep->add_option("--unit", pa.unit);
	prep->add_flag("--zero-valid", pa.zero_valid, "Treat literal 0 readings as observed");
	prep->add_option("--out", pa.out)->required();

	TrainArgs ta;
	auto* tr = app.add_subcommand("train", "Train a model variant");
	tr->add_option("--data", ta.data)->required()->check(CLI::ExistingDirectory);
	tr->add_option("--config", ta.config_path, "JSON file with option defaults")->check(CLI::ExistingFile);
	tr->add_option("--variant", ta.variant)
	    ->check(CLI::IsMember({"gt-causin", "gt-nocausin", "gt-badcausin"}, CLI::ignore_case));
	tr->add_option("--blocks", ta.blocks)->check(CLI::Range(1, 31));
	tr->add_option("--epochs", ta.epochs);
	tr->add_option("--batch", ta.batch)->check(CLI::PositiveNumber);
	tr->add_option("--patience", ta.patience);
	tr->add_option("--seed", ta.seed);
	tr->add_option("--lr", ta.lr)->check(CLI::PositiveNumber);
	tr->add_option("--gamma", ta.gamma)->check(CLI::Range(0.0, 1.0));
	tr->add_option("--lr-start", ta.lr_start)->check(CLI::PositiveNumber);
	tr->add_option("--lr-step", ta.lr_step)->check(CLI::PositiveNumber);
	tr->add_option("--out", ta.out)->required();

	EvalArgs ea;
	auto* ev = app.add_subcommand("evaluate", "Masked metrics at 15/30/60 minutes");
	ev->add_option("--checkpoint", ea.checkpoint)->required()->check(CLI::ExistingFile);
	ev->add_option("--data", ea.data)->required()->check(CLI::ExistingDirectory);
	ev->add_option("--split", ea.split)->check(CLI::IsMember({"train", "val", "test"}));
	ev->add_option("--out", ea.out)->required();

	ExtractArgs xa;
	auto* ex = app.add_subcommand("causal-extract", "Sample batches of the 30 causal variables");
	ex->add_option("--data", xa.data)->required()->check(CLI::ExistingDirectory);
	ex->add_option("--graph", xa.graph, "Adjacency CSV (defaults to the data directory's)")->check(CLI::ExistingFile);
	ex->add_option("--mode", xa.mode)->check(CLI::IsMember({"random", "event"}));
	ex->add_option("--batch", xa.batch)->check(CLI::PositiveNumber);
	ex->add_option("--repeats", xa.repeats)->check(CLI::PositiveNumber);
	ex->add_option("--seed", xa.seed);
	ex->add_option("--event-threshold", xa.threshold, "In training-split standard deviations")
	    ->check(CLI::PositiveNumber);
	ex->add_option("--event-duration", xa.duration)->check(CLI::PositiveNumber);
	ex->add_option("--out", xa.out)->required();

	CorrelateArgs ca;
	auto* co = app.add_subcommand("correlate", "Pooled Pearson matrix and neighbour link report");
	co->add_option("--batches", ca.batches)->required()->check(CLI::ExistingDirectory);
	co->add_option("--bins", ca.bins)->check(CLI::PositiveNumber);
	co->add_option("--out", ca.out)->required();

	AttentionArgs aa;
	auto* ia = app.add_subcommand("inspect-attention", "Attention scores of one station's tokens");
	ia->add_option("--checkpoint", aa.checkpoint)->required()->check(CLI::ExistingFile);
	ia->add_option("--data", aa.data)->required()->check(CLI::ExistingDirectory);
	ia->add_option("--station", aa.station, "Sensor id or index");
	ia->add_option("--t", aa.t, "Index of the window's first input step");
	ia->add_option("--out", aa.out)->required();

	AblateArgs ba;
	auto* ab = app.add_subcommand("ablate", "Train and compare variants and block counts over seeds");
	ab->add_option("--data", ba.data)->required()->check(CLI::ExistingDirectory);
	ab->add_option("--variants", ba.variants)
	    ->delimiter(',')
	    ->check(CLI::IsMember({"gt-causin", "gt-nocausin", "gt-badcausin"}, CLI::ignore_case));
	ab->add_option("--blocks", ba.blocks)->delimiter(',')->check(CLI::Range(1, 31));
	ab->add_option("--seeds", ba.seeds)->delimiter(',');
	ab->add_option("--epochs", ba.epochs);
	ab->add_option("--batch", ba.batch)->check(CLI::PositiveNumber);
	ab->add_option("--patience", ba.patience);
	ab->add_option("--lr", ba.lr)->check(CLI::PositiveNumber);
	ab->add_option("--split", ba.split)->check(CLI::IsMember({"train", "val", "test"}));
	ab->add_option("--out", ba.out)->required();

	PlotArgs la;
	auto* ep = app.add_subcommand("emit-plot", "Write plot-ready CSV data");
	ep->add_option("--kind", la.kind)
	    ->required()
	    ->check(CLI::IsMember({"prediction-vs-truth", "correlation-circles", "attention-heatmap", "l-sweep"}));
	ep->add_option("--checkpoint", la.checkpoint)->check(CLI::ExistingFile);
	ep->add_option("--data", la.data)->check(CLI::ExistingDirectory);
	ep->add_option("--split", la.split)->check(CLI::IsMember({"train", "val", "test"}));
	ep->add_option("--station", la.station);
	ep->add_option("--relation", la.relation)->check(CLI::ExistingFile);
	ep->add_option("--icd", la.icd, "Optional external relation matrix")->check(CLI::ExistingFile);
	ep->add_option("--attention", la.attention)->check(CLI::ExistingFile);
	ep->add_option("--ablation", la.ablation)->check(CLI::ExistingFile);
	ep->add_option("--out", la.out)->required();

	try {
		std::vector<std::string> rev(args.rbegin(), args.rend());
		app.parse(rev);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e, out, err);
		return code == 0 ? kExitOk : kExitUsage;
	}

	try {
		if (synth->parsed()) {
			cmd_synth(sa, wall, out);
		} else if (prep->parsed()) {
			cmd_prepare(pa, wall, out);
		} else if (tr->parsed()) {
			cmd_train(ta, tr, wall, out);
		} else if (ev->parsed()) {
			cmd_evaluate(ea, wall, out);
		} else if (ex->parsed()) {
			cmd_causal_extract(xa, wall, out);
		} else if (co->parsed()) {
			cmd_correlate(ca, wall, out);
		} else if (ia->parsed()) {
			cmd_inspect_attention(aa, wall, out);
		} else if (ab->parsed()) {
			cmd_ablate(ba, wall, out);
		} else if (ep->parsed()) {
			cmd_emit_plot(la, wall, out);
		}
	} catch (const CLI::ValidationError& e) {
		err << "usage error: " << e.what() << "\n";
		return kExitUsage;
	} catch (const NumericError& e) {
		err << "numeric failure: " << e.what() << "\n";
		return kExitNumeric;
	} catch (const InputError& e) {
		err << "error: " << e.what() << "\n";
		return kExitData;
	} catch (const DataError& e) {
		err << "data error: " << e.what() << "\n";
		return kExitData;
	} catch (const std::exception& e) {
		err << "error: " << e.what() << "\n";
		return kExitData;
	}
	return kExitOk;
}

} // namespace gtc::cli
