#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "helpers.hpp"
#include "pipeline.hpp"

using nlohmann::json;

TEST_CASE("usage errors exit with code 2") {
	auto dir = helpers::scratch_dir("cli_usage");
	CHECK(pipeline::invoke({}).code == 2);
	CHECK(pipeline::invoke({"frobnicate"}).code == 2);
	CHECK(pipeline::invoke({"synth", "--out", (dir / "raw").string()}).code == 0);
	const auto raw = (dir / "raw").string();
	CHECK(pipeline::invoke({"prepare-data", "--speeds", raw + "/speeds.csv", "--distances", raw + "/distances.csv",
	                        "--kappa", "2000", "--out", (dir / "data").string()})
	          .code == 2);
	CHECK(pipeline::invoke({"train", "--data", raw, "--variant", "gt-whatever", "--out", (dir / "run").string()}).code ==
	      2);
	CHECK(pipeline::invoke({"emit-plot", "--kind", "correlation-circles", "--out", (dir / "x.csv").string()}).code == 2);
}

TEST_CASE("bad data exits with code 3") {
	auto dir = helpers::scratch_dir("cli_data");
	std::ofstream(dir / "speeds.csv") << "timestamp,a,b\nnot-a-time,1,2\n";
	std::ofstream(dir / "distances.csv") << "from,to,cost\na,b,100\n";
	auto s = pipeline::invoke({"prepare-data", "--speeds", (dir / "speeds.csv").string(), "--distances",
	                           (dir / "distances.csv").string(), "--sigma", "1000", "--kappa", "2000", "--out",
	                           (dir / "data").string()});
	CHECK(s.code == 3);
	CHECK_FALSE(s.err.empty());
}

TEST_CASE("pipeline runs and reruns byte for byte") {
	auto dir = helpers::scratch_dir("cli_pipeline");
	auto steps = pipeline::run_all(dir);
	REQUIRE(steps.size() == 8);
	for (const auto& s : steps) {
		INFO(s.args[0] << ": " << s.err);
		CHECK(s.code == 0);
	}
	const auto first = pipeline::snapshot(dir);
	for (const char* f : {"raw/manifest.json", "data/adjacency.csv", "run/checkpoint.bin", "run/loss.csv",
	                      "eval/metrics.json", "corr/report.json", "attention/scores.csv", "plots/pred.csv"}) {
		CHECK_MESSAGE(first.count(f) == 1, f);
	}

	auto metrics = json::parse(first.at("eval/metrics.json"));
	REQUIRE(metrics["horizons"].size() == 3);
	CHECK(metrics["horizons"][2]["minutes"] == 60);

	auto manifest = json::parse(first.at("run/manifest.json"));
	CHECK(manifest["command"] == "train");
	CHECK(manifest["wall_clock_seconds"].is_null());
	for (const auto& o : manifest["outputs"]) {
		CHECK(o["sha256"].get<std::string>().size() == 64);
	}
	CHECK_FALSE(manifest["inputs"].empty());

	std::filesystem::remove_all(dir);
	pipeline::run_all(dir);
	const auto second = pipeline::snapshot(dir);
	REQUIRE(second.size() == first.size());
	for (const auto& [path, bytes] : first) {
		CHECK_MESSAGE(second.at(path) == bytes, path);
	}
}

TEST_CASE("wall clock is recorded only when asked") {
	auto dir = helpers::scratch_dir("cli_wall");
	REQUIRE(pipeline::invoke({"--record-wall-clock", "synth", "--nodes", "4", "--steps", "50", "--out",
	                          (dir / "raw").string()})
	            .code == 0);
	auto m = json::parse(pipeline::snapshot(dir).at("raw/manifest.json"));
	CHECK(m["wall_clock_seconds"].is_number());
}
