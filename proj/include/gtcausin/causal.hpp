#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gtcausin/data.hpp"
#include "gtcausin/graph.hpp"

namespace gtc {

// Six consecutive variation slices of five perspectives (X, I1, O1, I2, O2).
constexpr std::size_t kCausalSlices = 6;
constexpr std::size_t kCausalPerspectives = 5;
constexpr std::size_t kCausalVariables = kCausalSlices * kCausalPerspectives;

using CausalVector = std::array<double, kCausalVariables>;

// "X(t)", "I1(t)", "O1(t)", "I2(t)", "O2(t)", "X(t+1)", ... "O2(t+5)".
// Variable v belongs to slice v / 5 and perspective v % 5.
const std::vector<std::string>& causal_variable_names();

// out[t] = series[t + 1] - series[t].
std::vector<double> speed_variation(std::span<const double> series);

// Variations of the node and its aggregated neighbourhoods at t .. t+5, using
// raw readings at t .. t+6. Empty when any reading of the node or of a node
// with nonzero weight in its I1/O1/I2/O2 rows is missing in that span.
std::optional<CausalVector> extract_variables(const SpeedDataset& ds, const TransitionSet& transitions,
                                              std::size_t node, std::size_t t);

enum class SampleSource { Random, Event };
const char* to_string(SampleSource s);
SampleSource parse_sample_source(const std::string& s);

struct CausalVariableBatch {
	Tensor rows;  // [S x 30]
	SampleSource source = SampleSource::Random;
	std::size_t size() const { return rows.empty() ? 0 : rows.dim(0); }
};

struct EventParams {
	// An event is a run of at least min_duration steps whose weighted
	// neighbourhood variation exceeds threshold_sigma training-split stds.
	double threshold_sigma = 3.0;
	std::size_t min_duration = 3;
	// Steps over which the variation is accumulated before thresholding.
	std::size_t span = 3;
	// Keep only the strongest events (0 = all).
	std::size_t max_events = 0;
};

struct TrafficEvent {
	std::size_t node = 0;
	std::size_t t = 0;         // first step of the run
	std::size_t duration = 0;
	double magnitude = 0.0;    // mean signed variation over the run
};

// Weighted neighbourhood variation u = X/2 + I1/4 + O1/4 of the span-step
// speed change, per [steps - span x nodes]; NaN where a reading is missing.
Tensor neighborhood_variation(const SpeedDataset& ds, const TransitionSet& transitions, std::size_t span);

// Sorted by |magnitude| descending, then time, then node.
std::vector<TrafficEvent> detect_events(const SpeedDataset& ds, const TransitionSet& transitions,
                                        const EventParams& params = {});

struct SampleOptions {
	std::size_t batch_size = 2000;
	std::size_t repeats = 100;
	SampleSource mode = SampleSource::Random;
	std::uint64_t seed = 0;
	EventParams events;
};

struct SampleResult {
	std::vector<CausalVariableBatch> batches;
	std::vector<std::string> warnings;
};

SampleResult sample_batches(const SpeedDataset& ds, const TransitionSet& transitions, const SampleOptions& opts);

enum class RelationKind { Pearson, ExternalIcd };
const char* to_string(RelationKind k);

struct RelationMatrix {
	Tensor c;    // [30 x 30] reported matrix
	Tensor sum;  // [30 x 30] sum of per-batch matrices
	RelationKind kind = RelationKind::Pearson;
	std::size_t repeats = 0;
	std::size_t rows = 0;
	std::vector<bool> zero_variance;  // per column
};

// c is the pooled Pearson matrix over all rows; sum adds the per-batch
// matrices. Zero-variance columns get 0 off the diagonal and are flagged.
RelationMatrix pearson_matrix(const std::vector<CausalVariableBatch>& batches);
// Pooled Pearson correlation of the columns of an [S x V] matrix.
Tensor pearson(const Tensor& rows, std::vector<bool>* zero_variance = nullptr);

struct LinkReport {
	double triangle_mean = 0.0;      // |r| over X-I1, X-O1, I1-O1 at equal slices
	double second_order_mean = 0.0;  // |r| over X-I2, X-O2 at equal slices
	double x_i1 = 0.0, x_o1 = 0.0, i1_o1 = 0.0, x_i2 = 0.0, x_o2 = 0.0;
	// Mean |r| between a variable and itself 1, 2 and 3 slices later.
	std::array<double, 3> self_lag{};
	std::string to_json() const;
};

LinkReport neighbor_link_report(const RelationMatrix& m);

struct DistributionSummary {
	std::vector<double> bin_edges;   // bins + 1 edges
	std::vector<std::size_t> counts;
	double mean = 0.0, std = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
	std::size_t n = 0;
};

DistributionSummary distribution_summary(std::span<const double> values, std::size_t bins = 20);

// One CSV per batch (batch_000.csv, ...) holding the 30 named columns.
void export_batches(const std::string& dir, const std::vector<CausalVariableBatch>& batches);
std::vector<CausalVariableBatch> import_batches(const std::string& dir);
void write_batch_csv(const std::string& path, const CausalVariableBatch& batch);
CausalVariableBatch read_batch_csv(const std::string& path);

// Header "variable,<30 names>", then one labelled row per variable.
void write_relation_csv(const std::string& path, const RelationMatrix& m);
RelationMatrix import_relation(const std::string& path);

} // namespace gtc
