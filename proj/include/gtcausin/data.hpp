#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gtcausin/tensor.hpp"

namespace gtc {

// ---------------------------------------------------------------- time ----

// Seconds since 1970-01-01T00:00:00 (no time zone handling).
using Timestamp = std::int64_t;

// Accepts "YYYY-MM-DD HH:MM:SS" or "YYYY-MM-DDTHH:MM:SS", optional trailing 'Z'.
Timestamp parse_timestamp(const std::string& s);
std::string format_timestamp(Timestamp ts);
// Monday = 0 ... Sunday = 6.
int day_of_week(Timestamp ts);
// January = 0 ... December = 11.
int month_of_year(Timestamp ts);
bool is_weekend(Timestamp ts);

// ------------------------------------------------------------- dataset ----

struct NormStats {
	double mean = 0.0;
	double std = 1.0;
	friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Chronological layout: [0, train_end) train, [train_end, val_end) validation,
// [val_end, steps) test.
struct SplitIndices {
	std::size_t train_end = 0;
	std::size_t val_end = 0;
};

enum class SplitKind { Train, Val, Test };
const char* to_string(SplitKind s);
SplitKind parse_split(const std::string& s);

struct SpeedDataset {
	std::vector<Timestamp> timestamps;
	std::vector<std::string> node_ids;
	// [steps x nodes] raw readings; entries where observed == 0 hold 0.
	Tensor speeds;
	std::vector<std::uint8_t> observed;
	std::string unit = "km/h";
	bool zero_is_missing = true;
	NormStats norm;
	SplitIndices split;

	std::size_t steps() const noexcept { return timestamps.size(); }
	std::size_t nodes() const noexcept { return node_ids.size(); }
	bool is_observed(std::size_t t, std::size_t n) const { return observed[t * nodes() + n] != 0; }
	double speed(std::size_t t, std::size_t n) const { return speeds(t, n); }
	// Half-open index range of a split.
	std::pair<std::size_t, std::size_t> range(SplitKind s) const;
	// Seconds between consecutive timestamps (0 for fewer than two steps).
	std::int64_t spacing() const;
};

struct LoadOptions {
	// Literal 0 readings count as missing (empty cells always do).
	bool zero_is_missing = true;
	std::string unit = "km/h";
};

SpeedDataset load_speed_csv(const std::string& path, const LoadOptions& opts = {});
SpeedDataset parse_speed_csv(const std::vector<std::string>& lines, const LoadOptions& opts = {});
void save_speed_csv(const std::string& path, const SpeedDataset& ds);

// Averages observed readings into 5-minute windows aligned to the clock.
SpeedDataset aggregate_5min(const SpeedDataset& ds);

// 80 / 10 / 10 chronological split.
SplitIndices chronological_split(std::size_t steps);
// Mean and population std of observed training-split readings.
NormStats compute_norm_stats(const SpeedDataset& ds);
// Sets split and norm in place.
void prepare_splits(SpeedDataset& ds);

struct DenseView {
	// [steps x nodes], missing entries linearly filled within each split.
	Tensor speeds;
	std::vector<std::string> warnings;
	std::vector<std::size_t> rejected_sensors;
};

// Per-sensor linear interpolation across gaps, done separately inside each
// split so no split borrows values from another. Leading and trailing gaps take
// the nearest observed value. A sensor with no readings in a split is filled
// with the training mean and reported.
DenseView interpolate_training(const SpeedDataset& ds);

// Calendar metadata for the first forecast step of a window.
struct Calendar {
	int day_of_week = 0;
	int month = 0;
	// One normalised historic speed per node.
	std::vector<double> historic;
	std::vector<bool> historic_fallback;
};

struct Window {
	std::size_t start = 0;   // index of the first input step
	Tensor input;            // [N x 1 x T'] normalised, interpolated
	Tensor target;           // [N x 1 x T] raw readings
	Tensor target_mask;      // [N x 1 x T] 1 where observed
	Calendar calendar;
};

// The window whose first input step is `start`.
Window make_window(const SpeedDataset& ds, const DenseView& dense, std::size_t start, std::size_t input_len = 12,
                   std::size_t output_len = 12);

// Stride-1 windows lying entirely inside one split.
std::vector<Window> make_windows(const SpeedDataset& ds, const DenseView& dense, SplitKind split,
                                 std::size_t input_len = 12, std::size_t output_len = 12,
                                 std::vector<std::string>* warnings = nullptr);

} // namespace gtc
