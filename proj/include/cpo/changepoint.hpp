#pragma once

#include "cpo/break_set.hpp"
#include "cpo/ingest.hpp"
#include "cpo/mann_whitney.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpo::changepoint {

// Phase I tests a fixed sample for a single change; Phase II monitors a
// growing stream and restarts after each detection.
enum class Phase { Batch, Sequential };

std::string to_string(Phase phase);

// Phase II scans splits k in [min_segment, t - kMonitorMinLast] so a change
// can be located as soon as it alarms; the first segment keeps min_segment
// observations, which spaces consecutive breaks. Monitoring starts at
// t = 2 * min_segment. Phase I scans [min_segment, n - min_segment].
inline constexpr std::size_t kMonitorMinLast = 2;

struct DetectorConfig {
    std::optional<double> alpha;  // Phase I false-positive level
    std::optional<double> arl0;   // Phase II in-control average run length (per-step rate 1/arl0)
    std::size_t min_segment = 20;
    std::size_t mc_reps = 10000;
    std::uint64_t seed = 20090101;

    static DetectorConfig batch(double alpha);
    static DetectorConfig sequential(double arl0);

    // Throws std::invalid_argument when the phase's level is missing or out of
    // range, min_segment < 2 or mc_reps < 1000.
    void validate(Phase phase) const;
    // alpha for Batch, 1/arl0 for Sequential.
    double level(Phase phase) const;
};

// Null-distribution thresholds of the max statistic, indexed by window length.
// Batch: h_n is the upper-alpha quantile of D_n. Sequential: h_t gives a
// constant conditional false-alarm rate among streams that have not alarmed.
struct ThresholdTable {
    Phase kind = Phase::Batch;
    double level = 0.05;
    std::size_t min_segment = 20;
    std::size_t mc_reps = 10000;
    std::uint64_t seed = 0;
    std::vector<std::size_t> lengths;  // ascending
    std::vector<double> thresholds;
    // Sequential only: threshold held for lengths past the calibrated range.
    double tail = 0.0;

    // Batch: exact length required (throws std::out_of_range).
    // Sequential: lengths below the first entry never alarm (+inf); lengths
    // beyond the last entry use `tail`.
    double at(std::size_t length) const;

    // Canonical description of the calibration inputs; identical keys give identical tables.
    std::string key() const;
};

std::string threshold_key(Phase kind, const DetectorConfig& config);

// Upper-alpha empirical quantile (linear interpolation between order
// statistics, so alpha = 0.5 gives the sample median). Reorders `sample`.
double upper_quantile(std::vector<double>& sample, double alpha);

// Monte-Carlo calibration on i.i.d. uniform draws; the statistic is rank
// based so any continuous null gives the same distribution. Deterministic in
// config.seed regardless of thread count.
// Batch: one threshold per requested length (each >= 2*min_segment).
// Sequential: every length from 2*min_segment to max(lengths); calibration
// stops early once fewer than one alarm per step is expected among surviving
// streams, and `tail` holds the mean of the last tenth of the table.
ThresholdTable build_thresholds(Phase kind, std::span<const std::size_t> lengths, const DetectorConfig& config);

// Monitoring horizon giving at least a handful of expected alarms per step
// among surviving simulated streams.
std::size_t sequential_horizon(const DetectorConfig& config);

// Memoizes threshold tables in memory and optionally in a JSON cache file.
// Thread-safe. The cache file is re-read and merged before every write.
class ThresholdStore {
public:
    ThresholdStore() = default;
    explicit ThresholdStore(std::filesystem::path cache_file);

    ThresholdStore(const ThresholdStore&) = delete;
    ThresholdStore& operator=(const ThresholdStore&) = delete;

    double batch_threshold(const DetectorConfig& config, std::size_t length);
    ThresholdTable sequential_table(const DetectorConfig& config);

    // Process-wide in-memory store used when callers do not supply one.
    static ThresholdStore& shared();

private:
    void load_locked();
    void save_locked();

    std::mutex mutex_;
    std::optional<std::filesystem::path> file_;
    bool loaded_ = false;
    std::map<std::string, ThresholdTable> tables_;
};

void write_threshold_cache(const std::filesystem::path& path, const std::map<std::string, ThresholdTable>& tables);
std::map<std::string, ThresholdTable> read_threshold_cache(const std::filesystem::path& path);

struct BatchDetection {
    std::size_t split = 0;  // tau-hat: first segment is x[0..split)
    double statistic = 0.0;
    double threshold = 0.0;
};

// Phase I: D_n over splits [min_segment, n - min_segment]; a detection when
// D_n > h_n. Throws std::invalid_argument when n < 2*min_segment.
std::optional<BatchDetection> batch_detect(std::span<const double> x, const DetectorConfig& config,
                                           ThresholdStore& store = ThresholdStore::shared());

struct Alarm {
    std::size_t time = 0;      // window length when D_t first exceeded h_t
    std::size_t location = 0;  // maximizing split at that time
    double statistic = 0.0;
    double threshold = 0.0;
};

// Phase II monitoring of one stream from its first observation; no restart.
std::optional<Alarm> first_alarm(std::span<const double> x, const ThresholdTable& table);

// Phase II with restarts: after each alarm the window restarts at the
// detected break and the observations after it are monitored again.
BreakSet sequential_detect(std::string asset_id, std::span<const double> x, const DetectorConfig& config,
                           ThresholdStore& store = ThresholdStore::shared());
BreakSet sequential_detect(const ReturnSeries& series, const DetectorConfig& config,
                           ThresholdStore& store = ThresholdStore::shared());

// Multi-break detection over a full history (sequential_detect), with the
// min_segment spacing between consecutive breaks checked.
BreakSet detect_breaks(const ReturnSeries& series, const DetectorConfig& config,
                       ThresholdStore& store = ThresholdStore::shared());
std::vector<BreakSet> detect_breaks(const ReturnPanel& panel, const DetectorConfig& config,
                                    ThresholdStore& store = ThresholdStore::shared());

// Rows (asset_id, index, timestamp); the timestamp is that of the first
// observation of the new regime.
std::string breaks_csv(std::span<const BreakSet> breaks, const std::vector<Date>& timestamps);
// Groups rows by asset_id in order of first appearance.
std::vector<BreakSet> read_breaks_csv(const std::filesystem::path& path);

}  // namespace cpo::changepoint
