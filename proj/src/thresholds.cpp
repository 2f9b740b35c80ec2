#include "cpo/changepoint.hpp"
#include "cpo/csv.hpp"
#include "cpo/errors.hpp"
#include "cpo/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace cpo::changepoint {

namespace {

constexpr int kCacheVersion = 1;

// Runs body(begin, end) over [0, count) in contiguous chunks.
template <typename Body>
void parallel_chunks(std::size_t count, Body body) {
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), std::max<std::size_t>(count / 64, 1));
    if (workers <= 1) {
        body(std::size_t{0}, count);
        return;
    }
    std::vector<std::thread> threads;
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : threads) t.join();
}

std::uint64_t stream_id(Phase kind, std::size_t length, std::size_t rep) {
    const std::uint64_t tag = kind == Phase::Batch ? 0x1ULL : 0x2ULL;
    return (tag << 60) ^ (static_cast<std::uint64_t>(length) << 32) ^ static_cast<std::uint64_t>(rep);
}

// Max normalized statistic over admissible splits for one i.i.d. continuous sample.
double null_max_stat(std::span<const double> x, std::size_t min_segment) {
    return mw_max_stat(x, min_segment).statistic;
}

// Trajectory of D_t, t = 2m..horizon, for one tie-free null stream. This is
// the MannWhitneyStream recursion specialised to integer pair counts.
void null_trajectory(Rng& rng, std::size_t min_segment, std::size_t horizon, std::span<float> out,
                     std::vector<double>& values, std::vector<std::int64_t>& pairs) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    values.assign(horizon, 0.0);
    pairs.assign(horizon, 0);
    for (std::size_t t = 0; t < horizon; ++t) {
        const double v = uniform(rng);
        std::int64_t above = 0;
        for (std::size_t i = 0; i < t; ++i) {
            above += values[i] > v ? 1 : 0;
            pairs[i] += above;
        }
        // the loop above added `above` to pairs[t-1] too, which held 0
        values[t] = v;

        const std::size_t n = t + 1;
        if (n < 2 * min_segment) continue;
        double best = 0.0;
        for (std::size_t k = min_segment; k <= n - kMonitorMinLast; ++k) {
            const double m = static_cast<double>(k) * static_cast<double>(n - k);
            const double z = static_cast<double>(pairs[k - 1]) - 0.5 * m;
            const double r = z * z / m;
            best = r > best ? r : best;
        }
        out[n - 2 * min_segment] = static_cast<float>(std::sqrt(best * 12.0 / (static_cast<double>(n) + 1.0)));
    }
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

nlohmann::json table_to_json(const ThresholdTable& t) {
    return {{"key", t.key()},
            {"kind", to_string(t.kind)},
            {"level", t.level},
            {"min_segment", t.min_segment},
            {"mc_reps", t.mc_reps},
            {"seed", t.seed},
            {"lengths", t.lengths},
            {"thresholds", t.thresholds},
            {"tail", t.tail}};
}

ThresholdTable table_from_json(const nlohmann::json& j) {
    ThresholdTable t;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "batch") {
        t.kind = Phase::Batch;
    } else if (kind == "sequential") {
        t.kind = Phase::Sequential;
    } else {
        throw DataError(fmt::format("threshold cache: unknown kind '{}'", kind));
    }
    t.level = j.at("level").get<double>();
    t.min_segment = j.at("min_segment").get<std::size_t>();
    t.mc_reps = j.at("mc_reps").get<std::size_t>();
    t.seed = j.at("seed").get<std::uint64_t>();
    t.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    t.thresholds = j.at("thresholds").get<std::vector<double>>();
    t.tail = j.at("tail").get<double>();
    if (t.lengths.size() != t.thresholds.size()) throw DataError("threshold cache: length/threshold size mismatch");
    return t;
}

}  // namespace

std::string to_string(Phase phase) {
    return phase == Phase::Batch ? "batch" : "sequential";
}

DetectorConfig DetectorConfig::batch(double alpha) {
    DetectorConfig c;
    c.alpha = alpha;
    return c;
}

DetectorConfig DetectorConfig::sequential(double arl0) {
    DetectorConfig c;
    c.arl0 = arl0;
    return c;
}

void DetectorConfig::validate(Phase phase) const {
    if (phase == Phase::Batch) {
        if (!alpha) throw std::invalid_argument("batch detection needs alpha");
        if (!(*alpha > 0.0 && *alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
    } else {
        if (!arl0) throw std::invalid_argument("sequential detection needs arl0");
        if (!(*arl0 > 1.0) || !std::isfinite(*arl0)) throw std::invalid_argument("arl0 must be > 1");
    }
    if (min_segment < 2) throw std::invalid_argument("min_segment must be >= 2");
    if (mc_reps < 1000) throw std::invalid_argument("mc_reps must be >= 1000");
}

double DetectorConfig::level(Phase phase) const {
    validate(phase);
    return phase == Phase::Batch ? *alpha : 1.0 / *arl0;
}

double ThresholdTable::at(std::size_t length) const {
    if (kind == Phase::Batch) {
        const auto it = std::lower_bound(lengths.begin(), lengths.end(), length);
        if (it == lengths.end() || *it != length) {
            throw std::out_of_range(fmt::format("no batch threshold for length {}", length));
        }
        return thresholds[static_cast<std::size_t>(it - lengths.begin())];
    }
    if (lengths.empty() || length < lengths.front()) return std::numeric_limits<double>::infinity();
    if (length > lengths.back()) return tail;
    return thresholds[length - lengths.front()];
}

std::string threshold_key(Phase kind, const DetectorConfig& config) {
    ThresholdTable t;
    t.kind = kind;
    t.level = config.level(kind);
    t.min_segment = config.min_segment;
    t.mc_reps = config.mc_reps;
    t.seed = config.seed;
    return t.key();
}

std::string ThresholdTable::key() const {
    const std::string splits = kind == Phase::Batch ? "m..n-m" : fmt::format("m..t-{}", kMonitorMinLast);
    return fmt::format("mann-whitney|{}|splits={}|level={:.17g}|min_segment={}|mc_reps={}|seed={}", to_string(kind),
                       splits, level, min_segment, mc_reps, seed);
}

double upper_quantile(std::vector<double>& sample, double alpha) {
    if (sample.empty()) throw std::invalid_argument("quantile of an empty sample");
    const double pos = (1.0 - alpha) * static_cast<double>(sample.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    std::nth_element(sample.begin(), sample.begin() + static_cast<std::ptrdiff_t>(lo), sample.end());
    const double a = sample[lo];
    if (frac == 0.0 || lo + 1 >= sample.size()) return a;
    const double b = *std::min_element(sample.begin() + static_cast<std::ptrdiff_t>(lo) + 1, sample.end());
    return a + frac * (b - a);
}

std::size_t sequential_horizon(const DetectorConfig& config) {
    const double alpha = config.level(Phase::Sequential);
    const double reps = static_cast<double>(config.mc_reps);
    const std::size_t start = 2 * config.min_segment;
    // Survivors decay as (1-alpha)^steps; stop where about five alarms per step remain.
    constexpr double kMinAlarms = 5.0;
    if (reps * alpha <= kMinAlarms) return start;
    const double steps = std::log(kMinAlarms / (reps * alpha)) / std::log1p(-alpha);
    const double cap = 8.0 / alpha;
    return start + static_cast<std::size_t>(std::min(steps, cap));
}

ThresholdTable build_thresholds(Phase kind, std::span<const std::size_t> lengths, const DetectorConfig& config) {
    config.validate(kind);
    const double alpha = config.level(kind);
    const std::size_t m = config.min_segment;
    const std::size_t reps = config.mc_reps;

    ThresholdTable table;
    table.kind = kind;
    table.level = alpha;
    table.min_segment = m;
    table.mc_reps = reps;
    table.seed = config.seed;

    if (kind == Phase::Batch) {
        std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        for (std::size_t n : sorted) {
            if (n < 2 * m) {
                throw std::invalid_argument(fmt::format("length {} shorter than 2 * min_segment = {}", n, 2 * m));
            }
            std::vector<double> stats(reps);
            parallel_chunks(reps, [&](std::size_t begin, std::size_t end) {
                std::vector<double> x(n);
                for (std::size_t r = begin; r < end; ++r) {
                    Rng rng = make_rng(config.seed, stream_id(kind, n, r));
                    std::uniform_real_distribution<double> uniform(0.0, 1.0);
                    for (auto& v : x) v = uniform(rng);
                    stats[r] = null_max_stat(x, m);
                }
            });
            table.lengths.push_back(n);
            table.thresholds.push_back(upper_quantile(stats, alpha));
        }
        return table;
    }

    if (lengths.empty()) throw std::invalid_argument("sequential calibration needs a horizon");
    const std::size_t horizon = *std::max_element(lengths.begin(), lengths.end());
    if (horizon < 2 * m) throw std::invalid_argument("sequential horizon shorter than 2 * min_segment");
    const std::size_t steps = horizon - 2 * m + 1;

    std::vector<float> trajectories(reps * steps);
    parallel_chunks(reps, [&](std::size_t begin, std::size_t end) {
        std::vector<double> values;
        std::vector<std::int64_t> pairs;
        for (std::size_t r = begin; r < end; ++r) {
            Rng rng = make_rng(config.seed, stream_id(kind, 0, r));
            null_trajectory(rng, m, horizon, std::span<float>(trajectories).subspan(r * steps, steps), values,
                            pairs);
        }
    });

    std::vector<std::size_t> alive(reps);
    std::iota(alive.begin(), alive.end(), 0);
    std::vector<double> sample;
    for (std::size_t s = 0; s < steps; ++s) {
        if (static_cast<double>(alive.size()) * alpha < 1.0) break;
        sample.clear();
        for (std::size_t r : alive) sample.push_back(trajectories[r * steps + s]);
        const double h = upper_quantile(sample, alpha);
        table.lengths.push_back(2 * m + s);
        table.thresholds.push_back(h);
        std::erase_if(alive, [&](std::size_t r) { return trajectories[r * steps + s] > h; });
    }
    if (table.thresholds.empty()) throw std::invalid_argument("mc_reps too small to calibrate this arl0");
    const std::size_t tail_n = std::max<std::size_t>(1, table.thresholds.size() / 10);
    table.tail = std::accumulate(table.thresholds.end() - static_cast<std::ptrdiff_t>(tail_n), table.thresholds.end(),
                                 0.0) /
                 static_cast<double>(tail_n);
    return table;
}

ThresholdStore::ThresholdStore(std::filesystem::path cache_file) : file_(std::move(cache_file)) {}

ThresholdStore& ThresholdStore::shared() {
    static ThresholdStore store;
    return store;
}

void ThresholdStore::load_locked() {
    if (loaded_) return;
    loaded_ = true;
    if (file_ && std::filesystem::exists(*file_)) {
        for (auto& [key, table] : read_threshold_cache(*file_)) tables_.emplace(key, std::move(table));
    }
}

void ThresholdStore::save_locked() {
    if (!file_) return;
    auto merged = std::filesystem::exists(*file_) ? read_threshold_cache(*file_) : std::map<std::string, ThresholdTable>{};
    for (const auto& [key, table] : tables_) {
        auto& slot = merged[key];
        if (slot.kind == Phase::Batch && table.kind == Phase::Batch && !slot.lengths.empty()) {
            // union of lengths; entries for the same key are identical by construction
            std::map<std::size_t, double> by_length;
            for (std::size_t i = 0; i < slot.lengths.size(); ++i) by_length[slot.lengths[i]] = slot.thresholds[i];
            for (std::size_t i = 0; i < table.lengths.size(); ++i) by_length[table.lengths[i]] = table.thresholds[i];
            slot.lengths.clear();
            slot.thresholds.clear();
            for (const auto& [n, h] : by_length) {
                slot.lengths.push_back(n);
                slot.thresholds.push_back(h);
            }
        } else {
            slot = table;
        }
    }
    write_threshold_cache(*file_, merged);
}

double ThresholdStore::batch_threshold(const DetectorConfig& config, std::size_t length) {
    const std::string key = threshold_key(Phase::Batch, config);
    std::lock_guard lock(mutex_);
    load_locked();
    auto it = tables_.find(key);
    if (it != tables_.end()) {
        const auto& t = it->second;
        if (std::binary_search(t.lengths.begin(), t.lengths.end(), length)) return t.at(length);
    }
    const std::size_t lengths[] = {length};
    auto fresh = build_thresholds(Phase::Batch, lengths, config);
    const double h = fresh.thresholds.front();
    if (it == tables_.end()) {
        tables_.emplace(key, std::move(fresh));
    } else {
        auto& t = it->second;
        const auto pos = std::lower_bound(t.lengths.begin(), t.lengths.end(), length);
        const auto offset = pos - t.lengths.begin();
        t.lengths.insert(pos, length);
        t.thresholds.insert(t.thresholds.begin() + offset, h);
    }
    save_locked();
    return h;
}

ThresholdTable ThresholdStore::sequential_table(const DetectorConfig& config) {
    const std::string key = threshold_key(Phase::Sequential, config);
    std::lock_guard lock(mutex_);
    load_locked();
    if (auto it = tables_.find(key); it != tables_.end()) return it->second;
    const std::size_t horizon[] = {sequential_horizon(config)};
    auto table = build_thresholds(Phase::Sequential, horizon, config);
    tables_.emplace(key, table);
    save_locked();
    return table;
}

void write_threshold_cache(const std::filesystem::path& path, const std::map<std::string, ThresholdTable>& tables) {
    nlohmann::json entries = nlohmann::json::object();
    for (const auto& [key, table] : tables) {
        entries[fmt::format("{:016x}", fnv1a(key))] = table_to_json(table);
    }
    const nlohmann::json doc = {{"format", "cpo-thresholds"}, {"version", kCacheVersion}, {"tables", entries}};
    csv::write_atomic(path, doc.dump(1) + "\n");
}

std::map<std::string, ThresholdTable> read_threshold_cache(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError(fmt::format("cannot open threshold cache {}", path.string()));
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("threshold cache {} is not valid JSON: {}", path.string(), e.what()));
    }
    if (doc.value("format", "") != "cpo-thresholds" || doc.value("version", 0) != kCacheVersion) {
        throw DataError(fmt::format("threshold cache {} has an unsupported format or version", path.string()));
    }
    std::map<std::string, ThresholdTable> tables;
    for (const auto& [hash, entry] : doc.at("tables").items()) {
        auto table = table_from_json(entry);
        if (table.key() != entry.at("key").get<std::string>()) {
            throw DataError(fmt::format("threshold cache entry {} does not match its key", hash));
        }
        tables.emplace(table.key(), std::move(table));
    }
    return tables;
}

}  // namespace cpo::changepoint
