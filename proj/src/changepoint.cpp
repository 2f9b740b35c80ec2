#include "cpo/changepoint.hpp"
#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <map>
#include <stdexcept>

namespace cpo::changepoint {

std::optional<BatchDetection> batch_detect(std::span<const double> x, const DetectorConfig& config,
                                           ThresholdStore& store) {
    config.validate(Phase::Batch);
    const std::size_t n = x.size();
    if (n < 2 * config.min_segment) {
        throw std::invalid_argument(
            fmt::format("series of length {} too short for min_segment {}", n, config.min_segment));
    }
    const auto best = mw_max_stat(x, config.min_segment);
    const double h = store.batch_threshold(config, n);
    if (best.statistic > h) return BatchDetection{best.split, best.statistic, h};
    return std::nullopt;
}

std::optional<Alarm> first_alarm(std::span<const double> x, const ThresholdTable& table) {
    if (table.kind != Phase::Sequential) throw std::invalid_argument("first_alarm needs a sequential table");
    MannWhitneyStream stream;
    for (double v : x) {
        stream.push(v);
        const std::size_t t = stream.size();
        if (t < 2 * table.min_segment) continue;
        const auto best = stream.max_stat(table.min_segment, kMonitorMinLast);
        const double h = table.at(t);
        if (best.statistic > h) return Alarm{t, best.split, best.statistic, h};
    }
    return std::nullopt;
}

BreakSet sequential_detect(std::string asset_id, std::span<const double> x, const DetectorConfig& config,
                           ThresholdStore& store) {
    config.validate(Phase::Sequential);
    std::vector<std::int64_t> breaks;
    if (x.size() < 2 * config.min_segment) return BreakSet(std::move(asset_id), std::move(breaks));

    const auto table = store.sequential_table(config);
    std::size_t start = 0;
    while (start < x.size()) {
        const auto alarm = first_alarm(x.subspan(start), table);
        if (!alarm) break;
        // Restart from the first observation after the detected change.
        start += alarm->location;
        breaks.push_back(static_cast<std::int64_t>(start));
    }
    return BreakSet(std::move(asset_id), std::move(breaks));
}

BreakSet sequential_detect(const ReturnSeries& series, const DetectorConfig& config, ThresholdStore& store) {
    return sequential_detect(series.asset_id(), series.values(), config, store);
}

BreakSet detect_breaks(const ReturnSeries& series, const DetectorConfig& config, ThresholdStore& store) {
    auto breaks = sequential_detect(series, config, store);
    const auto& idx = breaks.indices();
    const auto m = static_cast<std::int64_t>(config.min_segment);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const std::int64_t previous = i == 0 ? 0 : idx[i - 1];
        if (idx[i] - previous < m || idx[i] >= static_cast<std::int64_t>(series.size())) {
            throw std::logic_error(fmt::format("asset {}: break {} violates min_segment spacing", series.asset_id(),
                                               idx[i]));
        }
    }
    return breaks;
}

std::vector<BreakSet> detect_breaks(const ReturnPanel& panel, const DetectorConfig& config, ThresholdStore& store) {
    std::vector<BreakSet> out;
    out.reserve(panel.num_assets());
    for (const auto& series : panel.assets()) out.push_back(detect_breaks(series, config, store));
    return out;
}

std::string breaks_csv(std::span<const BreakSet> breaks, const std::vector<Date>& timestamps) {
    std::string out = "asset_id,index,timestamp\n";
    for (const auto& set : breaks) {
        for (std::int64_t tau : set.indices()) {
            const auto pos = static_cast<std::size_t>(tau);
            const std::string when = pos < timestamps.size() ? format_date(timestamps[pos]) : std::string();
            out += fmt::format("{},{},{}\n", csv::escape(set.asset_id()), tau, when);
        }
    }
    return out;
}

std::vector<BreakSet> read_breaks_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    const int id_col = table.column("asset_id");
    const int index_col = table.column("index");
    if (id_col < 0 || index_col < 0) {
        throw DataError(fmt::format("{}: expected columns asset_id,index", path.string()));
    }
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::int64_t>> grouped;
    for (const auto& row : table.rows) {
        if (row.size() <= static_cast<std::size_t>(std::max(id_col, index_col))) {
            throw DataError(fmt::format("{}: short row", path.string()));
        }
        const auto& id = row[static_cast<std::size_t>(id_col)];
        const auto& text = row[static_cast<std::size_t>(index_col)];
        std::int64_t tau = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), tau);
        if (ec != std::errc() || ptr != text.data() + text.size()) {
            throw DataError(fmt::format("{}: bad break index '{}'", path.string(), text));
        }
        auto [it, inserted] = grouped.try_emplace(id);
        if (inserted) order.push_back(id);
        it->second.push_back(tau);
    }
    std::vector<BreakSet> out;
    for (const auto& id : order) {
        auto idx = grouped[id];
        std::sort(idx.begin(), idx.end());
        out.emplace_back(id, std::move(idx));
    }
    return out;
}

}  // namespace cpo::changepoint
