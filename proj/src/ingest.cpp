#include "cpo/ingest.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>

namespace cpo {

namespace {

bool parse_int(std::string_view text, int& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

// Strict decimal parse: optional sign, digits, '.', exponent. No thousands separators.
bool parse_price(std::string_view text, double& out) {
    text = trim(text);
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

void check_increasing(const std::string& asset_id, const std::vector<Date>& ts) {
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] == ts[i - 1]) {
            throw DataError(fmt::format("duplicate timestamp {} for asset {}", format_date(ts[i]), asset_id));
        }
        if (ts[i] < ts[i - 1]) {
            throw DataError(fmt::format("timestamps not increasing for asset {}", asset_id));
        }
    }
}

}  // namespace

Date parse_date(std::string_view text) {
    text = trim(text);
    int y = 0;
    int m = 0;
    int d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_int(text.substr(0, 4), y) ||
        !parse_int(text.substr(5, 2), m) || !parse_int(text.substr(8, 2), d)) {
        throw DataError(fmt::format("unparseable date '{}' (expected YYYY-MM-DD)", text));
    }
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw DataError(fmt::format("invalid calendar date '{}'", text));
    return std::chrono::sys_days{ymd};
}

std::string format_date(Date date) {
    const std::chrono::year_month_day ymd{date};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

PriceSeries::PriceSeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> prices)
    : asset_id_(std::move(asset_id)), timestamps_(std::move(timestamps)), prices_(std::move(prices)) {
    if (timestamps_.size() != prices_.size()) {
        throw DataError(fmt::format("asset {}: {} timestamps but {} prices", asset_id_, timestamps_.size(),
                                    prices_.size()));
    }
    if (prices_.size() < 2) throw DataError(fmt::format("asset {}: need at least 2 prices", asset_id_));
    for (double p : prices_) {
        if (!(p > 0.0) || !std::isfinite(p)) {
            throw DataError(fmt::format("asset {}: non-positive price {}", asset_id_, p));
        }
    }
    check_increasing(asset_id_, timestamps_);
}

ReturnSeries::ReturnSeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> values)
    : asset_id_(std::move(asset_id)), timestamps_(std::move(timestamps)), values_(std::move(values)) {
    if (timestamps_.size() != values_.size()) {
        throw DataError(fmt::format("asset {}: {} timestamps but {} returns", asset_id_, timestamps_.size(),
                                    values_.size()));
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw DataError(fmt::format("asset {}: non-finite return", asset_id_));
    }
    check_increasing(asset_id_, timestamps_);
}

ReturnPanel::ReturnPanel(std::vector<ReturnSeries> assets) : assets_(std::move(assets)) {
    if (assets_.empty()) throw DataError("return panel needs at least one asset");
    const auto& grid = assets_.front().timestamps();
    for (const auto& a : assets_) {
        if (a.timestamps() != grid) {
            throw DataError(fmt::format("asset {} is not on the panel's timestamp grid", a.asset_id()));
        }
    }
}

std::vector<std::string> ReturnPanel::asset_ids() const {
    std::vector<std::string> ids;
    ids.reserve(assets_.size());
    for (const auto& a : assets_) ids.push_back(a.asset_id());
    return ids;
}

ReturnPanel ReturnPanel::slice_positions(std::size_t begin, std::size_t end) const {
    if (begin >= end || end > length()) {
        throw DataError(fmt::format("panel slice [{}, {}) out of range for length {}", begin, end, length()));
    }
    std::vector<ReturnSeries> out;
    out.reserve(assets_.size());
    for (const auto& a : assets_) {
        out.emplace_back(a.asset_id(),
                         std::vector<Date>(a.timestamps().begin() + static_cast<std::ptrdiff_t>(begin),
                                           a.timestamps().begin() + static_cast<std::ptrdiff_t>(end)),
                         std::vector<double>(a.values().begin() + static_cast<std::ptrdiff_t>(begin),
                                             a.values().begin() + static_cast<std::ptrdiff_t>(end)));
    }
    return ReturnPanel(std::move(out));
}

ReturnPanel ReturnPanel::slice(Date from, Date to) const {
    const auto& ts = timestamps();
    const auto lo = std::lower_bound(ts.begin(), ts.end(), from);
    const auto hi = std::upper_bound(ts.begin(), ts.end(), to);
    if (lo >= hi) {
        throw DataError(fmt::format("no observations between {} and {}", format_date(from), format_date(to)));
    }
    return slice_positions(static_cast<std::size_t>(lo - ts.begin()), static_cast<std::size_t>(hi - ts.begin()));
}

std::size_t LoadResult::total_dropped() const {
    std::size_t total = 0;
    for (const auto& [id, n] : dropped) total += n;
    return total;
}

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
    const auto table = csv::read(path);
    const int date_col = table.column(schema.date_column);
    if (date_col < 0) {
        throw DataError(fmt::format("{}: missing date column '{}'", path.string(), schema.date_column));
    }

    std::vector<std::pair<std::string, int>> targets;
    if (schema.columns.empty()) {
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (static_cast<int>(c) != date_col) targets.emplace_back(table.header[c], static_cast<int>(c));
        }
    } else {
        for (const auto& [asset, column] : schema.columns) {
            const int c = table.column(column);
            if (c < 0) throw DataError(fmt::format("{}: missing price column '{}'", path.string(), column));
            targets.emplace_back(asset, c);
        }
    }
    if (targets.empty()) throw DataError(fmt::format("{}: no price columns", path.string()));

    std::vector<Date> dates;
    dates.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        if (static_cast<int>(row.size()) <= date_col) {
            throw DataError(fmt::format("{}: row with missing date field", path.string()));
        }
        dates.push_back(parse_date(row[static_cast<std::size_t>(date_col)]));
    }

    // Accept files in either date order.
    std::vector<std::size_t> order(dates.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dates[a] < dates[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) {
        if (dates[order[i]] == dates[order[i - 1]]) {
            throw DataError(
                fmt::format("{}: duplicate timestamp {}", path.string(), format_date(dates[order[i]])));
        }
    }

    LoadResult result;
    for (const auto& [asset, c] : targets) {
        std::vector<Date> ts;
        std::vector<double> prices;
        std::size_t dropped = 0;
        for (std::size_t r : order) {
            const auto& row = table.rows[r];
            double price = 0.0;
            if (static_cast<int>(row.size()) <= c || !parse_price(row[static_cast<std::size_t>(c)], price)) {
                ++dropped;
                continue;
            }
            ts.push_back(dates[r]);
            prices.push_back(price);
        }
        if (prices.empty()) throw DataError(fmt::format("{}: no parseable rows for {}", path.string(), asset));
        result.dropped.emplace_back(asset, dropped);
        result.series.emplace_back(asset, std::move(ts), std::move(prices));
    }
    return result;
}

ReturnSeries log_returns(const PriceSeries& series) {
    const auto& p = series.prices();
    std::vector<double> values(p.size() - 1);
    for (std::size_t i = 0; i + 1 < p.size(); ++i) values[i] = std::log(p[i + 1] / p[i]);
    return ReturnSeries(series.asset_id(),
                        std::vector<Date>(series.timestamps().begin() + 1, series.timestamps().end()),
                        std::move(values));
}

ReturnPanel align(std::span<const ReturnSeries> series) {
    if (series.empty()) throw DataError("align needs at least one series");

    std::set<Date> common(series.front().timestamps().begin(), series.front().timestamps().end());
    for (const auto& s : series.subspan(1)) {
        std::set<Date> next;
        for (Date d : s.timestamps()) {
            if (common.count(d)) next.insert(d);
        }
        common.swap(next);
    }
    if (common.empty()) throw DataError("empty intersection of timestamp grids");

    std::vector<ReturnSeries> out;
    out.reserve(series.size());
    for (const auto& s : series) {
        std::vector<Date> ts;
        std::vector<double> values;
        ts.reserve(common.size());
        values.reserve(common.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (common.count(s.timestamps()[i])) {
                ts.push_back(s.timestamps()[i]);
                values.push_back(s.values()[i]);
            }
        }
        out.emplace_back(s.asset_id(), std::move(ts), std::move(values));
    }
    return ReturnPanel(std::move(out));
}

ReturnPanel load_return_panel(std::span<const CsvSource> sources) {
    std::vector<ReturnSeries> returns;
    std::set<std::string> seen;
    for (const auto& source : sources) {
        for (const auto& s : load_csv(source.path, source.schema).series) {
            if (!seen.insert(s.asset_id()).second) {
                throw DataError(fmt::format("asset {} appears in more than one input", s.asset_id()));
            }
            returns.push_back(log_returns(s));
        }
    }
    return align(returns);
}

ReturnPanel load_return_panel(const std::filesystem::path& path, const CsvSchema& schema) {
    const CsvSource source{path, schema};
    return load_return_panel(std::span<const CsvSource>(&source, 1));
}

}  // namespace cpo
