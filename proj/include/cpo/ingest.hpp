#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace cpo {

// Calendar date without time of day.
using Date = std::chrono::sys_days;

// Parses YYYY-MM-DD. Throws DataError on anything else.
Date parse_date(std::string_view text);
std::string format_date(Date date);

// Raw prices for one asset. Timestamps strictly increasing, prices > 0,
// at least two observations.
class PriceSeries {
public:
    PriceSeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> prices);

    const std::string& asset_id() const { return asset_id_; }
    const std::vector<Date>& timestamps() const { return timestamps_; }
    const std::vector<double>& prices() const { return prices_; }
    std::size_t size() const { return prices_.size(); }

private:
    std::string asset_id_;
    std::vector<Date> timestamps_;
    std::vector<double> prices_;
};

// Log returns for one asset; timestamps[i] is the later date of each price pair.
class ReturnSeries {
public:
    ReturnSeries(std::string asset_id, std::vector<Date> timestamps, std::vector<double> values);

    const std::string& asset_id() const { return asset_id_; }
    const std::vector<Date>& timestamps() const { return timestamps_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return values_.size(); }

private:
    std::string asset_id_;
    std::vector<Date> timestamps_;
    std::vector<double> values_;
};

// Return series sharing one timestamp grid.
class ReturnPanel {
public:
    explicit ReturnPanel(std::vector<ReturnSeries> assets);

    const std::vector<ReturnSeries>& assets() const { return assets_; }
    const ReturnSeries& asset(std::size_t i) const { return assets_.at(i); }
    std::size_t num_assets() const { return assets_.size(); }
    std::size_t length() const { return assets_.front().size(); }
    const std::vector<Date>& timestamps() const { return assets_.front().timestamps(); }
    std::vector<std::string> asset_ids() const;

    // Observations with from <= date <= to. Throws DataError if none fall inside.
    ReturnPanel slice(Date from, Date to) const;
    // Observations [begin, end) by position.
    ReturnPanel slice_positions(std::size_t begin, std::size_t end) const;

private:
    std::vector<ReturnSeries> assets_;
};

// Maps CSV columns onto assets. An empty `columns` list means "every column
// other than the date column, asset id = column header".
struct CsvSchema {
    std::string date_column = "date";
    std::vector<std::pair<std::string, std::string>> columns;  // (asset_id, column header)
};

struct LoadResult {
    std::vector<PriceSeries> series;
    // Rows dropped per asset because the price cell was blank or unparseable.
    std::vector<std::pair<std::string, std::size_t>> dropped;

    std::size_t total_dropped() const;
};

LoadResult load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});

ReturnSeries log_returns(const PriceSeries& series);

// Restricts every series to the intersection of their timestamp sets.
ReturnPanel align(std::span<const ReturnSeries> series);

struct CsvSource {
    std::filesystem::path path;
    CsvSchema schema;
};

// load_csv over one wide file or several per-asset files, then log_returns
// and align. Asset ids must be unique across sources.
ReturnPanel load_return_panel(std::span<const CsvSource> sources);
ReturnPanel load_return_panel(const std::filesystem::path& path, const CsvSchema& schema = {});

}  // namespace cpo
