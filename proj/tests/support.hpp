#pragma once

#include "cpo/changepoint.hpp"

#include <cstdlib>
#include <filesystem>
#include <random>
#include <vector>

namespace cpo::testing {

// Threshold tables shared by every test binary through CPO_TEST_CACHE when set.
inline changepoint::ThresholdStore& store() {
    static changepoint::ThresholdStore* s = [] {
        const char* path = std::getenv("CPO_TEST_CACHE");
        return path ? new changepoint::ThresholdStore(std::filesystem::path(path)) : new changepoint::ThresholdStore();
    }();
    return *s;
}

inline std::vector<double> normals(std::mt19937_64& rng, std::size_t n, double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> d(mean, sd);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

inline std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace cpo::testing

#include "cpo/ingest.hpp"

#include <string>

namespace cpo::testing {

inline std::vector<Date> daily(std::size_t n, Date first = Date(std::chrono::year{2010} / 1 / 1)) {
    std::vector<Date> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = first + std::chrono::days(static_cast<int>(i));
    return out;
}

inline ReturnPanel make_panel(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& columns) {
    std::vector<ReturnSeries> series;
    const auto dates = daily(columns.at(0).size());
    for (std::size_t i = 0; i < ids.size(); ++i) series.emplace_back(ids[i], dates, columns[i]);
    return ReturnPanel(std::move(series));
}

// Eight assets: two clusters of three with identical break sets, two outliers.
inline std::vector<BreakSet> table5_breaks() {
    std::vector<BreakSet> out;
    for (int i = 1; i <= 3; ++i) out.emplace_back("a" + std::to_string(i), std::vector<std::int64_t>{100, 200, 300, 400, 500, 600, 700, 800});
    for (int i = 4; i <= 6; ++i) out.emplace_back("a" + std::to_string(i), std::vector<std::int64_t>{250, 500, 750});
    out.emplace_back("a7", std::vector<std::int64_t>{50});
    out.emplace_back("a8", std::vector<std::int64_t>{950});
    return out;
}

}  // namespace cpo::testing
