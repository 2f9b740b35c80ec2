#include "cpo/mann_whitney.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace cpo::changepoint {

namespace {

struct Ranked {
    std::vector<double> ranks;  // mid-ranks, 1-based
    double tie_sum = 0.0;
};

Ranked mid_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

    Ranked out;
    out.ranks.resize(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && x[order[j]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
        for (std::size_t r = i; r < j; ++r) out.ranks[order[r]] = rank;
        const double t = static_cast<double>(j - i);
        out.tie_sum += t * t * t - t;
        i = j;
    }
    return out;
}

void require_finite(std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v)) throw std::invalid_argument("Mann-Whitney statistic needs finite values");
    }
}

}  // namespace

double mw_normalized_stat(std::span<const double> x, std::size_t k) {
    const std::size_t n = x.size();
    if (n < 4 || k < 2 || k > n - 2) {
        throw std::invalid_argument(fmt::format("split {} out of range [2, {}] for n = {}", k, n < 2 ? 0 : n - 2, n));
    }
    require_finite(x);
    const auto ranked = mid_ranks(x);
    const double rank_sum = std::accumulate(ranked.ranks.begin(), ranked.ranks.begin() + static_cast<std::ptrdiff_t>(k), 0.0);
    const double kd = static_cast<double>(k);
    const double u = rank_sum - kd * (kd + 1.0) / 2.0;
    return detail::normalized(u, kd, static_cast<double>(n), ranked.tie_sum);
}

std::vector<double> mw_scan(std::span<const double> x) {
    require_finite(x);
    const std::size_t n = x.size();
    std::vector<double> stats;
    if (n < 2) return stats;
    const auto ranked = mid_ranks(x);
    stats.resize(n - 1);
    double rank_sum = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        rank_sum += ranked.ranks[k - 1];
        const double kd = static_cast<double>(k);
        stats[k - 1] = detail::normalized(rank_sum - kd * (kd + 1.0) / 2.0, kd, static_cast<double>(n), ranked.tie_sum);
    }
    return stats;
}

SplitStat mw_max_stat(std::span<const double> x, std::size_t min_segment) {
    return mw_max_stat(x, min_segment, min_segment);
}

SplitStat mw_max_stat(std::span<const double> x, std::size_t min_first, std::size_t min_last) {
    SplitStat best{min_first, 0.0};
    const std::size_t n = x.size();
    if (min_first == 0 || min_last == 0 || n < min_first + min_last) return best;
    const auto stats = mw_scan(x);
    for (std::size_t k = min_first; k <= n - min_last; ++k) {
        if (stats[k - 1] > best.statistic) best = {k, stats[k - 1]};
    }
    return best;
}

void MannWhitneyStream::push(double value) {
    if (!std::isfinite(value)) throw std::invalid_argument("Mann-Whitney stream needs finite values");
    const std::size_t n = values_.size();
    // After the push, split k gains `value` in its second segment, so U_k grows
    // by the number of first-segment values above it (ties count one half).
    double above = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values_[i];
        above += v > value ? 1.0 : (v == value ? 0.5 : 0.0);
        if (i + 1 < n) pair_count_[i] += above;
    }
    if (n > 0) pair_count_.push_back(above);
    values_.push_back(value);

    const double t = static_cast<double>(multiplicity_[value]++);
    tie_sum_ += 3.0 * t * t + 3.0 * t;  // (t+1)^3 - (t+1) - (t^3 - t)
}

void MannWhitneyStream::reset() {
    values_.clear();
    pair_count_.clear();
    multiplicity_.clear();
    tie_sum_ = 0.0;
}

SplitStat MannWhitneyStream::max_stat(std::size_t min_first, std::size_t min_last) const {
    SplitStat best{min_first, 0.0};
    const std::size_t n = values_.size();
    if (min_first == 0 || min_last == 0 || n < min_first + min_last) return best;
    const double nd = static_cast<double>(n);
    for (std::size_t k = min_first; k <= n - min_last; ++k) {
        const double s = detail::normalized(pair_count_[k - 1], static_cast<double>(k), nd, tie_sum_);
        if (s > best.statistic) best = {k, s};
    }
    return best;
}

}  // namespace cpo::changepoint
