#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <unordered_map>
#include <vector>

namespace cpo::changepoint {

// Location and value of the largest normalized statistic over admissible splits.
struct SplitStat {
    std::size_t split = 0;  // first segment is x[0..split)
    double statistic = 0.0;
};

// |U - k(n-k)/2| / sigma_U for the split x[0..k) vs x[k..n), where U is the
// Mann-Whitney count of pairs with the first-segment value larger (ties count
// one half) and sigma_U uses the mid-rank tie correction. An all-tied window
// has zero variance and is defined to give 0.
// Requires 2 <= k <= n-2 and finite values; throws std::invalid_argument otherwise.
double mw_normalized_stat(std::span<const double> x, std::size_t k);

// Rank-based scan of every split k in [min_segment, n - min_segment].
// Ties in the maximum resolve to the smallest k. Returns statistic 0 at
// split min_segment when the range is empty or the window is all tied.
SplitStat mw_max_stat(std::span<const double> x, std::size_t min_segment);
// Splits k in [min_first, n - min_last]; same tie rule.
SplitStat mw_max_stat(std::span<const double> x, std::size_t min_first, std::size_t min_last);

// Normalized statistic for every split k = 1..n-1 (index k-1), rank route.
std::vector<double> mw_scan(std::span<const double> x);

// Incremental form of the same statistic for monitoring a growing window.
// push() is O(n): it updates the pair count U of every split with the new
// observation and maintains the tie-correction sum.
class MannWhitneyStream {
public:
    void push(double value);
    void reset();
    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }

    // Same contract as mw_max_stat over the current window.
    SplitStat max_stat(std::size_t min_segment) const { return max_stat(min_segment, min_segment); }
    SplitStat max_stat(std::size_t min_first, std::size_t min_last) const;

private:
    std::vector<double> values_;
    std::vector<double> pair_count_;  // pair_count_[k-1] = U for split k
    std::unordered_map<double, std::size_t> multiplicity_;
    double tie_sum_ = 0.0;  // sum over tie groups of (t^3 - t)
};

namespace detail {

// Shared normalization; u is the pair count, tie_sum the sum of t^3 - t.
inline double normalized(double u, double k, double n, double tie_sum) {
    const double m = k * (n - k);
    const double var = m / 12.0 * ((n + 1.0) - tie_sum / (n * (n - 1.0)));
    if (!(var > 0.0)) return 0.0;
    const double z = u - m / 2.0;
    return (z < 0 ? -z : z) / std::sqrt(var);
}

}  // namespace detail

}  // namespace cpo::changepoint
