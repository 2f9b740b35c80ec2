#include "cpo/optimizer.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cpo::optimizer {

namespace {

constexpr double kBoundSlack = 1e-9;
constexpr double kTieTolerance = 1e-12;

bool improves(double candidate, double best) {
    return candidate > best + kTieTolerance * std::max(1.0, std::abs(best));
}

std::int64_t units_for(double resolution) {
    if (!(resolution > 0.0) || resolution > 1.0) throw std::invalid_argument("resolution must lie in (0, 1]");
    const double n = std::round(1.0 / resolution);
    if (std::abs(n * resolution - 1.0) > 1e-9) {
        throw std::invalid_argument(fmt::format("resolution {} does not divide 1", resolution));
    }
    return static_cast<std::int64_t>(n);
}

// Integer bounds on the lattice with `units` steps per unit weight.
struct Lattice {
    std::int64_t units = 0;
    std::vector<std::int64_t> lo;
    std::vector<std::int64_t> hi;
};

Lattice lattice(const PortfolioSpec& spec, std::int64_t units) {
    Lattice l;
    l.units = units;
    const double u = static_cast<double>(units);
    for (std::size_t i = 0; i < spec.size(); ++i) {
        l.lo.push_back(static_cast<std::int64_t>(std::ceil(spec.lower[i] * u - kBoundSlack)));
        l.hi.push_back(static_cast<std::int64_t>(std::floor(spec.upper[i] * u + kBoundSlack)));
    }
    return l;
}

std::vector<double> to_weights(const std::vector<std::int64_t>& k, std::int64_t units) {
    std::vector<double> w(k.size());
    for (std::size_t i = 0; i < k.size(); ++i) w[i] = static_cast<double>(k[i]) / static_cast<double>(units);
    return w;
}

std::uint64_t saturating_add(std::uint64_t a, std::uint64_t b) {
    return a > std::numeric_limits<std::uint64_t>::max() - b ? std::numeric_limits<std::uint64_t>::max() : a + b;
}

std::uint64_t count_points(const Lattice& l) {
    // ways[s] = number of ways the assets seen so far sum to s units
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(l.units) + 1, 0);
    ways[0] = 1;
    for (std::size_t i = 0; i < l.lo.size(); ++i) {
        std::vector<std::uint64_t> next(ways.size(), 0);
        const std::int64_t lo = std::max<std::int64_t>(l.lo[i], 0);
        const std::int64_t hi = std::min(l.hi[i], l.units);
        for (std::int64_t s = 0; s <= l.units; ++s) {
            if (ways[static_cast<std::size_t>(s)] == 0) continue;
            for (std::int64_t k = lo; k <= hi && s + k <= l.units; ++k) {
                auto& slot = next[static_cast<std::size_t>(s + k)];
                slot = saturating_add(slot, ways[static_cast<std::size_t>(s)]);
            }
        }
        ways.swap(next);
    }
    return ways[static_cast<std::size_t>(l.units)];
}

// Visits every lattice point in lexicographic order of the integer vector.
template <typename Visit>
void enumerate(const Lattice& l, Visit visit) {
    const std::size_t n = l.lo.size();
    std::vector<std::int64_t> suffix_lo(n + 1, 0);
    std::vector<std::int64_t> suffix_hi(n + 1, 0);
    for (std::size_t i = n; i-- > 0;) {
        suffix_lo[i] = suffix_lo[i + 1] + l.lo[i];
        suffix_hi[i] = suffix_hi[i + 1] + l.hi[i];
    }
    std::vector<std::int64_t> k(n, 0);
    auto recurse = [&](auto& self, std::size_t i, std::int64_t remaining) -> void {
        if (i + 1 == n) {
            if (remaining >= l.lo[i] && remaining <= l.hi[i]) {
                k[i] = remaining;
                visit(k);
            }
            return;
        }
        const std::int64_t first = std::max(l.lo[i], remaining - suffix_hi[i + 1]);
        const std::int64_t last = std::min(l.hi[i], remaining - suffix_lo[i + 1]);
        for (std::int64_t v = first; v <= last; ++v) {
            k[i] = v;
            self(self, i + 1, remaining - v);
        }
    };
    if (n > 0) recurse(recurse, 0, l.units);
}

}  // namespace

void PortfolioSpec::validate() const {
    const std::size_t n = asset_ids.size();
    if (n == 0) throw std::invalid_argument("portfolio needs at least one asset");
    if (expected_returns.size() != n || lower.size() != n || upper.size() != n) {
        throw std::invalid_argument("portfolio spec vectors must all have one entry per asset");
    }
    if (!std::isfinite(risk_free)) throw std::invalid_argument("risk-free rate must be finite");
    double sum_lo = 0.0;
    double sum_hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(expected_returns[i])) throw std::invalid_argument("expected returns must be finite");
        if (!(lower[i] >= 0.0 && upper[i] <= 1.0 && lower[i] <= upper[i])) {
            throw std::invalid_argument(
                fmt::format("bounds for {} must satisfy 0 <= lower <= upper <= 1", asset_ids[i]));
        }
        sum_lo += lower[i];
        sum_hi += upper[i];
    }
    if (sum_lo > 1.0 + kBoundSlack || sum_hi < 1.0 - kBoundSlack) {
        throw NumericalError(fmt::format("infeasible bounds: sum(lower) = {}, sum(upper) = {}", sum_lo, sum_hi));
    }
}

RiskMatrix::RiskMatrix(RiskKind kind, std::size_t n, std::vector<double> entries)
    : kind_(kind), n_(n), entries_(std::move(entries)) {
    if (entries_.size() != n_ * n_) throw std::invalid_argument("risk matrix must be square");
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (!std::isfinite((*this)(i, j))) throw DataError("risk matrix has a non-finite entry");
            if ((*this)(i, j) != (*this)(j, i)) throw DataError("risk matrix must be symmetric");
        }
    }
    if (kind_ == RiskKind::Affinity) {
        for (std::size_t i = 0; i < n_; ++i) {
            if ((*this)(i, i) != 1.0) throw DataError("affinity risk matrix needs a unit diagonal");
            for (std::size_t j = 0; j < n_; ++j) {
                if ((*this)(i, j) < 0.0 || (*this)(i, j) > 1.0) throw DataError("affinity entries must lie in [0, 1]");
            }
        }
    }
}

double RiskMatrix::quadratic_form(std::span<const double> w) const {
    double total = 0.0;
    for (std::size_t i = 0; i < n_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < n_; ++j) row += entries_[i * n_ + j] * w[j];
        total += w[i] * row;
    }
    return total;
}

RiskMatrix covariance(const ReturnPanel& panel) {
    const std::size_t len = panel.length();
    if (len < 2) throw DataError("covariance needs at least two observations");
    const std::size_t n = panel.num_assets();
    std::vector<double> means(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = panel.asset(i).values();
        means[i] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(len);
    }
    std::vector<double> entries(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) {
            const auto& a = panel.asset(i).values();
            const auto& b = panel.asset(j).values();
            double s = 0.0;
            for (std::size_t t = 0; t < len; ++t) s += (a[t] - means[i]) * (b[t] - means[j]);
            const double c = s / static_cast<double>(len - 1);
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    }
    return RiskMatrix(RiskKind::Covariance, n, std::move(entries));
}

RiskMatrix affinity_risk(const setdist::AffinityMatrix& affinity) {
    return RiskMatrix(RiskKind::Affinity, affinity.size(), affinity.entries());
}

double objective_value(std::span<const double> w, const PortfolioSpec& spec, const RiskMatrix& risk) {
    if (w.size() != spec.size() || risk.size() != spec.size()) {
        throw std::invalid_argument("weights, spec and risk matrix sizes differ");
    }
    double excess = -spec.risk_free;
    for (std::size_t i = 0; i < w.size(); ++i) excess += w[i] * spec.expected_returns[i];
    const double denom = risk.quadratic_form(w);
    if (!(denom > 0.0)) throw NumericalError("degenerate risk: w' M w is not positive");
    return excess / denom;
}

std::uint64_t grid_size(const PortfolioSpec& spec, double resolution) {
    spec.validate();
    return count_points(lattice(spec, units_for(resolution)));
}

double auto_resolution(const PortfolioSpec& spec, std::uint64_t budget) {
    spec.validate();
    static constexpr std::int64_t kLadder[] = {200, 100, 50, 40, 20, 10, 5, 4, 2, 1};
    for (std::int64_t units : kLadder) {
        const auto count = count_points(lattice(spec, units));
        if (count > 0 && count <= budget) return 1.0 / static_cast<double>(units);
    }
    throw NumericalError("no grid resolution fits the evaluation budget for these bounds");
}

OptimizeResult optimize(const PortfolioSpec& spec, const RiskMatrix& risk, double resolution) {
    const auto started = std::chrono::steady_clock::now();
    spec.validate();
    if (risk.size() != spec.size()) throw std::invalid_argument("risk matrix size does not match the portfolio");
    if (resolution <= 0.0) resolution = auto_resolution(spec);
    const std::int64_t units = units_for(resolution);
    const auto grid = lattice(spec, units);

    OptimizeResult result;
    result.resolution = resolution;
    result.polish_step = resolution / 10.0;

    std::vector<std::int64_t> best_k;
    double best = -std::numeric_limits<double>::infinity();
    enumerate(grid, [&](const std::vector<std::int64_t>& k) {
        ++result.grid_points;
        const double v = objective_value(to_weights(k, units), spec, risk);
        if (best_k.empty() || improves(v, best)) {
            best = v;
            best_k = k;
        }
    });
    result.evaluations = result.grid_points;
    if (best_k.empty()) {
        throw NumericalError(
            fmt::format("no grid point satisfies the bounds at resolution {}; try a finer resolution", resolution));
    }

    const std::int64_t fine_units = units * 10;
    const auto fine = lattice(spec, fine_units);
    std::vector<std::int64_t> k(best_k.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = best_k[i] * 10;
    const std::size_t n = k.size();
    for (;;) {
        double move_value = best;
        std::size_t from = n;
        std::size_t to = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (k[i] - 1 < fine.lo[i]) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j || k[j] + 1 > fine.hi[j]) continue;
                --k[i];
                ++k[j];
                const double v = objective_value(to_weights(k, fine_units), spec, risk);
                ++result.evaluations;
                ++k[i];
                --k[j];
                if (improves(v, move_value)) {
                    move_value = v;
                    from = i;
                    to = j;
                }
            }
        }
        if (from == n) break;
        --k[from];
        ++k[to];
        best = move_value;
    }

    result.weights.asset_ids = spec.asset_ids;
    result.weights.weights = to_weights(k, fine_units);
    result.value = objective_value(result.weights.weights, spec, risk);
    result.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

PortfolioSpec make_spec(const ReturnPanel& panel, const AllocationConfig& config) {
    PortfolioSpec spec;
    spec.asset_ids = panel.asset_ids();
    for (const auto& a : panel.assets()) {
        const auto& v = a.values();
        spec.expected_returns.push_back(std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
    }
    spec.risk_free = config.risk_free;
    spec.lower.assign(spec.size(), config.lower);
    spec.upper.assign(spec.size(), config.upper);
    spec.validate();
    return spec;
}

OptimizeResult allocate_from_affinity(const ReturnPanel& panel, const setdist::AffinityMatrix& affinity,
                                      const AllocationConfig& config) {
    if (affinity.ids() != panel.asset_ids()) throw DataError("affinity matrix assets do not match the price panel");
    const auto spec = make_spec(panel, config);
    return optimize(spec, affinity_risk(affinity), config.resolution);
}

CpoAllocation allocate_cpo_from_breaks(const ReturnPanel& panel, std::vector<BreakSet> breaks,
                                       const setdist::DistanceMeasure& measure, const AllocationConfig& config) {
    if (breaks.size() != panel.num_assets()) throw DataError("need one break set per panel asset");
    for (std::size_t i = 0; i < breaks.size(); ++i) {
        if (breaks[i].asset_id() != panel.asset(i).asset_id()) {
            throw DataError(fmt::format("break set {} does not match panel asset {}", breaks[i].asset_id(),
                                        panel.asset(i).asset_id()));
        }
    }
    if (panel.num_assets() == 1) {
        if (breaks.front().empty()) {
            throw DataError(fmt::format("empty break set for asset {}", breaks.front().asset_id()));
        }
        setdist::DistanceMatrix d(panel.asset_ids(), {0.0});
        auto a = setdist::affinity_matrix(d);
        auto result = allocate_from_affinity(panel, a, config);
        return {std::move(breaks), std::move(d), std::move(a), std::move(result)};
    }
    auto d = setdist::distance_matrix(breaks, measure);
    auto a = setdist::affinity_matrix(d);
    auto result = allocate_from_affinity(panel, a, config);
    return {std::move(breaks), std::move(d), std::move(a), std::move(result)};
}

CpoAllocation allocate_cpo(const ReturnPanel& panel, const changepoint::DetectorConfig& detector,
                           const setdist::DistanceMeasure& measure, const AllocationConfig& config,
                           changepoint::ThresholdStore& store) {
    return allocate_cpo_from_breaks(panel, changepoint::detect_breaks(panel, detector, store), measure, config);
}

OptimizeResult allocate_mvo(const ReturnPanel& panel, const AllocationConfig& config) {
    const auto spec = make_spec(panel, config);
    return optimize(spec, covariance(panel), config.resolution);
}

std::string weights_csv(const WeightVector& w) {
    std::string out = "asset_id,weight\n";
    for (std::size_t i = 0; i < w.weights.size(); ++i) {
        out += fmt::format("{},{}\n", csv::escape(w.asset_ids[i]), csv::format_double(w.weights[i]));
    }
    return out;
}

std::string report_json(const OptimizeResult& result, const std::string& method, bool include_timing) {
    nlohmann::ordered_json j;
    j["method"] = method;
    j["objective_value"] = result.value;
    j["resolution"] = result.resolution;
    j["polish_step"] = result.polish_step;
    j["grid_points"] = result.grid_points;
    j["evaluations"] = result.evaluations;
    if (include_timing) j["wall_time"] = result.wall_time_seconds;
    nlohmann::ordered_json weights = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < result.weights.weights.size(); ++i) {
        weights[result.weights.asset_ids[i]] = result.weights.weights[i];
    }
    j["weights"] = weights;
    return j.dump(2) + "\n";
}

}  // namespace cpo::optimizer
