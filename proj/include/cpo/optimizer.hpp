#pragma once

#include "cpo/break_set.hpp"
#include "cpo/changepoint.hpp"
#include "cpo/ingest.hpp"
#include "cpo/setdist.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cpo::optimizer {

// Candidate assets with per-period expected returns, the risk-free rate in
// the same units, and per-asset weight bounds.
struct PortfolioSpec {
    std::vector<std::string> asset_ids;
    std::vector<double> expected_returns;
    double risk_free = 0.0;
    std::vector<double> lower;
    std::vector<double> upper;

    std::size_t size() const { return asset_ids.size(); }
    // Shape or range problems throw std::invalid_argument; bounds with
    // sum(lower) > 1 or sum(upper) < 1 throw NumericalError.
    void validate() const;
};

struct WeightVector {
    std::vector<std::string> asset_ids;
    std::vector<double> weights;
};

enum class RiskKind { Covariance, Affinity };

// The quadratic form in the objective's denominator: a sample covariance
// (Sharpe-style objective) or a break-affinity matrix (MJ ratio).
class RiskMatrix {
public:
    RiskMatrix(RiskKind kind, std::size_t n, std::vector<double> entries);

    RiskKind kind() const { return kind_; }
    std::size_t size() const { return n_; }
    double operator()(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
    const std::vector<double>& entries() const { return entries_; }
    double quadratic_form(std::span<const double> w) const;

private:
    RiskKind kind_;
    std::size_t n_;
    std::vector<double> entries_;
};

// Sample covariance of the panel columns, divisor n - 1. Needs length >= 2.
RiskMatrix covariance(const ReturnPanel& panel);
RiskMatrix affinity_risk(const setdist::AffinityMatrix& affinity);

// (w.R - R_f) / (w' M w). Throws NumericalError("degenerate risk") when the
// denominator is not positive.
double objective_value(std::span<const double> w, const PortfolioSpec& spec, const RiskMatrix& risk);

// Number of points k/N (N = 1/resolution) with sum 1 inside the bounds;
// saturates at UINT64_MAX.
std::uint64_t grid_size(const PortfolioSpec& spec, double resolution);

inline constexpr std::uint64_t kDefaultGridBudget = 2'000'000;

// Finest resolution from 0.005, 0.01, 0.02, 0.025, 0.05, 0.1, 0.2, 0.25, 0.5, 1
// whose grid is non-empty and within `budget` points.
double auto_resolution(const PortfolioSpec& spec, std::uint64_t budget = kDefaultGridBudget);

struct OptimizeResult {
    WeightVector weights;
    double value = 0.0;
    double resolution = 0.0;   // grid step actually used
    double polish_step = 0.0;  // resolution / 10
    std::uint64_t grid_points = 0;
    std::uint64_t evaluations = 0;
    double wall_time_seconds = 0.0;
};

// Exhaustive search of the bounded simplex grid at `resolution` (<= 0 picks
// auto_resolution), then steepest-ascent pairwise mass transfers of
// resolution/10 until no move improves the objective. Among equal objective
// values (relative 1e-12) the lexicographically smallest weight vector wins.
// Resolution must divide 1. Deterministic.
OptimizeResult optimize(const PortfolioSpec& spec, const RiskMatrix& risk, double resolution = 0.0);

struct AllocationConfig {
    double lower = 0.0;
    double upper = 1.0;
    double risk_free = 0.0;
    double resolution = 0.0;  // <= 0: auto
};

// Expected returns = per-asset mean log return over the panel.
PortfolioSpec make_spec(const ReturnPanel& panel, const AllocationConfig& config);

struct CpoAllocation {
    std::vector<BreakSet> breaks;
    setdist::DistanceMatrix distances;
    setdist::AffinityMatrix affinity;
    OptimizeResult result;
};

// Break detection per asset, distance matrix, affinity matrix, then the MJ ratio.
CpoAllocation allocate_cpo(const ReturnPanel& panel, const changepoint::DetectorConfig& detector,
                           const setdist::DistanceMeasure& measure, const AllocationConfig& config,
                           changepoint::ThresholdStore& store = changepoint::ThresholdStore::shared());
// Same pipeline starting from known break sets (one per panel asset, same order).
CpoAllocation allocate_cpo_from_breaks(const ReturnPanel& panel, std::vector<BreakSet> breaks,
                                       const setdist::DistanceMeasure& measure, const AllocationConfig& config);
// MJ ratio against a precomputed affinity matrix whose ids match the panel.
OptimizeResult allocate_from_affinity(const ReturnPanel& panel, const setdist::AffinityMatrix& affinity,
                                      const AllocationConfig& config);
// Sharpe-style objective with the sample covariance.
OptimizeResult allocate_mvo(const ReturnPanel& panel, const AllocationConfig& config);

std::string weights_csv(const WeightVector& w);
// {objective_value, resolution, polish_step, grid_points, evaluations[, wall_time]}
std::string report_json(const OptimizeResult& result, const std::string& method, bool include_timing);

}  // namespace cpo::optimizer
