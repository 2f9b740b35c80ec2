#pragma once

#include "cpo/changepoint.hpp"
#include "cpo/ingest.hpp"
#include "cpo/optimizer.hpp"
#include "cpo/setdist.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cpo::backtest {

enum class Method { Cpo, Mvo };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct BacktestConfig {
    Date train_from;
    Date train_to;
    Date test_from;
    Date test_to;
    Method method = Method::Cpo;
    changepoint::DetectorConfig detector = changepoint::DetectorConfig::sequential(1000.0);
    setdist::DistanceMeasure measure = setdist::DistanceMeasure::mj(0.5);
    optimizer::AllocationConfig allocation;

    // Ranges non-empty and train_to < test_from; throws std::invalid_argument.
    void validate() const;
};

struct BacktestReport {
    Method method = Method::Cpo;
    optimizer::WeightVector weights;
    std::vector<Date> dates;               // test-period dates
    std::vector<double> portfolio_returns; // simple per-period returns sum_i w_i (exp(x_i) - 1)
    std::vector<double> path;              // V_0 = 1, V_t = V_{t-1} (1 + r_t)
    double cumulative_return = 1.0;        // V_T / V_0
    double mean = 0.0;                     // mean gross return 1 + r_t
    double std = 0.0;                      // sample standard deviation, divisor n - 1
    double max_drawdown = 0.0;             // percent
    std::optional<double> kurtosis;        // excess; empty when undefined (n < 4 or zero variance)
};

// Fits weights on the train slice, holds them fixed over the test slice.
BacktestReport run_backtest(const ReturnPanel& panel, const BacktestConfig& config,
                            changepoint::ThresholdStore& store = changepoint::ThresholdStore::shared());

// Both legs, CPO on a worker thread. Returns {cpo, mvo}.
std::pair<BacktestReport, BacktestReport> run_comparison(
    const ReturnPanel& panel, const BacktestConfig& config,
    changepoint::ThresholdStore& store = changepoint::ThresholdStore::shared());

// Evaluates fixed weights on a panel: returns, path and statistics.
BacktestReport evaluate(const ReturnPanel& test, const optimizer::WeightVector& weights, Method method);

// max_t (peak_{<=t} - v_t) / peak_{<=t} * 100. Path must be non-empty and positive.
double max_drawdown(std::span<const double> path);

// m4 / m2^2 - 3 with population moments. Needs >= 4 values and nonzero variance.
double excess_kurtosis(std::span<const double> x);

struct DensityTable {
    double bandwidth = 0.0;
    std::vector<double> x;
    std::vector<double> density;   // Gaussian KDE at x
    std::vector<double> bin_lo;
    std::vector<double> bin_hi;
    std::vector<std::size_t> counts;
};

// Gaussian KDE (Silverman bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5)) on
// `points` equally spaced x spanning the data +- 3 bandwidths, and an
// equal-width histogram with `bins` bins over [min, max] (widened by 0.5 on
// each side when all values are equal).
DensityTable predictive_density_export(std::span<const double> returns, std::size_t bins, std::size_t points = 200);

std::string report_json(const BacktestReport& report, const BacktestConfig& config);
// "step,date,<label>..." with the shared V_0 row first (empty date).
std::string paths_csv(const std::vector<const BacktestReport*>& reports);
// "method,x,density"
std::string density_csv(const std::vector<std::pair<std::string, DensityTable>>& tables);
// "method,bin_lo,bin_hi,count"
std::string histogram_csv(const std::vector<std::pair<std::string, DensityTable>>& tables);

}  // namespace cpo::backtest
