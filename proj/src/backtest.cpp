#include "cpo/backtest.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <stdexcept>

namespace cpo::backtest {

std::string to_string(Method method) { return method == Method::Cpo ? "cpo" : "mvo"; }

Method parse_method(const std::string& name) {
    if (name == "cpo") return Method::Cpo;
    if (name == "mvo") return Method::Mvo;
    throw std::invalid_argument(fmt::format("unknown method '{}' (cpo, mvo)", name));
}

void BacktestConfig::validate() const {
    if (train_from > train_to) throw std::invalid_argument("train range is empty");
    if (test_from > test_to) throw std::invalid_argument("test range is empty");
    if (!(train_to < test_from)) throw std::invalid_argument("train range must end before the test range starts");
}

double max_drawdown(std::span<const double> path) {
    if (path.empty()) throw std::invalid_argument("drawdown needs a non-empty path");
    double peak = path.front();
    double worst = 0.0;
    for (double v : path) {
        if (!(v > 0.0)) throw std::invalid_argument("drawdown path must be positive");
        peak = std::max(peak, v);
        worst = std::max(worst, (peak - v) / peak);
    }
    return worst * 100.0;
}

double excess_kurtosis(std::span<const double> x) {
    if (x.size() < 4) throw std::invalid_argument("kurtosis needs at least four observations");
    // a rounding-level m2 from a constant series is not a variance
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); }))
        throw NumericalError("kurtosis undefined: zero variance");
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) throw NumericalError("kurtosis undefined: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

BacktestReport evaluate(const ReturnPanel& test, const optimizer::WeightVector& weights, Method method) {
    if (weights.asset_ids != test.asset_ids()) throw DataError("weights do not match the test panel assets");
    BacktestReport r;
    r.method = method;
    r.weights = weights;
    r.dates = test.timestamps();
    const std::size_t len = test.length();
    r.portfolio_returns.assign(len, 0.0);
    for (std::size_t i = 0; i < test.num_assets(); ++i) {
        const auto& x = test.asset(i).values();
        for (std::size_t t = 0; t < len; ++t) r.portfolio_returns[t] += weights.weights[i] * std::expm1(x[t]);
    }
    r.path.reserve(len + 1);
    r.path.push_back(1.0);
    double sum = 0.0;
    for (double p : r.portfolio_returns) {
        r.path.push_back(r.path.back() * (1.0 + p));
        sum += 1.0 + p;
    }
    r.cumulative_return = r.path.back();
    r.mean = sum / static_cast<double>(len);
    if (len >= 2) {
        double ss = 0.0;
        for (double p : r.portfolio_returns) ss += (1.0 + p - r.mean) * (1.0 + p - r.mean);
        r.std = std::sqrt(ss / static_cast<double>(len - 1));
    }
    r.max_drawdown = max_drawdown(r.path);
    try {
        r.kurtosis = excess_kurtosis(r.portfolio_returns);
    } catch (const std::exception&) {
        r.kurtosis.reset();
    }
    return r;
}

BacktestReport run_backtest(const ReturnPanel& panel, const BacktestConfig& config, changepoint::ThresholdStore& store) {
    config.validate();
    const auto train = panel.slice(config.train_from, config.train_to);
    const auto test = panel.slice(config.test_from, config.test_to);
    optimizer::OptimizeResult fit;
    if (config.method == Method::Cpo) {
        if (train.length() < 2 * config.detector.min_segment) {
            throw DataError(fmt::format("training window has {} observations; detection needs at least {}",
                                        train.length(), 2 * config.detector.min_segment));
        }
        fit = optimizer::allocate_cpo(train, config.detector, config.measure, config.allocation, store).result;
    } else {
        fit = optimizer::allocate_mvo(train, config.allocation);
    }
    return evaluate(test, fit.weights, config.method);
}

std::pair<BacktestReport, BacktestReport> run_comparison(const ReturnPanel& panel, const BacktestConfig& config,
                                                         changepoint::ThresholdStore& store) {
    auto cpo_config = config;
    cpo_config.method = Method::Cpo;
    auto mvo_config = config;
    mvo_config.method = Method::Mvo;
    auto cpo_leg = std::async(std::launch::async, [&] { return run_backtest(panel, cpo_config, store); });
    auto mvo = run_backtest(panel, mvo_config, store);
    return {cpo_leg.get(), std::move(mvo)};
}

namespace {

double quantile7(std::vector<double> sorted, double q) {
    std::sort(sorted.begin(), sorted.end());
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

DensityTable predictive_density_export(std::span<const double> returns, std::size_t bins, std::size_t points) {
    if (returns.empty()) throw std::invalid_argument("density needs at least one return");
    if (bins < 1 || points < 2) throw std::invalid_argument("density needs bins >= 1 and points >= 2");
    const double n = static_cast<double>(returns.size());
    std::vector<double> x(returns.begin(), returns.end());
    const auto [lo_it, hi_it] = std::minmax_element(x.begin(), x.end());
    const double lo = *lo_it;
    const double hi = *hi_it;

    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    const double sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double iqr = (quantile7(x, 0.75) - quantile7(x, 0.25)) / 1.34;
    double spread = std::min(sd, iqr);
    if (!(spread > 0.0)) spread = std::max(sd, iqr);
    if (!(spread > 0.0)) spread = 1e-3 * std::max(1.0, std::abs(mean));

    DensityTable table;
    table.bandwidth = 0.9 * spread * std::pow(n, -0.2);
    const double h = table.bandwidth;
    const double from = lo - 3.0 * h;
    const double to = hi + 3.0 * h;
    const double norm = 1.0 / (n * h * std::sqrt(2.0 * std::numbers::pi));
    for (std::size_t k = 0; k < points; ++k) {
        const double at = from + (to - from) * static_cast<double>(k) / static_cast<double>(points - 1);
        double s = 0.0;
        for (double v : x) {
            const double z = (at - v) / h;
            s += std::exp(-0.5 * z * z);
        }
        table.x.push_back(at);
        table.density.push_back(s * norm);
    }

    double b_lo = lo;
    double b_hi = hi;
    if (!(b_hi > b_lo)) {
        b_lo -= 0.5;
        b_hi += 0.5;
    }
    const double width = (b_hi - b_lo) / static_cast<double>(bins);
    table.counts.assign(bins, 0);
    for (std::size_t b = 0; b < bins; ++b) {
        table.bin_lo.push_back(b_lo + width * static_cast<double>(b));
        table.bin_hi.push_back(b + 1 == bins ? b_hi : b_lo + width * static_cast<double>(b + 1));
    }
    for (double v : x) {
        auto b = static_cast<std::size_t>(std::floor((v - b_lo) / width));
        table.counts[std::min(b, bins - 1)] += 1;
    }
    return table;
}

std::string report_json(const BacktestReport& report, const BacktestConfig& config) {
    nlohmann::ordered_json j;
    j["method"] = to_string(report.method);
    j["train"] = {format_date(config.train_from), format_date(config.train_to)};
    j["test"] = {format_date(config.test_from), format_date(config.test_to)};
    nlohmann::ordered_json weights = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < report.weights.weights.size(); ++i) {
        weights[report.weights.asset_ids[i]] = report.weights.weights[i];
    }
    j["weights"] = weights;
    j["periods"] = report.portfolio_returns.size();
    j["cumulative_return"] = report.cumulative_return;
    j["mean"] = report.mean;
    j["std"] = report.std;
    j["max_drawdown"] = report.max_drawdown;
    j["kurtosis"] = report.kurtosis ? nlohmann::ordered_json(*report.kurtosis) : nlohmann::ordered_json(nullptr);
    j["conventions"] = {
        {"returns", "simple, r = exp(log return) - 1, buy-and-hold weights"},
        {"mean", "mean per-period gross return"},
        {"std", "sample standard deviation of per-period returns"},
        {"max_drawdown", "percent, on the value path including V_0 = 1"},
        {"kurtosis", "excess, bias-uncorrected m4/m2^2 - 3"},
    };
    if (report.method == Method::Cpo) {
        j["measure"] = config.measure.name();
        j["detector"] = {{"arl0", config.detector.arl0.value_or(0.0)},
                         {"min_segment", config.detector.min_segment},
                         {"mc_reps", config.detector.mc_reps},
                         {"seed", config.detector.seed}};
    }
    j["portfolio_returns"] = report.portfolio_returns;
    return j.dump(2) + "\n";
}

std::string paths_csv(const std::vector<const BacktestReport*>& reports) {
    if (reports.empty()) throw std::invalid_argument("no reports");
    const auto& dates = reports.front()->dates;
    std::string out = "step,date";
    for (const auto* r : reports) {
        if (r->dates != dates) throw std::invalid_argument("reports cover different test dates");
        out += "," + to_string(r->method);
    }
    out += "\n";
    for (std::size_t t = 0; t <= dates.size(); ++t) {
        out += fmt::format("{},{}", t, t == 0 ? std::string() : format_date(dates[t - 1]));
        for (const auto* r : reports) out += "," + csv::format_double(r->path[t]);
        out += "\n";
    }
    return out;
}

std::string density_csv(const std::vector<std::pair<std::string, DensityTable>>& tables) {
    std::string out = "method,x,density\n";
    for (const auto& [label, t] : tables) {
        for (std::size_t k = 0; k < t.x.size(); ++k) {
            out += fmt::format("{},{},{}\n", csv::escape(label), csv::format_double(t.x[k]),
                               csv::format_double(t.density[k]));
        }
    }
    return out;
}

std::string histogram_csv(const std::vector<std::pair<std::string, DensityTable>>& tables) {
    std::string out = "method,bin_lo,bin_hi,count\n";
    for (const auto& [label, t] : tables) {
        for (std::size_t b = 0; b < t.counts.size(); ++b) {
            out += fmt::format("{},{},{},{}\n", csv::escape(label), csv::format_double(t.bin_lo[b]),
                               csv::format_double(t.bin_hi[b]), t.counts[b]);
        }
    }
    return out;
}

}  // namespace cpo::backtest
