#pragma once

#include "cpo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

// Brute-force re-implementations used as ground truth.
namespace cpo::testing {

inline optimizer::RiskMatrix random_affinity(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> e(n * n, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) e[i * n + j] = e[j * n + i] = u(rng);
    return optimizer::RiskMatrix(optimizer::RiskKind::Affinity, n, e);
}

// Written out term by term, independent of RiskMatrix::quadratic_form.
inline double oracle_objective(const std::vector<double>& w, const optimizer::PortfolioSpec& s,
                               const optimizer::RiskMatrix& m) {
    double num = -s.risk_free;
    for (std::size_t i = 0; i < w.size(); ++i) num += w[i] * s.expected_returns[i];
    double den = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < w.size(); ++j) den += w[i] * m(i, j) * w[j];
    return num / den;
}

struct Best {
    std::vector<double> w;
    double value = -INFINITY;
};

// Exhaustive three-asset enumeration on a grid of step 1/units.
inline Best brute_force3(const optimizer::PortfolioSpec& s, const optimizer::RiskMatrix& m, int units) {
    Best best;
    for (int a = 0; a <= units; ++a) {
        for (int b = 0; a + b <= units; ++b) {
            const std::vector<double> w{double(a) / units, double(b) / units, double(units - a - b) / units};
            bool ok = true;
            for (int i = 0; i < 3; ++i) ok = ok && w[i] >= s.lower[i] - 1e-12 && w[i] <= s.upper[i] + 1e-12;
            if (!ok) continue;
            const double v = oracle_objective(w, s, m);
            if (v > best.value) best = {w, v};
        }
    }
    return best;
}

// Largest objective change from one mass transfer of `step` at w.
inline double cell_variation(const std::vector<double>& w, const optimizer::PortfolioSpec& s,
                             const optimizer::RiskMatrix& m, double step) {
    const double f = oracle_objective(w, s, m);
    double worst = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = 0; j < w.size(); ++j) {
            if (i == j) continue;
            auto v = w;
            v[i] += step;
            v[j] -= step;
            if (v[i] > s.upper[i] + 1e-12 || v[j] < s.lower[j] - 1e-12) continue;
            worst = std::max(worst, std::abs(oracle_objective(v, s, m) - f));
        }
    }
    return worst;
}

inline double oracle_drawdown(const std::vector<double>& path) {
    double worst = 0.0;
    for (std::size_t i = 0; i < path.size(); ++i)
        for (std::size_t j = i; j < path.size(); ++j) worst = std::max(worst, (path[i] - path[j]) / path[i] * 100.0);
    return worst;
}

inline double oracle_kurtosis(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : x) {
        m2 += std::pow(v - mean, 2) / n;
        m4 += std::pow(v - mean, 4) / n;
    }
    return m4 / (m2 * m2) - 3.0;
}

}  // namespace cpo::testing
