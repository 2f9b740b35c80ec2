#include "cpo/errors.hpp"
#include "cpo/setdist.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace cpo;
using namespace cpo::setdist;

namespace {

std::vector<double> hundreds(int from, int to) {
    std::vector<double> v;
    for (int x = from; x <= to; x += 100) v.push_back(x);
    return v;
}

// Eq. written out with naive nested minima.
double naive_mj(const std::vector<double>& s, const std::vector<double>& t, double p) {
    auto dmin = [](double x, const std::vector<double>& y) {
        double best = 1e300;
        for (double v : y) best = std::min(best, std::abs(x - v));
        return best;
    };
    double a = 0, b = 0;
    for (double x : t) a += std::pow(dmin(x, s), p);
    for (double x : s) b += std::pow(dmin(x, t), p);
    return std::pow(a / (2.0 * t.size()) + b / (2.0 * s.size()), 1.0 / p);
}

double naive_hausdorff(const std::vector<double>& s, const std::vector<double>& t) {
    double worst = 0;
    for (double x : s) {
        double best = 1e300;
        for (double y : t) best = std::min(best, std::abs(x - y));
        worst = std::max(worst, best);
    }
    for (double y : t) {
        double best = 1e300;
        for (double x : s) best = std::min(best, std::abs(x - y));
        worst = std::max(worst, best);
    }
    return worst;
}

// Midpoint rule on the quantile functions.
double quadrature_wasserstein(std::vector<double> s, std::vector<double> t, double q, int grid) {
    std::sort(s.begin(), s.end());
    std::sort(t.begin(), t.end());
    double sum = 0;
    for (int k = 0; k < grid; ++k) {
        const double u = (k + 0.5) / grid;
        const double fs = s[std::min<std::size_t>(s.size() - 1, static_cast<std::size_t>(u * s.size()))];
        const double ft = t[std::min<std::size_t>(t.size() - 1, static_cast<std::size_t>(u * t.size()))];
        sum += std::pow(std::abs(fs - ft), q);
    }
    return std::pow(sum / grid, 1.0 / q);
}

std::vector<double> random_set(std::mt19937_64& rng, int max_size, int lo, int hi) {
    std::uniform_int_distribution<int> size(1, max_size);
    std::uniform_int_distribution<int> value(lo, hi);
    std::set<int> s;
    const int n = size(rng);
    while (static_cast<int>(s.size()) < n) s.insert(value(rng));
    return {s.begin(), s.end()};
}

}  // namespace

TEST_CASE("worked example: shifted hundreds") {
    const auto s = hundreds(100, 900);
    const auto t = hundreds(200, 1000);
    CHECK(mj_distance(s, t, 0.5) == doctest::Approx(100.0 / 81.0).epsilon(1e-12));
    CHECK(mj_distance(s, t, 1.0) == doctest::Approx(100.0 / 9.0).epsilon(1e-12));
    CHECK(mj_distance(s, t, 2.0) == doctest::Approx(100.0 * std::sqrt(1.0 / 9.0)).epsilon(1e-12));
    CHECK(hausdorff_distance(s, t) == 100.0);
    CHECK(std::abs(wasserstein_distance(s, t, 1.0) - 100.0) < 1e-9);
    CHECK(std::abs(wasserstein_distance(s, t, 2.0) - 100.0) < 1e-9);
}

TEST_CASE("identical sets are at distance zero") {
    const std::vector<double> s{3, 17, 40, 41};
    CHECK(mj_distance(s, s, 0.5) == 0.0);
    CHECK(hausdorff_distance(s, s) == 0.0);
    CHECK(wasserstein_distance(s, s, 1.0) == 0.0);
}

TEST_CASE("hausdorff sup is attained at the far point") {
    CHECK(hausdorff_distance(std::vector<double>{0}, std::vector<double>{0, 1000}) == 1000.0);
}

TEST_CASE("empty sets are rejected") {
    const std::vector<double> empty;
    const std::vector<double> one{1};
    CHECK_THROWS_WITH_AS(mj_distance(empty, one, 0.5), "empty break set", DataError);
    CHECK_THROWS_AS(hausdorff_distance(one, empty), DataError);
    CHECK_THROWS_AS(wasserstein_distance(empty, one, 1.0), DataError);
}

TEST_CASE("orders are validated") {
    const std::vector<double> one{1};
    CHECK_THROWS_AS(mj_distance(one, one, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(wasserstein_distance(one, one, 0.5), std::invalid_argument);
}

TEST_CASE("MJ matches the naive double loop") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 500; ++rep) {
        const auto s = random_set(rng, 8, 0, 100);
        const auto t = random_set(rng, 8, 0, 100);
        for (double p : {0.5, 1.0, 2.0}) {
            CHECK(std::abs(mj_distance(s, t, p) - naive_mj(s, t, p)) <= 1e-12 * std::max(1.0, naive_mj(s, t, p)));
        }
        CHECK(hausdorff_distance(s, t) == naive_hausdorff(s, t));
    }
}

TEST_CASE("wasserstein with unequal sizes matches quadrature") {
    const std::vector<double> s{0, 1};
    const std::vector<double> t{0, 1, 2};
    // 10^6 cells; the breakpoints 1/3, 1/2, 2/3 fall inside cells, costing at most ~1e-6.
    CHECK(std::abs(wasserstein_distance(s, t, 1.0) - quadrature_wasserstein(s, t, 1.0, 1000000)) < 1e-6);
    // |0 - 1| on (1/3, 1/2] plus |1 - 2| on (2/3, 1].
    CHECK(wasserstein_distance(s, t, 1.0) == doctest::Approx(1.0 / 6.0 + 1.0 / 3.0).epsilon(1e-12));

    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = random_set(rng, 7, 0, 50);
        const auto b = random_set(rng, 7, 0, 50);
        for (double q : {1.0, 2.0}) {
            CHECK(std::abs(wasserstein_distance(a, b, q) - quadrature_wasserstein(a, b, q, 1 << 20)) < 1e-3);
        }
    }
}

TEST_CASE("symmetry, indiscernibles and translation") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> shift(-500, 500);
    for (int rep = 0; rep < 300; ++rep) {
        const auto s = random_set(rng, 10, 0, 200);
        const auto t = random_set(rng, 10, 0, 200);
        const double a = std::round(shift(rng));
        std::vector<double> sa = s, ta = t;
        for (double& v : sa) v += a;
        for (double& v : ta) v += a;
        for (const auto& m : {DistanceMeasure::mj(0.5), DistanceMeasure::mj(1.0), DistanceMeasure::hausdorff(),
                              DistanceMeasure::wasserstein(1.0), DistanceMeasure::wasserstein(2.0)}) {
            const double d = distance(m, s, t);
            CHECK(d == distance(m, t, s));
            CHECK((d == 0.0) == (s == t));
            CHECK(distance(m, sa, ta) == doctest::Approx(d).epsilon(1e-12));
            CHECK(distance(m, s, s) == 0.0);
        }
    }
}

TEST_CASE("an outlier dominates hausdorff but is damped in MJ") {
    const auto s = hundreds(100, 900);
    auto t = hundreds(100, 900);
    const double tn = 1e6;
    t.push_back(tn);
    CHECK(hausdorff_distance(s, t) / tn == doctest::Approx(1.0).epsilon(0.01));
    for (double p : {0.5, 1.0, 2.0}) {
        const double ratio = mj_distance(s, t, p) * std::pow(2.0 * t.size(), 1.0 / p) / tn;
        CHECK(ratio == doctest::Approx(1.0).epsilon(0.01));
    }

    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto a = random_set(rng, 9, 0, 1000);
        auto b = random_set(rng, 9, 0, 1000);
        b.push_back(tn);
        CHECK(hausdorff_distance(a, b) / tn == doctest::Approx(1.0).epsilon(0.01));
        const double ratio = mj_distance(a, b, 1.0) * 2.0 * b.size() / tn;
        CHECK(ratio == doctest::Approx(1.0).epsilon(0.01));
    }
}

TEST_CASE("intersection inequality and MJ <= hausdorff") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<int> size(1, 12);
    std::uniform_int_distribution<int> value(0, 1000);
    for (int rep = 0; rep < 1000; ++rep) {
        const int ns = size(rng);
        const int nt = size(rng);
        const int r = std::uniform_int_distribution<int>(0, std::min(ns, nt))(rng);
        std::set<int> common;
        while (static_cast<int>(common.size()) < r) common.insert(value(rng));
        std::set<int> s = common, t = common;
        while (static_cast<int>(s.size()) < ns) s.insert(value(rng));
        while (static_cast<int>(t.size()) < nt) {
            const int v = value(rng);
            if (!s.count(v)) t.insert(v);
        }
        std::vector<int> inter;
        std::set_intersection(s.begin(), s.end(), t.begin(), t.end(), std::back_inserter(inter));
        REQUIRE(static_cast<int>(inter.size()) == r);
        const std::vector<double> sv(s.begin(), s.end()), tv(t.begin(), t.end());
        const double h = hausdorff_distance(sv, tv);
        for (double p : {0.5, 1.0, 2.0}) {
            const double c = 1.0 - r / 2.0 * (1.0 / ns + 1.0 / nt);
            CHECK(mj_distance(sv, tv, p) <= std::pow(c, 1.0 / p) * h + 1e-9);
            CHECK(mj_distance(sv, tv, p) <= h + 1e-9);
        }
    }
}

TEST_CASE("wasserstein translation equals the shift") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> shift(-1000, 1000);
    for (int rep = 0; rep < 100; ++rep) {
        const auto s = random_set(rng, 15, 0, 1000);
        const double a = shift(rng);
        std::vector<double> t = s;
        for (double& v : t) v += a;
        CHECK(std::abs(wasserstein_distance(s, t, 1.0) - std::abs(a)) < 1e-9);
        CHECK(std::abs(wasserstein_distance(s, t, 3.0) - std::abs(a)) < 1e-9);
    }
    // Translate by one: wasserstein and hausdorff coincide despite n-1 shared points.
    const std::vector<double> s{0, 1, 2, 3, 4};
    const std::vector<double> t{1, 2, 3, 4, 5};
    CHECK(wasserstein_distance(s, t, 1.0) == doctest::Approx(1.0));
    CHECK(hausdorff_distance(s, t) == 1.0);
}

TEST_CASE("MJ at p = 0.5 can violate the triangle inequality") {
    bool found = false;
    std::mt19937_64 rng(37);
    for (int rep = 0; rep < 5000 && !found; ++rep) {
        const auto a = random_set(rng, 4, 0, 50);
        const auto b = random_set(rng, 4, 0, 50);
        const auto c = random_set(rng, 4, 0, 50);
        found = mj_distance(a, c, 0.5) > mj_distance(a, b, 0.5) + mj_distance(b, c, 0.5) + 1e-9;
    }
    CHECK(found);
}

TEST_CASE("distance matrix") {
    const std::vector<BreakSet> same{BreakSet("a", {10, 20}), BreakSet("b", {10, 20})};
    const auto z = distance_matrix(same, DistanceMeasure::mj());
    CHECK(z.entries() == std::vector<double>(4, 0.0));

    std::vector<std::int64_t> s, t;
    for (int x = 100; x <= 900; x += 100) s.push_back(x);
    for (int x = 200; x <= 1000; x += 100) t.push_back(x);
    const std::vector<BreakSet> pair{BreakSet("s", s), BreakSet("t", t)};
    const auto d = distance_matrix(pair, DistanceMeasure::mj(1.0));
    CHECK(d(0, 1) == doctest::Approx(100.0 / 9.0).epsilon(1e-12));
    CHECK(d(1, 0) == d(0, 1));

    std::mt19937_64 rng(41);
    std::vector<BreakSet> four;
    for (int i = 0; i < 4; ++i) {
        const auto pts = random_set(rng, 6, 0, 300);
        four.emplace_back("x" + std::to_string(i), std::vector<std::int64_t>(pts.begin(), pts.end()));
    }
    const auto m = distance_matrix(four, DistanceMeasure::wasserstein(1.0));
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(m(i, i) == 0.0);
        for (std::size_t j = 0; j < 4; ++j) {
            if (i != j) CHECK(m(i, j) == wasserstein_distance(four[i].points(), four[j].points(), 1.0));
        }
    }
    CHECK_NOTHROW(DistanceMatrix::checked(m));
}

TEST_CASE("distance matrix names the empty asset") {
    const std::vector<BreakSet> sets{BreakSet("a", {1}), BreakSet("gold", {}), BreakSet("c", {2})};
    CHECK_THROWS_WITH_AS(distance_matrix(sets, DistanceMeasure::mj()), "empty break set for asset gold", DataError);
    const std::vector<BreakSet> one{BreakSet("a", {1})};
    CHECK_THROWS_AS(distance_matrix(one, DistanceMeasure::mj()), DataError);
}

TEST_CASE("affinity matrix") {
    const DistanceMatrix zero({"a", "b", "c"}, std::vector<double>(9, 0.0));
    CHECK(affinity_matrix(zero).entries() == std::vector<double>(9, 1.0));

    const DistanceMatrix two({"a", "b"}, {0, 100, 100, 0});
    CHECK(affinity_matrix(two).entries() == std::vector<double>{1, 0, 0, 1});

    const DistanceMatrix three({"a", "b", "c"}, {0, 2, 8, 2, 0, 4, 8, 4, 0});
    const auto a = affinity_matrix(three);
    CHECK(a(0, 2) == 0.0);
    CHECK(a(0, 1) == doctest::Approx(0.75));
    for (std::size_t i = 0; i < 3; ++i) CHECK(a(i, i) == 1.0);
    CHECK_NOTHROW(AffinityMatrix::checked(a));
}

TEST_CASE("checked matrices reject broken invariants") {
    CHECK_THROWS_AS(DistanceMatrix::checked(LabeledMatrix({"a", "b"}, {0, 1, 2, 0})), DataError);
    CHECK_THROWS_AS(DistanceMatrix::checked(LabeledMatrix({"a", "b"}, {1, 1, 1, 0})), DataError);
    CHECK_THROWS_AS(AffinityMatrix::checked(LabeledMatrix({"a", "b"}, {1, 2, 2, 1})), DataError);
    CHECK_THROWS_AS(LabeledMatrix({"a", "b"}, {1, 2, 2}), DataError);
}
