#include "cpo/changepoint.hpp"
#include "cpo/csv.hpp"
#include "cpo/errors.hpp"
#include "cpo/random.hpp"
#include "cpo/setdist.hpp"
#include "cpo/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

using namespace cpo;
using namespace cpo::synthetic;

namespace {

double sample_variance(const std::vector<double>& x) {
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
    double s = 0.0;
    for (double v : x) s += (v - mean) * (v - mean);
    return s / (x.size() - 1);
}

}  // namespace

TEST_CASE("spec validation names the field") {
    SimSpec s;
    CHECK_NOTHROW(s.validate());
    auto bad = s;
    bad.ar_coeff = 1.0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("ar_coeff"), std::invalid_argument);
    bad = s;
    bad.garch_alpha = 0.5;
    bad.garch_beta = 0.5;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("garch"), std::invalid_argument);
    bad = s;
    bad.student_dof = 2.0;
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("student_dof"), std::invalid_argument);
    bad = s;
    bad.break_times = {0};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("break_times"), std::invalid_argument);
    bad.break_times = {500, 400};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("break_times"), std::invalid_argument);
    bad.break_times = {static_cast<std::int64_t>(s.length)};
    CHECK_THROWS_WITH_AS(bad.validate(), doctest::Contains("break_times"), std::invalid_argument);
    bad = s;
    bad.jump_prob_direction = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.jump_scale = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK(s.effective_jump_scale() == doctest::Approx(5.0 * std::sqrt(s.garch_omega)));
}

TEST_CASE("pure AR(1) with constant variance") {
    SimSpec s;
    s.length = 100000;
    s.ar_coeff = 0.5;
    s.garch_alpha = s.garch_beta = s.leverage_gamma = 0.0;
    s.jump_scale = 0.0;
    s.seed = 11;
    const auto out = simulate(s);
    const double oracle = s.garch_omega / (1.0 - s.ar_coeff * s.ar_coeff);
    CHECK(std::abs(sample_variance(out.returns.values()) / oracle - 1.0) < 0.03);
    for (double v : out.conditional_variance) CHECK(v == s.garch_omega);
}

TEST_CASE("garch variance matches the unconditional value") {
    SimSpec s;
    s.length = 100000;
    s.jump_scale = 0.0;
    for (std::uint64_t seed : {21, 22, 23}) {
        s.seed = seed;
        const auto out = simulate(s);
        const double oracle = s.garch_omega / (1.0 - s.garch_alpha - s.garch_beta - s.leverage_gamma / 2.0);
        CHECK(s.unconditional_variance() == doctest::Approx(oracle));
        CHECK(std::abs(sample_variance(out.returns.values()) / oracle - 1.0) < 0.10);
    }
}

TEST_CASE("conditional variance stays above omega") {
    SimSpec s;
    s.length = 20000;
    s.break_times = {5000, 12000};
    s.seed = 31;
    const auto out = simulate(s);
    REQUIRE(out.conditional_variance.size() == s.length);
    for (double v : out.conditional_variance) REQUIRE(v >= s.garch_omega);
}

TEST_CASE("reproducible and seed-sensitive") {
    SimSpec s;
    s.break_times = {300, 600};
    const auto a = simulate(s);
    const auto b = simulate(s);
    CHECK(a.returns.values() == b.returns.values());
    CHECK(a.conditional_variance == b.conditional_variance);
    CHECK(returns_csv({a}) == returns_csv({b}));
    s.seed = 2;
    CHECK(simulate(s).returns.values() != a.returns.values());
    CHECK(a.true_breaks.indices() == std::vector<std::int64_t>{300, 600});
    CHECK(a.returns.size() == 1000);
    CHECK(format_date(a.returns.timestamps().front()) == "2000-01-01");
    CHECK(format_date(a.returns.timestamps().back()) == "2002-09-26");
}

TEST_CASE("breaks only move the mean level") {
    SimSpec s;
    s.seed = 41;
    const auto plain = simulate(s);
    CHECK(plain.true_breaks.empty());

    // no magnitude: identical to the run without breaks
    auto zero = s;
    zero.break_times = {200, 700};
    zero.jump_scale = 0.0;
    auto none = s;
    none.jump_scale = 0.0;
    CHECK(simulate(zero).returns.values() == simulate(none).returns.values());

    // with jumps and constant variance the difference is a step function
    auto flat = s;
    flat.garch_alpha = flat.garch_beta = flat.leverage_gamma = 0.0;
    auto jumped = flat;
    jumped.break_times = {200, 700};
    const auto x0 = simulate(flat).returns.values();
    const auto x1 = simulate(jumped).returns.values();
    std::vector<double> diff(x0.size());
    for (std::size_t t = 0; t < x0.size(); ++t) diff[t] = x1[t] - x0[t];
    for (std::size_t t = 0; t < 200; ++t) CHECK(diff[t] == 0.0);
    for (std::size_t t = 201; t < 700; ++t) CHECK(diff[t] == doctest::Approx(diff[200]).epsilon(1e-9));
    for (std::size_t t = 701; t < x0.size(); ++t) CHECK(diff[t] == doctest::Approx(diff[700]).epsilon(1e-9));
    CHECK(diff[200] != 0.0);
    CHECK(diff[700] != diff[200]);
}

TEST_CASE("jump direction follows the Bernoulli probability") {
    SimSpec s;
    s.length = 2000;
    s.garch_alpha = s.garch_beta = s.leverage_gamma = 0.0;
    for (std::int64_t t = 100; t < 2000; t += 100) s.break_times.push_back(t);
    for (double p : {0.0, 1.0}) {
        s.jump_prob_direction = p;
        auto base = s;
        base.jump_scale = 0.0;
        const auto x0 = simulate(base).returns.values();
        const auto x1 = simulate(s).returns.values();
        double prev = 0.0;
        for (auto t : s.break_times) {
            const double level = x1[t] - x0[t];
            CHECK((p == 1.0 ? level > prev : level < prev));
            prev = level;
        }
    }
}

TEST_CASE("large jumps are recovered by the detector") {
    const auto detector = changepoint::DetectorConfig::sequential(500.0);
    int recovered = 0;
    for (int run = 0; run < 100; ++run) {
        SimSpec s;
        s.break_times = {300, 600};
        s.jump_scale = 10.0 * std::sqrt(s.unconditional_variance());
        s.seed = 1000 + run;
        const auto found = changepoint::detect_breaks(simulate(s).returns, detector, testing::store()).indices();
        auto near = [&](std::int64_t t) {
            return std::any_of(found.begin(), found.end(), [&](std::int64_t b) { return std::abs(b - t) <= 10; });
        };
        recovered += near(300) && near(600);
    }
    CHECK(recovered >= 90);
}

TEST_CASE("cluster: shifted shared breaks reproduce the worked example") {
    ClusterSpec c;
    c.base.length = 1200;
    for (int k = 1; k <= 9; ++k) c.shared_breaks.push_back(100 * k);
    c.members = {{"a", 0, {}}, {"b", 100, {}}};
    const auto out = simulate_cluster(c);
    REQUIRE(out.size() == 2);
    CHECK(out[1].true_breaks.indices().front() == 200);
    CHECK(out[1].true_breaks.indices().back() == 1000);
    const double d = setdist::distance(setdist::DistanceMeasure::mj(0.5), out[0].true_breaks, out[1].true_breaks);
    CHECK(std::abs(d - 100.0 / 81.0) < 1e-9);
}

TEST_CASE("cluster: members share breaks but not innovations") {
    ClusterSpec c;
    c.shared_breaks = {250, 500};
    c.members = {{"a", 0, {}}, {"b", 0, {}}, {"c", 0, {800}}};
    const auto out = simulate_cluster(c);
    CHECK(out[0].true_breaks.indices() == out[1].true_breaks.indices());
    CHECK(out[2].true_breaks.indices() == std::vector<std::int64_t>{250, 500, 800});
    CHECK(out[0].returns.values() != out[1].returns.values());
    CHECK(out[1].returns.asset_id() == "b");
    CHECK(out[1].true_breaks.asset_id() == "b");

    auto single = c.base;
    single.asset_id = "b";
    single.break_times = {250, 500};
    single.seed = derive_seed(c.base.seed, 1);
    CHECK(simulate(single).returns.values() == out[1].returns.values());

    const auto panel = to_panel(out);
    CHECK(panel.asset_ids() == std::vector<std::string>{"a", "b", "c"});
    CHECK(panel.length() == c.base.length);
}

TEST_CASE("cluster: eight-asset regime") {
    ClusterSpec c;
    c.members = {{"a1", 0, {100, 200, 300, 400, 500, 600, 700, 800}}, {"a2", 0, {100, 200, 300, 400, 500, 600, 700, 800}},
                 {"a3", 0, {100, 200, 300, 400, 500, 600, 700, 800}}, {"a4", 0, {250, 500, 750}},
                 {"a5", 0, {250, 500, 750}}, {"a6", 0, {250, 500, 750}}, {"a7", 0, {50}}, {"a8", 0, {950}}};
    const auto out = simulate_cluster(c);
    const auto expected = testing::table5_breaks();
    REQUIRE(out.size() == expected.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].true_breaks == expected[i]);
}

TEST_CASE("spec json") {
    SimSpec s;
    s.asset_id = "x";
    s.break_times = {10, 20};
    s.seed = 99;
    s.ar_coeff = 0.25;
    const auto back = sim_spec_from_json(sim_spec_to_json(s));
    CHECK(back.asset_id == "x");
    CHECK(back.break_times == s.break_times);
    CHECK(back.seed == 99);
    CHECK(back.ar_coeff == 0.25);
    CHECK(back.effective_jump_scale() == s.effective_jump_scale());
    CHECK(simulate(back).returns.values() == simulate(s).returns.values());

    CHECK(sim_spec_from_json(R"({"length": 50})").length == 50);
    CHECK_THROWS_WITH_AS(sim_spec_from_json(R"({"lenght": 50})"), doctest::Contains("lenght"), DataError);
    CHECK_THROWS_AS(sim_spec_from_json("{"), DataError);
    CHECK_THROWS_AS(sim_spec_from_json(R"({"length": "long"})"), DataError);

    const std::string cluster = R"({"base": {"length": 400}, "shared_breaks": [100], "members": [{"asset_id": "p", "shift": 5}]})";
    CHECK(is_cluster_json(cluster));
    CHECK_FALSE(is_cluster_json(R"({"length": 5})"));
    const auto c = cluster_spec_from_json(cluster);
    CHECK(c.base.length == 400);
    CHECK(simulate_cluster(c)[0].true_breaks.indices() == std::vector<std::int64_t>{105});
    CHECK_THROWS_AS(cluster_spec_from_json(R"({"members": [{"asset_id": "p", "tilt": 1}]})"), DataError);
}

TEST_CASE("csv exports") {
    SimSpec s;
    s.length = 5;
    s.break_times = {2};
    const auto out = simulate(s);
    const auto text = returns_csv({out});
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,return,sigma2,is_break");
    int rows = 0, flagged = 0;
    while (std::getline(in, line)) {
        ++rows;
        flagged += line.back() == '1';
        if (rows == 3) CHECK(line.rfind("2,", 0) == 0);
    }
    CHECK(rows == 5);
    CHECK(flagged == 1);

    auto t = s;
    t.asset_id = "other";
    const auto two = std::vector<SimOutput>{out, simulate(t)};
    CHECK(returns_csv(two).rfind("asset_id,t,return,sigma2,is_break\n", 0) == 0);

    const auto prices = prices_csv(two);
    CHECK(prices.rfind("date,sim,other\n1999-12-31,100,100\n2000-01-01,", 0) == 0);
    // prices rebuild the returns
    std::istringstream p(prices);
    std::getline(p, line);
    std::getline(p, line);
    double prev = 100.0;
    for (std::size_t i = 0; i < s.length; ++i) {
        std::getline(p, line);
        const double price = std::stod(csv::split_line(line)[1]);
        CHECK(std::log(price / prev) == doctest::Approx(out.returns.values()[i]).epsilon(1e-9));
        prev = price;
    }
}
