#include "cpo/synthetic.hpp"

#include "cpo/csv.hpp"
#include "cpo/errors.hpp"
#include "cpo/random.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace cpo::synthetic {

namespace {

constexpr std::uint64_t kInnovationStream = 1;
constexpr std::uint64_t kJumpStream = 2;

using nlohmann::json;

void require(bool ok, const char* field, const char* rule) {
    if (!ok) throw std::invalid_argument(fmt::format("invalid sim spec: {} {}", field, rule));
}

}  // namespace

double SimSpec::effective_jump_scale() const {
    return jump_scale ? *jump_scale : 5.0 * std::sqrt(garch_omega);
}

double SimSpec::unconditional_variance() const {
    return garch_omega / (1.0 - garch_alpha - garch_beta - leverage_gamma / 2.0);
}

void SimSpec::validate() const {
    require(length >= 2, "length", "must be >= 2");
    require(std::abs(ar_coeff) < 1.0, "ar_coeff", "must satisfy |phi| < 1");
    require(jump_prob_direction >= 0.0 && jump_prob_direction <= 1.0, "jump_prob_direction", "must lie in [0, 1]");
    require(jump_shape > 0.0 && std::isfinite(jump_shape), "jump_shape", "must be > 0");
    require(effective_jump_scale() >= 0.0 && std::isfinite(effective_jump_scale()), "jump_scale", "must be >= 0");
    require(garch_omega > 0.0 && std::isfinite(garch_omega), "garch_omega", "must be > 0");
    require(garch_alpha >= 0.0, "garch_alpha", "must be >= 0");
    require(garch_beta >= 0.0, "garch_beta", "must be >= 0");
    require(leverage_gamma >= 0.0, "leverage_gamma", "must be >= 0");
    require(garch_alpha + garch_beta + leverage_gamma / 2.0 < 1.0, "garch_alpha + garch_beta + leverage_gamma/2",
            "must be < 1");
    require(student_dof > 2.0 && std::isfinite(student_dof), "student_dof", "must be > 2");
    for (std::size_t i = 0; i < break_times.size(); ++i) {
        require(break_times[i] >= 1 && break_times[i] <= static_cast<std::int64_t>(length) - 1, "break_times",
                "must lie in [1, length - 1]");
        require(i == 0 || break_times[i] > break_times[i - 1], "break_times", "must be strictly increasing");
    }
}

SimOutput simulate(const SimSpec& spec) {
    spec.validate();
    const std::size_t n = spec.length;
    auto innovations = make_rng(spec.seed, kInnovationStream);
    auto jumps = make_rng(spec.seed, kJumpStream);
    std::student_t_distribution<double> student(spec.student_dof);
    const double t_scale = std::sqrt((spec.student_dof - 2.0) / spec.student_dof);
    std::bernoulli_distribution direction(spec.jump_prob_direction);
    const double jump_scale = spec.effective_jump_scale();

    std::vector<double> x(n);
    std::vector<double> sigma2(n);
    std::vector<Date> dates(n);
    double level = 0.0;
    double prev_x = 0.0;
    double prev_e = 0.0;
    double s2 = spec.unconditional_variance();
    std::size_t next_break = 0;
    for (std::size_t t = 0; t < n; ++t) {
        if (t > 0) {
            s2 = spec.garch_omega + spec.garch_alpha * prev_e * prev_e + spec.garch_beta * s2 +
                 (prev_e < 0.0 ? spec.leverage_gamma * prev_e * prev_e : 0.0);
        }
        if (next_break < spec.break_times.size() && spec.break_times[next_break] == static_cast<std::int64_t>(t)) {
            ++next_break;
            const double sign = direction(jumps) ? 1.0 : -1.0;
            if (jump_scale > 0.0) {
                std::gamma_distribution<double> magnitude(spec.jump_shape, jump_scale);
                level += sign * magnitude(jumps);
            }
        }
        const double e = std::sqrt(s2) * student(innovations) * t_scale;
        x[t] = spec.ar_coeff * prev_x + level + e;
        sigma2[t] = s2;
        dates[t] = spec.start_date + std::chrono::days(static_cast<int>(t));
        prev_x = x[t];
        prev_e = e;
    }
    return SimOutput{ReturnSeries(spec.asset_id, std::move(dates), std::move(x)), BreakSet(spec.asset_id, spec.break_times),
                     std::move(sigma2)};
}

std::vector<SimOutput> simulate_cluster(const ClusterSpec& spec) {
    if (spec.members.empty()) throw std::invalid_argument("cluster spec needs at least one member");
    std::vector<SimOutput> out;
    out.reserve(spec.members.size());
    for (std::size_t i = 0; i < spec.members.size(); ++i) {
        const auto& member = spec.members[i];
        std::set<std::int64_t> breaks(member.idiosyncratic.begin(), member.idiosyncratic.end());
        for (auto b : spec.shared_breaks) breaks.insert(b + member.shift);
        SimSpec asset = spec.base;
        asset.asset_id = member.asset_id;
        asset.break_times.assign(breaks.begin(), breaks.end());
        asset.seed = derive_seed(spec.base.seed, i);
        out.push_back(simulate(asset));
    }
    return out;
}

ReturnPanel to_panel(const std::vector<SimOutput>& outputs) {
    std::vector<ReturnSeries> series;
    for (const auto& o : outputs) series.push_back(o.returns);
    return ReturnPanel(std::move(series));
}

namespace {

SimSpec spec_from(const json& j) {
    if (!j.is_object()) throw DataError("sim spec must be a JSON object");
    SimSpec s;
    for (const auto& [key, value] : j.items()) {
        if (key == "asset_id") s.asset_id = value.get<std::string>();
        else if (key == "length") s.length = value.get<std::size_t>();
        else if (key == "break_times") s.break_times = value.get<std::vector<std::int64_t>>();
        else if (key == "ar_coeff") s.ar_coeff = value.get<double>();
        else if (key == "jump_prob_direction") s.jump_prob_direction = value.get<double>();
        else if (key == "jump_shape") s.jump_shape = value.get<double>();
        else if (key == "jump_scale") s.jump_scale = value.is_null() ? std::nullopt : std::optional(value.get<double>());
        else if (key == "garch_omega") s.garch_omega = value.get<double>();
        else if (key == "garch_alpha") s.garch_alpha = value.get<double>();
        else if (key == "garch_beta") s.garch_beta = value.get<double>();
        else if (key == "leverage_gamma") s.leverage_gamma = value.get<double>();
        else if (key == "student_dof") s.student_dof = value.get<double>();
        else if (key == "seed") s.seed = value.get<std::uint64_t>();
        else if (key == "start_date") s.start_date = parse_date(value.get<std::string>());
        else throw DataError(fmt::format("unknown sim spec key '{}'", key));
    }
    return s;
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(fmt::format("bad JSON: {}", e.what()));
    }
}

template <typename F>
auto guarded(F f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw DataError(fmt::format("bad sim spec: {}", e.what()));
    }
}

}  // namespace

SimSpec sim_spec_from_json(const std::string& text) {
    const auto j = parse(text);
    return guarded([&] { return spec_from(j); });
}

std::string sim_spec_to_json(const SimSpec& s) {
    nlohmann::ordered_json j;
    j["asset_id"] = s.asset_id;
    j["length"] = s.length;
    j["break_times"] = s.break_times;
    j["ar_coeff"] = s.ar_coeff;
    j["jump_prob_direction"] = s.jump_prob_direction;
    j["jump_shape"] = s.jump_shape;
    j["jump_scale"] = s.effective_jump_scale();
    j["garch_omega"] = s.garch_omega;
    j["garch_alpha"] = s.garch_alpha;
    j["garch_beta"] = s.garch_beta;
    j["leverage_gamma"] = s.leverage_gamma;
    j["student_dof"] = s.student_dof;
    j["seed"] = s.seed;
    j["start_date"] = format_date(s.start_date);
    return j.dump(2) + "\n";
}

bool is_cluster_json(const std::string& text) {
    const auto j = parse(text);
    return j.is_object() && j.contains("members");
}

ClusterSpec cluster_spec_from_json(const std::string& text) {
    const auto j = parse(text);
    return guarded([&] {
        if (!j.is_object()) throw DataError("cluster spec must be a JSON object");
        ClusterSpec c;
        for (const auto& [key, value] : j.items()) {
            if (key == "base") c.base = spec_from(value);
            else if (key == "shared_breaks") c.shared_breaks = value.get<std::vector<std::int64_t>>();
            else if (key == "members") {
                for (const auto& m : value) {
                    ClusterMember member;
                    for (const auto& [mk, mv] : m.items()) {
                        if (mk == "asset_id") member.asset_id = mv.get<std::string>();
                        else if (mk == "shift") member.shift = mv.get<std::int64_t>();
                        else if (mk == "idiosyncratic") member.idiosyncratic = mv.get<std::vector<std::int64_t>>();
                        else throw DataError(fmt::format("unknown cluster member key '{}'", mk));
                    }
                    if (member.asset_id.empty()) throw DataError("cluster member needs an asset_id");
                    c.members.push_back(std::move(member));
                }
            } else {
                throw DataError(fmt::format("unknown cluster spec key '{}'", key));
            }
        }
        return c;
    });
}

std::string returns_csv(const std::vector<SimOutput>& outputs) {
    const bool multi = outputs.size() > 1;
    std::string out = multi ? "asset_id,t,return,sigma2,is_break\n" : "t,return,sigma2,is_break\n";
    for (const auto& o : outputs) {
        const auto& idx = o.true_breaks.indices();
        const auto& x = o.returns.values();
        for (std::size_t t = 0; t < x.size(); ++t) {
            const bool is_break = std::binary_search(idx.begin(), idx.end(), static_cast<std::int64_t>(t));
            if (multi) out += csv::escape(o.returns.asset_id()) + ",";
            out += fmt::format("{},{},{},{}\n", t, csv::format_double(x[t]), csv::format_double(o.conditional_variance[t]),
                               is_break ? 1 : 0);
        }
    }
    return out;
}

std::string prices_csv(const std::vector<SimOutput>& outputs) {
    if (outputs.empty()) throw std::invalid_argument("no simulated series");
    const auto& dates = outputs.front().returns.timestamps();
    for (const auto& o : outputs) {
        if (o.returns.timestamps() != dates) throw std::invalid_argument("simulated series have different calendars");
    }
    std::string out = "date";
    for (const auto& o : outputs) out += "," + csv::escape(o.returns.asset_id());
    out += "\n";
    std::vector<double> price(outputs.size(), 100.0);
    out += format_date(dates.front() - std::chrono::days(1));
    for (double p : price) out += "," + csv::format_double(p);
    out += "\n";
    for (std::size_t t = 0; t < dates.size(); ++t) {
        out += format_date(dates[t]);
        for (std::size_t i = 0; i < outputs.size(); ++i) {
            price[i] *= std::exp(outputs[i].returns.values()[t]);
            out += "," + csv::format_double(price[i]);
        }
        out += "\n";
    }
    return out;
}

}  // namespace cpo::synthetic
