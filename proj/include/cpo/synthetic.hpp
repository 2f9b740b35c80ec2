#pragma once

#include "cpo/break_set.hpp"
#include "cpo/ingest.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cpo::synthetic {

// GJR-GARCH(1,1) with AR(1) mean, standardized Student-t innovations and
// mean jumps at the break times:
//   x_t  = phi x_{t-1} + m_t + e_t,  e_t = sigma_t eps_t
//   m_t  = m_{t-1} + J_t 1[t in tau],  J = (2B - 1) G,  B ~ Bern(p), G ~ Gamma(k, s)
//   s2_t = omega + alpha e2_{t-1} + beta s2_{t-1} + gamma e2_{t-1} 1[e_{t-1} < 0]
struct SimSpec {
    std::string asset_id = "sim";
    std::size_t length = 1000;
    std::vector<std::int64_t> break_times;
    double ar_coeff = 0.0;
    double jump_prob_direction = 0.5;
    double jump_shape = 2.0;
    std::optional<double> jump_scale;  // default 5 sqrt(omega); 0 disables jump magnitude
    double garch_omega = 2e-6;
    double garch_alpha = 0.05;
    double garch_beta = 0.90;
    double leverage_gamma = 0.05;
    double student_dof = 5.0;
    std::uint64_t seed = 1;
    Date start_date = Date(std::chrono::year{2000} / 1 / 1);

    double effective_jump_scale() const;
    // Unconditional variance omega / (1 - alpha - beta - gamma/2).
    double unconditional_variance() const;
    // Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct SimOutput {
    ReturnSeries returns;
    BreakSet true_breaks;
    std::vector<double> conditional_variance;
};

SimOutput simulate(const SimSpec& spec);

struct ClusterMember {
    std::string asset_id;
    std::int64_t shift = 0;                      // added to every shared break
    std::vector<std::int64_t> idiosyncratic;     // extra breaks for this asset only
};

// base.break_times and base.asset_id are replaced per member; member i uses
// seed derive_seed(base.seed, i).
struct ClusterSpec {
    SimSpec base;
    std::vector<std::int64_t> shared_breaks;
    std::vector<ClusterMember> members;
};

std::vector<SimOutput> simulate_cluster(const ClusterSpec& spec);
ReturnPanel to_panel(const std::vector<SimOutput>& outputs);

// JSON: either a SimSpec object or {"base": SimSpec, "shared_breaks": [...],
// "members": [{"asset_id", "shift", "idiosyncratic"}]}. Unknown keys are errors.
SimSpec sim_spec_from_json(const std::string& text);
std::string sim_spec_to_json(const SimSpec& spec);
ClusterSpec cluster_spec_from_json(const std::string& text);
bool is_cluster_json(const std::string& text);

// "t,return,sigma2,is_break"; with more than one output an asset_id column leads.
std::string returns_csv(const std::vector<SimOutput>& outputs);
// Wide price table starting at 100 the day before the first return.
std::string prices_csv(const std::vector<SimOutput>& outputs);

}  // namespace cpo::synthetic
