#include "mecsim/baselines.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <string>

#include "mecsim/error.hpp"

namespace mecsim::baselines {

const char* to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::kFlc: return "flc";
    case PolicyKind::kFoc: return "foc";
    case PolicyKind::kRodrs: return "rodrs";
    case PolicyKind::kRosrs: return "rosrs";
    case PolicyKind::kQl: return "ql";
    case PolicyKind::kDql: return "dql";
    case PolicyKind::kDdql: return "ddql";
  }
  return "?";
}

std::optional<PolicyKind> parse_policy(std::string_view name) {
  for (PolicyKind p : kAllPolicies) {
    if (name == to_string(p)) return p;
  }
  return std::nullopt;
}

bool is_learning(PolicyKind p) {
  return p == PolicyKind::kQl || p == PolicyKind::kDql || p == PolicyKind::kDdql;
}

env::ActionVector offload_template(const env::DiscretizationSpec& grid,
                                   std::size_t agent, double traffic_ref) {
  env::ActionVector a;
  a.subband = static_cast<int>(agent % static_cast<std::size_t>(grid.subbands));
  std::size_t best = 0;
  for (std::size_t k = 1; k < grid.traffic_levels.size(); ++k) {
    if (std::abs(grid.traffic_levels[k] - traffic_ref) <
        std::abs(grid.traffic_levels[best] - traffic_ref)) {
      best = k;
    }
  }
  a.traffic = static_cast<int>(best);
  a.gamma = 1;
  a.rho = static_cast<int>(grid.rho_levels.size()) - 1;
  a.power = static_cast<int>(grid.power_levels_w.size()) - 1;
  a.tx_energy = 0;
  return a;
}

env::ActionVector flc_policy(const env::DiscretizationSpec&) {
  env::ActionVector a;  // every index 0: local, lowest power
  return a;
}

env::ActionVector foc_policy(std::span<const double> gains,
                             const env::DiscretizationSpec& grid, std::size_t agent,
                             double traffic_ref, bool* fallback) {
  if (fallback) *fallback = false;
  if (gains.empty()) {
    if (fallback) *fallback = true;
    return flc_policy(grid);
  }
  env::ActionVector a = offload_template(grid, agent, traffic_ref);
  a.target_mec = static_cast<int>(geo::associate(gains));
  a.rho_value = 1.0;
  return a;
}

env::ActionVector random_offload_policy(std::size_t num_mecs,
                                        const env::DiscretizationSpec& grid,
                                        std::size_t agent, double traffic_ref,
                                        const BaselineParams& p, bool dedicated,
                                        Rng& rng) {
  const bool offload = bernoulli(rng, p.offload_prob);
  const std::size_t mec = uniform_index(rng, num_mecs);
  if (!offload) return flc_policy(grid);
  env::ActionVector a = offload_template(grid, agent, traffic_ref);
  a.target_mec = static_cast<int>(mec);
  a.rho_value = dedicated ? p.dedicated_rho : 1.0;
  return a;
}

void apply_fair_share(std::span<env::ActionVector> joint,
                      std::span<const std::size_t> assoc,
                      std::span<const bool> active) {
  const auto target = [&](std::size_t i) {
    return joint[i].target_mec >= 0 ? static_cast<std::size_t>(joint[i].target_mec)
                                    : assoc[i];
  };
  std::map<std::size_t, int> count;
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (active[i] && joint[i].gamma == 1) ++count[target(i)];
  }
  for (std::size_t i = 0; i < joint.size(); ++i) {
    if (active[i] && joint[i].gamma == 1) joint[i].rho_value = 1.0 / count[target(i)];
  }
}

std::vector<env::ActionVector> joint_action(PolicyKind kind, const env::Environment& e,
                                            std::span<Rng> rngs,
                                            const BaselineParams& p) {
  const auto& grid = e.config().actions;
  const double tr = e.config().radio.traffic_ref;
  const std::size_t n = e.num_agents();
  if (rngs.size() < n) throw Error(ErrorCode::kConfig, "one rng stream per agent required");
  std::vector<env::ActionVector> joint(n);
  std::vector<std::size_t> assoc(n);
  std::unique_ptr<bool[]> active(new bool[n]);
  for (std::size_t i = 0; i < n; ++i) {
    assoc[i] = e.associated_mec(i);
    active[i] = e.active(i);
  }
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind) {
      case PolicyKind::kFlc: joint[i] = flc_policy(grid); break;
      case PolicyKind::kFoc: joint[i] = foc_policy(e.gains(i), grid, i, tr); break;
      case PolicyKind::kRodrs:
      case PolicyKind::kRosrs:
        joint[i] = random_offload_policy(e.num_mecs(), grid, i, tr, p,
                                         kind == PolicyKind::kRodrs, rngs[i]);
        break;
      default:
        throw Error(ErrorCode::kConfig,
                    std::string("not a static policy: ") + to_string(kind));
    }
  }
  if (kind == PolicyKind::kFoc || kind == PolicyKind::kRosrs) {
    apply_fair_share(joint, assoc, std::span<const bool>(active.get(), n));
  }
  return joint;
}

}  // namespace mecsim::baselines
