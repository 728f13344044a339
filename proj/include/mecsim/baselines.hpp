#ifndef MECSIM_BASELINES_HPP_
#define MECSIM_BASELINES_HPP_

// Non-learning comparison policies: full local, full offload with fair
// sharing, and random offloading with dedicated or shared MEC resources.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mecsim/env.hpp"
#include "mecsim/rng.hpp"

namespace mecsim::baselines {

enum class PolicyKind { kFlc, kFoc, kRodrs, kRosrs, kQl, kDql, kDdql };

inline constexpr PolicyKind kAllPolicies[] = {
    PolicyKind::kFlc, PolicyKind::kFoc, PolicyKind::kRodrs, PolicyKind::kRosrs,
    PolicyKind::kQl,  PolicyKind::kDql, PolicyKind::kDdql};

const char* to_string(PolicyKind p);
std::optional<PolicyKind> parse_policy(std::string_view name);
bool is_learning(PolicyKind p);

struct BaselineParams {
  double offload_prob = 0.5;
  double dedicated_rho = 0.25;
};

/// Radio settings shared by every offloading baseline: sub-band by agent
/// index, the traffic level closest to the reference rate, maximum transmit
/// power and the lowest transmission-energy level.
env::ActionVector offload_template(const env::DiscretizationSpec& grid,
                                   std::size_t agent, double traffic_ref);

/// gamma = 0 at the lowest transmit power.
env::ActionVector flc_policy(const env::DiscretizationSpec& grid);

/// Offload to the highest-gain MEC. With no MEC in reach it falls back to
/// local execution and sets *fallback.
env::ActionVector foc_policy(std::span<const double> gains,
                             const env::DiscretizationSpec& grid, std::size_t agent,
                             double traffic_ref, bool* fallback = nullptr);

/// Bernoulli(offload_prob) offload to a uniformly drawn MEC. The dedicated
/// variant requests a fixed share; the shared variant leaves the share to
/// apply_fair_share. Both consume the rng identically.
env::ActionVector random_offload_policy(std::size_t num_mecs,
                                        const env::DiscretizationSpec& grid,
                                        std::size_t agent, double traffic_ref,
                                        const BaselineParams& p, bool dedicated,
                                        Rng& rng);

/// Sets rho = 1/k on every offloading action, k being the number of
/// offloaders that target the same MEC (assoc gives the default target).
void apply_fair_share(std::span<env::ActionVector> joint,
                      std::span<const std::size_t> assoc,
                      std::span<const bool> active);

/// Joint action of a static policy for the environment's current state;
/// rngs holds one stream per agent.
std::vector<env::ActionVector> joint_action(PolicyKind kind, const env::Environment& e,
                                            std::span<Rng> rngs,
                                            const BaselineParams& p);

}  // namespace mecsim::baselines

#endif  // MECSIM_BASELINES_HPP_
