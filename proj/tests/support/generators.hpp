#ifndef MECSIM_TESTS_GENERATORS_HPP_
#define MECSIM_TESTS_GENERATORS_HPP_

// Hand-rolled random generators for property tests.

#include <vector>

#include "mecsim/env.hpp"
#include "mecsim/geo_channel.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/task_cost.hpp"

namespace mecsim::testing {

inline geo::Position3D gen_position(Rng& rng, double span = 1000.0, double z_max = 200.0) {
  return {uniform(rng, -span, span), uniform(rng, -span, span), uniform(rng, 0.0, z_max)};
}

inline geo::ChannelParams gen_channel(Rng& rng) {
  geo::ChannelParams p;
  p.carrier_hz = uniform(rng, 0.5e9, 6e9);
  p.light_speed = 3e8;
  p.eta_los_db = uniform(rng, 0.0, 5.0);
  p.eta_nlos_db = p.eta_los_db + uniform(rng, 0.0, 30.0);
  p.alpha = uniform(rng, 0.5, 15.0);
  p.beta = uniform(rng, 0.01, 0.6);
  return p;
}

inline cost::Task gen_task(Rng& rng) {
  cost::Task t;
  t.data = uniform(rng, 0.05, 2.0);
  t.ck = uniform(rng, 0.05, 2.0);
  t.th_max = uniform(rng, 0.1, 2.0);
  t.cdata = uniform(rng, 0.01, 1.0) * t.data;
  t.cat = static_cast<cost::Category>(uniform_index(rng, cost::kNumCategories));
  return t;
}

inline cost::UserNode gen_node(Rng& rng) {
  cost::UserNode n;
  n.f_n = uniform(rng, 0.1, 2.0);
  n.ue = uniform(rng, 0.0, 1.0);
  n.p_tx = uniform(rng, 0.001, 1.0);
  n.ue_tr = uniform(rng, 0.1, 2.0);
  return n;
}

inline cost::MecNode gen_mec(Rng& rng) {
  cost::MecNode m;
  m.f_max = uniform(rng, 0.2, 8.0);
  m.cr_max = m.f_max;
  m.p_m = uniform(rng, 0.0, 1.0);
  m.ue_m = uniform(rng, 0.1, 2.0);
  m.ue_tr_m = uniform(rng, 0.1, 2.0);
  return m;
}

inline cost::LinkParams gen_link(Rng& rng) {
  cost::LinkParams l;
  l.delay_tr = uniform(rng, 1e-6, 1e-2);
  l.delay_process = uniform(rng, 0.1, 2.0);
  return l;
}

inline cost::OffloadLink gen_offload_link(Rng& rng) {
  cost::OffloadLink ol;
  ol.distance = uniform(rng, 1.0, 1500.0);
  ol.rate = uniform(rng, 1e-3, 1e3);
  ol.lambda_o = bernoulli(rng, 0.1) ? 0.0 : uniform(rng, 1e-5, 1e-2);
  ol.g_h = uniform(rng, 0.0, 1.0);
  if (bernoulli(rng, 0.5)) {
    ol.ho.serving_is_best = false;
    ol.ho.old_pos = gen_position(rng);
    ol.ho.new_pos = bernoulli(rng, 0.1) ? ol.ho.old_pos : gen_position(rng);
  }
  return ol;
}

/// Small random environment around the desk defaults.
inline env::EnvConfig gen_env_config(Rng& rng) {
  env::EnvConfig c;
  c.network.num_mecs = 1 + static_cast<int>(uniform_index(rng, 4));
  c.network.num_aerial = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(c.network.num_mecs) + 1));
  c.network.num_nodes = 1 + static_cast<int>(uniform_index(rng, 8));
  c.network.arena_size = uniform(rng, 200.0, 1500.0);
  c.task.data_scale = 0.0125;
  c.task.ck_scale = 0.0002;
  c.mec.compute_scale = uniform(rng, 0.25, 2.0);
  c.actions.subbands = 1 + static_cast<int>(uniform_index(rng, 3));
  c.reward.c_const = uniform(rng, 0.1, 2.0);
  c.reward.penalty = -c.reward.c_const;
  c.resource_coupling = true;
  c.steps = 5 + static_cast<int>(uniform_index(rng, 20));
  return c;
}

/// Uniformly random on-grid joint action.
inline std::vector<env::ActionVector> gen_joint(Rng& rng, const env::Environment& e) {
  std::vector<env::ActionVector> joint(e.num_agents());
  for (auto& a : joint) a = e.config().actions.decode(uniform_index(rng, e.action_count()));
  return joint;
}

}  // namespace mecsim::testing

#endif  // MECSIM_TESTS_GENERATORS_HPP_
