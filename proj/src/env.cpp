#include "mecsim/env.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mecsim/error.hpp"

namespace mecsim::env {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kConfig, what);
}

void require_increasing(const std::vector<double>& v, const std::string& name) {
  require(!v.empty(), name + " must not be empty");
  for (std::size_t i = 1; i < v.size(); ++i) {
    require(v[i] > v[i - 1], name + " must be strictly increasing");
  }
}

double to_unit(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

bool in_range(int v, std::size_t n) {
  return v >= 0 && static_cast<std::size_t>(v) < n;
}

}  // namespace

void DiscretizationSpec::validate(double p_max) const {
  require(subbands >= 1, "actions.subbands must be >= 1");
  require_increasing(traffic_levels, "actions.traffic_levels");
  require_increasing(rho_levels, "actions.rho_levels");
  require_increasing(power_levels_w, "actions.power_levels");
  require_increasing(tx_energy_levels, "actions.tx_energy_levels");
  require(traffic_levels.front() > 0.0, "actions.traffic_levels must be > 0");
  require(rho_levels.front() > 0.0 && rho_levels.back() <= 1.0,
          "actions.rho_levels must lie in (0, 1]");
  require(power_levels_w.front() >= 0.0 && power_levels_w.back() <= p_max,
          "actions.power_levels must lie in [0, p_max]");
  require(tx_energy_levels.front() > 0.0, "actions.tx_energy_levels must be > 0");
}

std::size_t DiscretizationSpec::action_count() const {
  return static_cast<std::size_t>(subbands) * traffic_levels.size() * 2 *
         rho_levels.size() * power_levels_w.size() * tx_energy_levels.size();
}

ActionVector DiscretizationSpec::decode(std::size_t index) const {
  if (index >= action_count()) {
    throw Error(ErrorCode::kAction, "action index out of range");
  }
  ActionVector a;
  std::size_t rest = index;
  a.tx_energy = static_cast<int>(rest % tx_energy_levels.size());
  rest /= tx_energy_levels.size();
  a.power = static_cast<int>(rest % power_levels_w.size());
  rest /= power_levels_w.size();
  a.rho = static_cast<int>(rest % rho_levels.size());
  rest /= rho_levels.size();
  a.gamma = static_cast<int>(rest % 2);
  rest /= 2;
  a.traffic = static_cast<int>(rest % traffic_levels.size());
  rest /= traffic_levels.size();
  a.subband = static_cast<int>(rest);
  return a;
}

std::size_t DiscretizationSpec::encode(const ActionVector& a) const {
  if (!on_grid(a)) throw Error(ErrorCode::kAction, "action is off the grid");
  std::size_t idx = static_cast<std::size_t>(a.subband);
  idx = idx * traffic_levels.size() + static_cast<std::size_t>(a.traffic);
  idx = idx * 2 + static_cast<std::size_t>(a.gamma);
  idx = idx * rho_levels.size() + static_cast<std::size_t>(a.rho);
  idx = idx * power_levels_w.size() + static_cast<std::size_t>(a.power);
  idx = idx * tx_energy_levels.size() + static_cast<std::size_t>(a.tx_energy);
  return idx;
}

bool DiscretizationSpec::on_grid(const ActionVector& a) const {
  return in_range(a.subband, static_cast<std::size_t>(subbands)) &&
         in_range(a.traffic, traffic_levels.size()) &&
         (a.gamma == 0 || a.gamma == 1) && in_range(a.rho, rho_levels.size()) &&
         in_range(a.power, power_levels_w.size()) &&
         in_range(a.tx_energy, tx_energy_levels.size());
}

cost::Category classify_task(double th_max, const UrgencyMatrix& urg) {
  for (std::size_t i = 0; i < urg.band_edges.size(); ++i) {
    if (th_max <= urg.band_edges[i]) {
      return static_cast<cost::Category>(std::min<std::size_t>(i, cost::kNumCategories - 1));
    }
  }
  return static_cast<cost::Category>(
      std::min<std::size_t>(urg.band_edges.size(), cost::kNumCategories - 1));
}

void RewardParams::validate() const {
  require(c_const > 0.0, "reward.c_const must be > 0");
  require(penalty < 0.0, "reward.penalty must be < 0");
  require(zeta > 0.0 && zeta < 1.0, "reward.zeta must lie in (0, 1)");
}

double cumulative_reward(std::span<const double> rewards, double zeta) {
  double sum = 0.0;
  double w = 1.0;
  for (double r : rewards) {
    sum += w * r;
    w *= zeta;
  }
  return sum;
}

void EnvConfig::validate() const {
  require(network.num_nodes >= 1, "network.num_nodes must be >= 1");
  require(network.num_mecs >= 1, "network.num_mecs must be >= 1");
  require(network.num_aerial >= 0 && network.num_aerial <= network.num_mecs,
          "network.num_aerial must lie in [0, num_mecs]");
  require(network.arena_size > 0.0, "network.arena_size must be > 0");
  require(network.uav_altitude_min > network.node_height &&
              network.uav_altitude_max >= network.uav_altitude_min,
          "network.uav_altitude range invalid");
  require(network.bs_height > network.node_height,
          "network.bs_height must exceed node_height");
  require(network.node_height >= 0.0, "network.node_height must be >= 0");
  require(network.node_speed_max >= 0.0 && network.uav_speed_max >= 0.0,
          "network speeds must be >= 0");
  require(mec.cr_aerial_min > 0.0 && mec.cr_aerial_max >= mec.cr_aerial_min,
          "mec.cr_aerial range invalid");
  require(mec.cr_fixed > 0.0, "mec.cr_fixed must be > 0");
  require(mec.compute_scale > 0.0, "mec.compute_scale must be > 0");
  require(mec.power >= 0.0, "mec.power must be >= 0");
  require(node.cpu_min > 0.0 && node.cpu_max >= node.cpu_min, "node.cpu range invalid");
  require(node.energy_initial > 0.0, "node.energy_initial must be > 0");
  require(node.energy_drain >= 0.0, "node.energy_drain must be >= 0");
  require(task.data_min > 0.0 && task.data_max >= task.data_min, "task.data range invalid");
  require(task.ck_min > 0.0 && task.ck_max >= task.ck_min, "task.ck range invalid");
  require(task.data_scale > 0.0 && task.ck_scale > 0.0, "task scales must be > 0");
  require(task.cdata_ratio >= 0.0 && task.cdata_ratio <= 1.0,
          "task.cdata_ratio must lie in [0, 1]");
  require(task.th_min > 0.0 && task.th_max >= task.th_min, "task.th range invalid");
  require(task.fixed_data >= 0.0, "task.fixed_data must be >= 0");
  radio.channel.validate();
  require(radio.obstruction.radius >= 0.0, "channel.obstruction_radius must be >= 0");
  require(radio.obstruction.density >= 0.0, "channel.obstruction_density must be >= 0");
  require(radio.obstruction.panels >= 1, "channel.quadrature_panels must be >= 1");
  require(radio.rician_k >= 0.0, "channel.rician_k must be >= 0");
  require(radio.bandwidth > 0.0, "channel.bandwidth must be > 0");
  require(radio.noise > 0.0, "channel.noise must be > 0");
  require(radio.traffic_ref > 0.0, "channel.traffic_ref must be > 0");
  require(link.delay_tr >= 0.0 && link.delay_process >= 0.0, "link delays must be >= 0");
  require(link.rate_floor > 0.0, "link.rate_floor must be > 0");
  require(link.lambda_floor > 0.0, "link.lambda_floor must be > 0");
  require(cost.kappa >= 0.0 && cost.kappa <= 1.0, "cost.kappa must lie in [0, 1]");
  require(constraints.ue_threshold > 0.0, "constraints.energy_threshold must be > 0");
  require(constraints.p_max_m > 0.0 && constraints.p_max_n > 0.0,
          "constraints power caps must be > 0");
  require(!constraints.t_max_task.empty(), "constraints.t_max_task must not be empty");
  for (double t : constraints.t_max_task) require(t > 0.0, "constraints.t_max_task must be > 0");
  actions.validate(constraints.p_max_n);
  require_increasing(urgency.band_edges, "task.band_edges");
  require(urgency.priors.size() == urgency.band_edges.size() + 1,
          "task.category_priors needs one entry per band");
  require(urgency.band_edges.size() + 1 <= static_cast<std::size_t>(cost::kNumCategories),
          "at most three urgency categories");
  for (double p : urgency.priors) require(p >= 0.0, "task.category_priors must be >= 0");
  reward.validate();
  require(steps >= 1, "env.steps must be >= 1");
  require(norm.cost_max > 0.0, "norm.cost_max must be > 0");
}

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

cost::Task Environment::make_task(Rng& rng, const geo::Position3D& origin) const {
  const auto& tc = cfg_.task;
  cost::Task task;
  const double raw_data =
      tc.fixed_data > 0.0 ? tc.fixed_data : uniform(rng, tc.data_min, tc.data_max);
  const double raw_ck = uniform(rng, tc.ck_min, tc.ck_max);

  // Category first (priors), then a latency threshold inside its band.
  const auto& urg = cfg_.urgency;
  double total = 0.0;
  for (double p : urg.priors) total += p;
  double u = uniform01(rng) * total;
  std::size_t band = 0;
  for (; band + 1 < urg.priors.size(); ++band) {
    if (u < urg.priors[band]) break;
    u -= urg.priors[band];
  }
  const double lo = band == 0 ? tc.th_min : urg.band_edges[band - 1];
  const double hi = band < urg.band_edges.size() ? urg.band_edges[band] : tc.th_max;
  double th = uniform(rng, std::max(lo, tc.th_min), std::min(hi, tc.th_max));
  // Keep threshold strictly above the lower edge so the band is unambiguous.
  if (band > 0 && th <= lo) th = std::nextafter(lo, INFINITY);

  task.data = raw_data * tc.data_scale;
  task.ck = raw_ck * tc.ck_scale;
  task.th_max = th;
  task.cat = classify_task(th, urg);
  task.origin = origin;
  task.cdata = tc.cdata_ratio * task.data;
  return task;
}

std::vector<StateVector> Environment::reset(std::uint64_t seed) {
  const auto& nc = cfg_.network;
  Rng place = make_rng(seed, "placement");
  task_rng_ = make_rng(seed, "tasks");
  fading_rng_ = make_rng(seed, "fading");
  Rng motion = make_rng(seed, "mobility");

  // MEC positions: a Poisson point process conditioned on its count is a set
  // of i.i.d. uniform points over the arena.
  mecs_.assign(static_cast<std::size_t>(nc.num_mecs), {});
  uav_index_.clear();
  ground_integral_.assign(mecs_.size(), 0.0);
  for (std::size_t j = 0; j < mecs_.size(); ++j) {
    auto& m = mecs_[j];
    m.id = static_cast<int>(j);
    m.kind = static_cast<int>(j) < nc.num_aerial ? cost::MecKind::kAerial
                                                 : cost::MecKind::kGroundFixed;
    m.pos.x = uniform(place, 0.0, nc.arena_size);
    m.pos.y = uniform(place, 0.0, nc.arena_size);
    if (m.kind == cost::MecKind::kAerial) {
      m.pos.z = uniform(place, nc.uav_altitude_min, nc.uav_altitude_max);
      m.f_max = uniform(place, cfg_.mec.cr_aerial_min, cfg_.mec.cr_aerial_max) *
                cfg_.mec.compute_scale;
      uav_index_.push_back(j);
    } else {
      m.pos.z = nc.bs_height;
      m.f_max = cfg_.mec.cr_fixed * cfg_.mec.compute_scale;
      ground_integral_[j] =
          geo::obstruction_integral_unit(nc.node_height, m.pos.z, cfg_.radio.obstruction);
    }
    m.cr_max = m.f_max;
    m.p_m = cfg_.mec.power;
    m.ue_m = cfg_.mec.exec_coeff;
    m.ue_tr_m = cfg_.mec.return_coeff;
  }

  nodes_.assign(static_cast<std::size_t>(nc.num_nodes), {});
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& n = nodes_[i];
    n.id = static_cast<int>(i);
    n.pos = {uniform(place, 0.0, nc.arena_size), uniform(place, 0.0, nc.arena_size),
             nc.node_height};
    n.f_n = uniform(place, cfg_.node.cpu_min, cfg_.node.cpu_max);
    n.ue = cfg_.node.energy_initial;
    n.p_tx = cfg_.actions.power_levels_w.front();
    n.ue_tr = cfg_.actions.tx_energy_levels.front();
  }

  const geo::Arena arena{nc.arena_size, nc.arena_size};
  std::vector<double> node_speeds(nodes_.size(), nc.node_speed_max);
  std::vector<double> uav_speeds(uav_index_.size(), nc.uav_speed_max);
  node_mobility_ = geo::MobilityModel::random(arena, node_speeds, motion);
  uav_mobility_ = geo::MobilityModel::random(arena, uav_speeds, motion);

  tasks_.clear();
  for (const auto& n : nodes_) tasks_.push_back(make_task(task_rng_, n.pos));

  fading_.assign(nodes_.size() * mecs_.size(), {});
  for (auto& f : fading_) f = geo::sample_fading(fading_rng_, cfg_.radio.rician_k);

  serving_.assign(nodes_.size(), -1);
  active_.assign(nodes_.size(), true);
  running_cost_.assign(nodes_.size(), 0.0);
  t_ = 0;
  refresh_channels();
  return observe_all();
}

void Environment::refresh_channels() {
  const std::size_t nm = mecs_.size();
  gain_.assign(nodes_.size() * nm, 0.0);
  dist_.assign(nodes_.size() * nm, 0.0);
  assoc_.assign(nodes_.size(), 0);
  const auto& ch = cfg_.radio.channel;
  const auto& ob = cfg_.radio.obstruction;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t j = 0; j < nm; ++j) {
      const auto& m = mecs_[j];
      const double d = geo::distance(m.pos, nodes_[i].pos);
      double p_los;
      if (m.kind == cost::MecKind::kAerial) {
        p_los = geo::p_los_aerial(m.pos, nodes_[i].pos, ch);
      } else if (ob.density <= 0.0 || ob.radius <= 0.0) {
        p_los = 1.0;
      } else {
        // Same expression as geo::p_los_ground; the unit integral only
        // depends on the two heights, which are fixed per MEC.
        const double upper = geo::obstruction_upper_limit(d, ob);
        p_los = std::clamp(
            std::exp(-2.0 * ob.radius * ob.density * upper * ground_integral_[j]),
            0.0, 1.0);
      }
      const double pl = geo::path_loss_db(d, ch, geo::mean_excess_loss(p_los, ch));
      dist_[i * nm + j] = d;
      gain_[i * nm + j] =
          geo::channel_gain(d, geo::db_to_linear(pl), fading_[i * nm + j]);
    }
    assoc_[i] = geo::associate(gains(i));
  }
}

std::span<const double> Environment::gains(std::size_t agent) const {
  return {gain_.data() + agent * mecs_.size(), mecs_.size()};
}

double Environment::link_rate(std::size_t agent, std::size_t mec, double p_tx,
                              double traffic) const {
  const double bw = cfg_.radio.bandwidth / cfg_.actions.subbands;
  const double r = geo::data_rate(gain_[agent * mecs_.size() + mec], p_tx,
                                  cfg_.radio.noise, bw);
  return r * traffic / cfg_.radio.traffic_ref;
}

double Environment::g_h(std::size_t mec) const {
  return cfg_.radio.obstruction.g(mecs_[mec].pos.z);
}

void Environment::set_training_progress(double psi, double epsilon) {
  psi_ = psi;
  epsilon_ = epsilon;
}

bool Environment::done() const {
  if (t_ >= cfg_.steps) return true;
  return std::none_of(active_.begin(), active_.end(), [](bool a) { return a; });
}

StateVector Environment::observe(std::size_t i) const {
  StateVector s;
  const std::size_t j = assoc_[i];
  const auto& task = tasks_[i];
  s.gain = gain_[i * mecs_.size() + j];
  s.data = task.data;
  s.fading_g = fading_[i * mecs_.size() + j].g;
  s.pos_m = mecs_[j].pos;
  s.pos_n = nodes_[i].pos;
  s.ue_n = nodes_[i].ue;
  if (cfg_.global_cost_state) {
    double sum = 0.0;
    for (double c : running_cost_) sum += c;
    s.v_total = sum;
  } else {
    s.v_total = running_cost_[i];
  }
  s.rate = link_rate(i, j, cfg_.actions.power_levels_w.back(), cfg_.radio.traffic_ref);
  s.cat = task.cat;
  s.th_max = task.th_max;
  s.ck = task.ck;
  s.psi = psi_;
  s.epsilon = epsilon_;
  return s;
}

std::vector<StateVector> Environment::observe_all() const {
  std::vector<StateVector> out;
  out.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) out.push_back(observe(i));
  return out;
}

void Environment::encode_into(const StateVector& s, std::span<double> out) const {
  if (out.size() != kStateDim) throw Error(ErrorCode::kShape, "state buffer size");
  const auto& nc = cfg_.network;
  const auto& tc = cfg_.task;
  const auto& nm = cfg_.norm;
  const double gain_db = s.gain > 0.0 ? 20.0 * std::log10(s.gain) : nm.gain_db_min;
  const double rate_log = s.rate > 0.0 ? std::log10(s.rate) : nm.rate_log_min;
  const double zmax = std::max(nc.uav_altitude_max, nc.bs_height);
  const double cost_max = cfg_.global_cost_state
                              ? nm.cost_max * static_cast<double>(nodes_.size())
                              : nm.cost_max;
  out[0] = to_unit(gain_db, nm.gain_db_min, nm.gain_db_max);
  out[1] = to_unit(s.data, tc.data_min * tc.data_scale, tc.data_max * tc.data_scale);
  out[2] = to_unit(s.fading_g, 0.0, 3.0);
  out[3] = to_unit(s.pos_m.x, 0.0, nc.arena_size);
  out[4] = to_unit(s.pos_m.y, 0.0, nc.arena_size);
  out[5] = to_unit(s.pos_m.z, 0.0, zmax);
  out[6] = to_unit(s.pos_n.x, 0.0, nc.arena_size);
  out[7] = to_unit(s.pos_n.y, 0.0, nc.arena_size);
  out[8] = to_unit(s.pos_n.z, 0.0, zmax);
  out[9] = to_unit(s.ue_n, 0.0, cfg_.node.energy_initial);
  out[10] = to_unit(s.v_total, 0.0, cost_max);
  out[11] = to_unit(rate_log, nm.rate_log_min, nm.rate_log_max);
  out[12] = to_unit(static_cast<double>(s.cat), 0.0, cost::kNumCategories - 1.0);
  out[13] = to_unit(s.th_max, tc.th_min, tc.th_max);
  out[14] = to_unit(s.ck, tc.ck_min * tc.ck_scale, tc.ck_max * tc.ck_scale);
  out[15] = to_unit(s.psi, 0.0, 1.0);
  out[16] = to_unit(s.epsilon, 0.0, 1.0);
}

std::vector<double> Environment::encode(const StateVector& s) const {
  std::vector<double> out(kStateDim);
  encode_into(s, out);
  return out;
}

StepOutcome Environment::evaluate(std::span<const ActionVector> joint) const {
  if (joint.size() != nodes_.size()) {
    throw Error(ErrorCode::kAction, "joint action needs one action per agent");
  }
  const auto& grid = cfg_.actions;
  const std::size_t nm = mecs_.size();
  StepOutcome out;
  out.agents.resize(nodes_.size());
  out.granted_per_mec.assign(nm, 0.0);

  // Requests per MEC and sub-band occupancy.
  std::vector<double> requested(nm, 0.0);
  std::vector<int> occupancy(nm * static_cast<std::size_t>(grid.subbands), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = joint[i];
    if (!grid.on_grid(a)) throw Error(ErrorCode::kAction, "action is off the grid");
    if (a.target_mec >= static_cast<int>(nm)) {
      throw Error(ErrorCode::kAction, "target MEC out of range");
    }
    auto& ao = out.agents[i];
    ao.active = active_[i];
    if (!ao.active || a.gamma == 0) continue;
    ao.target_mec = a.target_mec >= 0 ? a.target_mec : static_cast<int>(assoc_[i]);
    ao.requested_rho = a.rho_value ? *a.rho_value
                                   : grid.rho_levels[static_cast<std::size_t>(a.rho)];
    if (!(ao.requested_rho > 0.0)) {
      throw Error(ErrorCode::kNoResources, "offloading with a zero resource request");
    }
    const auto j = static_cast<std::size_t>(ao.target_mec);
    requested[j] += ao.requested_rho;
    ++occupancy[j * static_cast<std::size_t>(grid.subbands) +
                static_cast<std::size_t>(a.subband)];
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = joint[i];
    auto& ao = out.agents[i];
    if (!ao.active) continue;
    const auto& task = tasks_[i];
    cost::UserNode node = nodes_[i];
    node.p_tx = grid.power_levels_w[static_cast<std::size_t>(a.power)];
    node.ue_tr = grid.tx_energy_levels[static_cast<std::size_t>(a.tx_energy)];

    cost::ConstraintInput ci;
    ci.gamma = a.gamma;
    ci.p_tx = node.p_tx;
    ci.cat = task.cat;
    ci.th_max = task.th_max;

    if (a.gamma == 0) {
      ao.cost = cost::local_cost(task, node, cfg_.link, cfg_.cost);
    } else {
      const auto j = static_cast<std::size_t>(ao.target_mec);
      const auto& mec = mecs_[j];
      double granted = ao.requested_rho;
      int sharing = 1;
      if (cfg_.resource_coupling) {
        if (requested[j] > 1.0) granted = ao.requested_rho / requested[j];
        sharing = occupancy[j * static_cast<std::size_t>(grid.subbands) +
                            static_cast<std::size_t>(a.subband)];
      }
      ao.granted_rho = granted;
      out.granted_per_mec[j] += granted;

      const double traffic = grid.traffic_levels[static_cast<std::size_t>(a.traffic)];
      cost::LinkParams link = cfg_.link;
      link.uplink_scale *= traffic / cfg_.radio.traffic_ref;

      cost::OffloadLink ol;
      ol.distance = dist_[i * nm + j];
      ol.rate = link_rate(i, j, node.p_tx, traffic) / sharing;
      ol.lambda_o = cfg_.radio.obstruction.density;
      ol.g_h = g_h(j);
      const int old = serving_[i];
      if (old >= 0 && old != ao.target_mec) {
        ol.ho.serving_is_best = false;
        ol.ho.old_pos = mecs_[static_cast<std::size_t>(old)].pos;
        ol.ho.new_pos = mec.pos;
        ao.handover = true;
      }
      ao.cost = cost::offload_cost(task, node, mec, link, granted, ol, cfg_.cost);
      ci.rho = granted;
      ci.p_m = mec.p_m;
    }
    ci.energy = ao.cost.energy();
    ci.time = ao.cost.time();
    ao.constraints = cost::check_constraints(ci, cfg_.constraints);
    ao.reward = ao.constraints.satisfied() ? cfg_.reward.c_const - ao.cost.v
                                           : cfg_.reward.penalty;
    out.sum_cost += ao.cost.v;
    out.violations += ao.constraints.satisfied() ? 0 : 1;
    out.handovers += ao.handover ? 1 : 0;
    out.rate_floors += ao.cost.rate_floored ? 1 : 0;
  }
  return out;
}

StepResult Environment::step(std::span<const ActionVector> joint) {
  if (done()) throw Error(ErrorCode::kAction, "step after the episode ended");
  StepResult res;
  res.outcome = evaluate(joint);

  std::vector<StateVector> before;
  before.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (active_[i]) {
      before.push_back(observe(i));
      res.agent_index.push_back(static_cast<int>(i));
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& ao = res.outcome.agents[i];
    if (!ao.active) continue;
    auto& n = nodes_[i];
    n.ue = std::max(0.0, n.ue - cfg_.node.energy_drain * ao.cost.node_energy());
    if (ao.cost.offloaded) serving_[i] = ao.target_mec;
    running_cost_[i] += (ao.cost.v - running_cost_[i]) / (t_ + 1);
  }
  ++t_;

  std::vector<geo::Position3D> node_pos(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) node_pos[i] = nodes_[i].pos;
  node_mobility_.step(node_pos);
  for (std::size_t i = 0; i < nodes_.size(); ++i) nodes_[i].pos = node_pos[i];
  std::vector<geo::Position3D> uav_pos(uav_index_.size());
  for (std::size_t k = 0; k < uav_index_.size(); ++k) uav_pos[k] = mecs_[uav_index_[k]].pos;
  uav_mobility_.step(uav_pos);
  for (std::size_t k = 0; k < uav_index_.size(); ++k) mecs_[uav_index_[k]].pos = uav_pos[k];

  for (auto& f : fading_) f = geo::sample_fading(fading_rng_, cfg_.radio.rician_k);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!active_[i]) continue;
    tasks_[i] = make_task(task_rng_, nodes_[i].pos);
    if (nodes_[i].ue <= 0.0) active_[i] = false;
  }
  refresh_channels();

  const bool horizon = t_ >= cfg_.steps;
  for (std::size_t k = 0; k < before.size(); ++k) {
    const auto i = static_cast<std::size_t>(res.agent_index[k]);
    Transition tr;
    tr.s = before[k];
    tr.a = joint[i];
    tr.r = res.outcome.agents[i].reward;
    tr.s_next = observe(i);
    tr.done = horizon || !active_[i];
    res.transitions.push_back(std::move(tr));
  }

  res.stats.step = t_;
  res.stats.sum_cost = res.outcome.sum_cost;
  res.stats.violations = res.outcome.violations;
  res.stats.handovers = res.outcome.handovers;
  res.stats.rate_floors = res.outcome.rate_floors;
  res.stats.done = done();
  return res;
}

}  // namespace mecsim::env
