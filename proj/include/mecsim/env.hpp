#ifndef MECSIM_ENV_HPP_
#define MECSIM_ENV_HPP_

// Decentralized MDP wrapper around the channel and cost models. Every user
// node is an agent; the environment is a serial state machine driven by
// step() with one action per agent.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mecsim/geo_channel.hpp"
#include "mecsim/rng.hpp"
#include "mecsim/task_cost.hpp"

namespace mecsim::env {

struct ActionVector {
  int subband = 0;
  int traffic = 0;    // index into traffic_levels
  int gamma = 0;      // 0 local, 1 MEC
  int rho = 0;        // index into rho_levels
  int power = 0;      // index into power_levels_w
  int tx_energy = 0;  // index into tx_energy_levels
  // Baseline policies may pick a MEC other than the associated one and
  // request a resource fraction that is not on the grid (fair sharing).
  int target_mec = -1;
  std::optional<double> rho_value;

  bool operator==(const ActionVector&) const = default;
};

struct DiscretizationSpec {
  int subbands = 2;
  std::vector<double> traffic_levels = {0.1, 0.2, 0.3};
  std::vector<double> rho_levels = {0.25, 0.5, 1.0};
  std::vector<double> power_levels_w = {0.01, 0.2};
  std::vector<double> tx_energy_levels = {0.5, 1.0};

  /// Grids strictly increasing, rho grid inside (0, 1], power grid inside
  /// [0, p_max]. Throws kConfig.
  void validate(double p_max) const;

  std::size_t action_count() const;
  ActionVector decode(std::size_t index) const;
  /// Inverse of decode; ignores target_mec and rho_value.
  std::size_t encode(const ActionVector& a) const;
  bool on_grid(const ActionVector& a) const;
};

struct UrgencyMatrix {
  // Ascending upper band edges on th_max; category i covers
  // (edge[i-1], edge[i]]; anything above the last edge is the lowest priority.
  std::vector<double> band_edges = {0.5, 1.0};
  std::vector<double> priors = {0.3, 0.4, 0.3};
};

/// High priority iff th_max is at or below the first band edge; a value that
/// sits exactly on an edge goes to the higher-priority band.
cost::Category classify_task(double th_max, const UrgencyMatrix& urg);
inline cost::Category classify_task(const cost::Task& task,
                                    const UrgencyMatrix& urg) {
  return classify_task(task.th_max, urg);
}

struct RewardParams {
  double c_const = 1.0;
  double penalty = -1.0;
  double zeta = 0.9;

  void validate() const;
};

/// Sum_t zeta^t * r_t.
double cumulative_reward(std::span<const double> rewards, double zeta);

struct NetworkConfig {
  int num_mecs = 4;
  int num_aerial = 2;
  int num_nodes = 10;
  double arena_size = 1000.0;
  double uav_altitude_min = 80.0;
  double uav_altitude_max = 150.0;
  double bs_height = 25.0;
  double node_height = 1.5;
  double node_speed_max = 1.5;
  double uav_speed_max = 5.0;
};

struct MecConfig {
  double cr_aerial_min = 0.5;
  double cr_aerial_max = 1.5;
  double cr_fixed = 6.0;
  double compute_scale = 1.0;
  double power = 0.03;       // operating power p_m
  double exec_coeff = 1.0;   // ue_m
  double return_coeff = 1.0; // ue_tr_m
};

struct NodeConfig {
  double cpu_min = 0.5;
  double cpu_max = 1.0;
  double energy_initial = 1.0;
  double energy_drain = 0.01;  // battery drawn per unit of node-side energy
};

struct TaskConfig {
  double data_min = 10.0;
  double data_max = 80.0;
  double data_scale = 1.0 / 80.0;
  double ck_min = 1000.0;
  double ck_max = 5000.0;
  double ck_scale = 1.0 / 5000.0;
  double cdata_ratio = 0.1;
  double th_min = 0.2;
  double th_max = 1.6;
  double fixed_data = 0.0;  // > 0 pins every task's data size (sweeps)
};

struct RadioConfig {
  geo::ChannelParams channel;
  geo::ObstructionModel obstruction;
  double rician_k = 3.0;
  double bandwidth = 200.0;
  double noise = 1e-13;
  double traffic_ref = 0.2;  // release rate at which the rate is unscaled
};

struct NormalizationConfig {
  double gain_db_min = -135.0;
  double gain_db_max = -90.0;
  double rate_log_min = 1.0;
  double rate_log_max = 3.2;
  double cost_max = 1.0;
};

struct EnvConfig {
  NetworkConfig network;
  MecConfig mec;
  NodeConfig node;
  TaskConfig task;
  RadioConfig radio;
  cost::LinkParams link = {.delay_tr = 1e-5};
  cost::CostParams cost;
  cost::ConstraintSet constraints = {.ue_threshold = 0.2,
                                     .t_max_task = {0.5, 1.0, 1.6},
                                     .p_max_m = 5.0,
                                     .p_max_n = 100.0};
  DiscretizationSpec actions;
  UrgencyMatrix urgency;
  RewardParams reward;
  NormalizationConfig norm;
  int steps = 200;
  bool global_cost_state = false;
  bool resource_coupling = true;

  void validate() const;
};

// The per-agent observation before normalization.
struct StateVector {
  double gain = 0.0;
  double data = 0.0;
  double fading_g = 0.0;
  geo::Position3D pos_m;
  geo::Position3D pos_n;
  double ue_n = 0.0;
  double v_total = 0.0;
  double rate = 0.0;
  cost::Category cat = cost::Category::kLow;
  double th_max = 0.0;
  double ck = 0.0;
  double psi = 0.0;
  double epsilon = 0.0;

  bool operator==(const StateVector&) const = default;
};

// Feature order: gain, data, g, pos_m (x,y,z), pos_n (x,y,z), ue_n, v_total,
// rate, cat, th_max, ck, psi, epsilon.
inline constexpr std::size_t kStateDim = 17;

struct Transition {
  StateVector s;
  ActionVector a;
  double r = 0.0;
  StateVector s_next;
  bool done = false;
};

struct AgentOutcome {
  bool active = false;
  cost::CostBreakdown cost;
  cost::ConstraintReport constraints;
  double reward = 0.0;
  int target_mec = -1;
  double requested_rho = 0.0;
  double granted_rho = 0.0;
  bool handover = false;
};

struct StepOutcome {
  std::vector<AgentOutcome> agents;
  std::vector<double> granted_per_mec;
  double sum_cost = 0.0;
  int violations = 0;
  int handovers = 0;
  int rate_floors = 0;
};

struct EpisodeStats {
  int step = 0;
  double sum_cost = 0.0;
  int violations = 0;
  int handovers = 0;
  int rate_floors = 0;
  bool done = false;
};

struct StepResult {
  std::vector<Transition> transitions;  // one per agent active before the step
  std::vector<int> agent_index;         // agent of each transition
  StepOutcome outcome;
  EpisodeStats stats;
};

class Environment {
 public:
  explicit Environment(EnvConfig cfg);

  /// Samples MEC and node placement, mobility, fading and fresh tasks.
  /// Deterministic in `seed`.
  std::vector<StateVector> reset(std::uint64_t seed);

  /// Costs, grants and rewards of a joint action against the current state,
  /// without advancing anything.
  StepOutcome evaluate(std::span<const ActionVector> joint) const;

  StepResult step(std::span<const ActionVector> joint);

  /// Normalized feature vector, every entry in [-1, 1].
  std::vector<double> encode(const StateVector& s) const;
  void encode_into(const StateVector& s, std::span<double> out) const;

  void set_training_progress(double psi, double epsilon);

  const EnvConfig& config() const { return cfg_; }
  std::size_t num_agents() const { return nodes_.size(); }
  std::size_t num_mecs() const { return mecs_.size(); }
  std::size_t action_count() const { return cfg_.actions.action_count(); }
  int current_step() const { return t_; }
  bool done() const;

  StateVector observe(std::size_t agent) const;
  std::vector<StateVector> observe_all() const;
  bool active(std::size_t agent) const { return active_[agent]; }
  std::size_t associated_mec(std::size_t agent) const { return assoc_[agent]; }
  /// Channel gain from every MEC to `agent`.
  std::span<const double> gains(std::size_t agent) const;
  const std::vector<cost::UserNode>& nodes() const { return nodes_; }
  const std::vector<cost::MecNode>& mecs() const { return mecs_; }
  const std::vector<cost::Task>& tasks() const { return tasks_; }
  int serving_mec(std::size_t agent) const { return serving_[agent]; }

 private:
  cost::Task make_task(Rng& rng, const geo::Position3D& origin) const;
  void refresh_channels();
  double link_rate(std::size_t agent, std::size_t mec, double p_tx,
                   double traffic) const;
  double g_h(std::size_t mec) const;

  EnvConfig cfg_;
  std::vector<cost::MecNode> mecs_;
  std::vector<cost::UserNode> nodes_;
  std::vector<cost::Task> tasks_;
  std::vector<geo::FadingState> fading_;  // node-major, nodes x mecs
  std::vector<double> gain_;              // node-major, nodes x mecs
  std::vector<double> dist_;              // node-major, nodes x mecs
  std::vector<std::size_t> assoc_;
  std::vector<int> serving_;
  std::vector<bool> active_;
  std::vector<double> running_cost_;
  std::vector<double> ground_integral_;   // per MEC, unit-interval G integral
  geo::MobilityModel node_mobility_;
  geo::MobilityModel uav_mobility_;
  std::vector<std::size_t> uav_index_;
  Rng task_rng_;
  Rng fading_rng_;
  double psi_ = 0.0;
  double epsilon_ = 0.0;
  int t_ = 0;
};

}  // namespace mecsim::env

#endif  // MECSIM_ENV_HPP_
