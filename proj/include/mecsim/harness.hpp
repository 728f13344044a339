#ifndef MECSIM_HARNESS_HPP_
#define MECSIM_HARNESS_HPP_

// Experiment configuration, training and evaluation loops, CSV emission,
// parameter sweeps and the brute-force verifier for tiny instances.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mecsim/agents.hpp"
#include "mecsim/baselines.hpp"
#include "mecsim/env.hpp"

namespace mecsim::harness {

using baselines::PolicyKind;

struct LearnerConfig {
  agents::HyperParams deep;   // shared by DQL and DDQL
  bool dql_double_q = false;
  bool share_memory = true;   // DDQL replay distribution between episodes
  double ql_psi = 0.1;
  double ql_zeta = 0.9;
  int ql_bins = 3;
};

struct RewardCalibration {
  bool enabled = true;     // derive c_const from the local-only cost profile
  double quantile = 0.95;
  int episodes = 2;
};

struct ExperimentConfig {
  env::EnvConfig env;
  LearnerConfig learn;
  baselines::BaselineParams baselines;
  RewardCalibration calibration;
  std::uint64_t seed = 1;
  int eval_episodes = 5;

  /// Cross-field validation; messages name the offending key.
  void validate() const;
};

/// Parses `key = value` lines (dotted keys, `#` comments, `[a, b]` lists).
/// Unknown keys and out-of-range values raise kConfig naming the key.
ExperimentConfig parse_config(const std::string& text,
                              const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every recognised key, sorted.
std::vector<std::string> config_keys();

/// Reward constant from the FLC per-agent step-cost quantile; the penalty
/// is its negative.
env::RewardParams calibrate_reward(const ExperimentConfig& cfg);

// Maps an encoded state onto a tabular key: gain, data size, complexity and
// urgency category, each cut into equal-width bins over [-1, 1].
struct StateBucketizer {
  int bins = 3;
  std::uint64_t bucket(std::span<const double> encoded) const;
};

// Per-agent learners of one policy after training.
struct Learners {
  PolicyKind kind = PolicyKind::kFlc;
  std::vector<agents::DqlAgent> dql;
  std::vector<agents::DdqlAgent> ddql;
  std::vector<agents::QTable> ql;
  StateBucketizer bucketizer;

  std::size_t size() const;
};

/// Greedy joint action of trained learners; agent i uses learner i mod size.
std::vector<env::ActionVector> greedy_joint(const Learners& l, const env::Environment& e);

struct EpisodeMetrics {
  int episode = 0;
  double loss_mean = 0.0;         // mean over agents and updates
  double loss_uncertainty = 0.0;
  std::vector<double> agent_loss;
  double cum_reward = 0.0;        // mean over agents of sum_t zeta^t r_t
  double total_reward = 0.0;      // undiscounted, summed over agents
  double sum_cost = 0.0;          // sum over steps and agents
  int violations = 0;
  int handovers = 0;
  int hash_rejections = 0;
  double epsilon = 0.0;
};

struct EvalResult {
  double mean_sum_cost = 0.0;   // per episode
  double mean_step_cost = 0.0;  // per step, summed over agents
  double violation_rate = 0.0;  // per agent-step
  int episodes = 0;
};

struct RunResult {
  PolicyKind policy = PolicyKind::kFlc;
  std::uint64_t seed = 0;
  std::vector<EpisodeMetrics> episodes;
  EvalResult eval;
  Learners learners;
  env::RewardParams reward;
  double wall_seconds = 0.0;
};

// CSV schema version; bump when columns change.
inline constexpr const char* kMetricsSchema = "mecsim-metrics/1";
std::string metrics_header();
std::string metrics_row(const EpisodeMetrics& m);

struct RunOptions {
  int episodes = -1;             // < 0: the configured eta
  std::filesystem::path out_dir; // empty: no files
  bool save_checkpoint = true;
};

/// Trains (learning policies) or simply rolls out (static policies) for the
/// configured number of episodes, appending one metrics row per episode, then
/// evaluates greedily on the shared evaluation seeds.
RunResult run_experiment(const ExperimentConfig& cfg, PolicyKind policy,
                         const RunOptions& opt = {});

/// Greedy evaluation on `cfg.eval_episodes` seeds derived from cfg.seed.
/// `learners` may be null for static policies.
EvalResult evaluate_policy(const ExperimentConfig& cfg, PolicyKind policy,
                           const Learners* learners);

std::string summary_header();
std::string summary_row(const RunResult& r);

struct CompareRow {
  PolicyKind policy = PolicyKind::kFlc;
  double mean_cost = 0.0;
  double reduction = 0.0;  // (cost_p - cost_ddql) / cost_p
};

/// Reductions of DDQL relative to every policy in `costs`.
std::vector<CompareRow> compare_costs(const std::map<PolicyKind, double>& costs);
std::string compare_csv(const std::vector<CompareRow>& rows);

// Trained learners keyed by (policy, seed index), reused across sweep points.
using TrainedSet = std::map<std::pair<PolicyKind, int>, Learners>;

/// Trains every learning policy in `policies` for each seed (master + index).
TrainedSet train_all(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                     int seeds);

struct SweepRow {
  PolicyKind policy = PolicyKind::kFlc;
  double point = 0.0;
  double mean_cost = 0.0;
  int seeds = 0;
};

struct SweepTable {
  std::string axis;
  std::vector<SweepRow> rows;
  std::map<PolicyKind, bool> monotone;
  std::optional<double> crossover;  // first point where FOC costs more than FLC

  std::string to_csv() const;
};

/// Mean evaluated sum cost for every (policy, data size); data sizes are in
/// raw task units and pin every task's size. Learners come from `trained`
/// when present, otherwise they are trained on the base configuration.
SweepTable sweep_data_size(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                           const std::vector<double>& grid, int seeds,
                           const TrainedSet* trained = nullptr);

/// Same over MEC counts, keeping the aerial share of the base profile.
SweepTable sweep_mec_count(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                           const std::vector<int>& grid, int seeds,
                           const TrainedSet* trained = nullptr);

/// Non-decreasing with slack: every step may drop by at most tol * range.
bool non_decreasing(const std::vector<double>& v, double tol_fraction);

struct SmallInstanceLimits {
  std::size_t max_agents = 3;
  std::size_t max_mecs = 2;
  std::size_t max_joint_points = 200;
};

struct SmallInstanceReport {
  std::size_t agents = 0;
  std::size_t mecs = 0;
  std::size_t joint_points = 0;
  double optimum = 0.0;           // exhaustive one-step minimum of the sum cost
  double greedy_per_task = 0.0;   // each task minimizes its own cost, others local
  double random_expected_gap = 0.0;
  std::map<PolicyKind, double> gaps;  // policy cost minus optimum
};

/// Enumerates every one-step joint action on the environment's current
/// state. Throws kInstanceTooLarge with the sizes when beyond the limits.
SmallInstanceReport verify_small_instance(const env::Environment& e,
                                          const std::map<PolicyKind, const Learners*>& learned,
                                          const baselines::BaselineParams& bp,
                                          std::uint64_t seed,
                                          const SmallInstanceLimits& lim = {});

}  // namespace mecsim::harness

#endif  // MECSIM_HARNESS_HPP_
