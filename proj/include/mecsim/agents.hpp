#ifndef MECSIM_AGENTS_HPP_
#define MECSIM_AGENTS_HPP_

// Value-based learners: tabular Q-learning, deep Q-learning and the
// decentralized double deep Q-learner with a mean and an uncertainty value
// network. Agents never share weights; only replay memory travels between
// them, as hashed shards.

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mecsim/nn.hpp"
#include "mecsim/rng.hpp"

namespace mecsim::agents {

struct HyperParams {
  double psi = 1e-4;          // learning rate
  double zeta = 0.9;          // discount
  double eps_start = 1.0;
  double eps_end = 0.001;
  double eps_floor_fraction = 0.8;  // share of training after which eps stays at eps_end
  int eta = 500;              // training episodes
  int batch_size = 64;
  int target_sync_period = 100;  // optimizer updates between target syncs
  int memory_capacity = 20000;
  int train_every = 20;       // environment steps between updates
  std::vector<int> hidden = {64, 32};
  double uncertainty_scale = 1.0;
  bool use_prev_net_sum = true;
  bool double_q = false;      // DQL only: evaluate the max with the online argmax
  bool tvf_verbatim = false;  // DDQL target r + psi * Q_online(s', a*)

  void validate() const;
};

/// Exponential decay from eps_start to eps_end, reached at
/// eps_floor_fraction * eta episodes and held afterwards.
double epsilon_at(const HyperParams& h, int episode);

/// Index of the largest entry; the lowest index wins ties. Throws kAction on
/// an empty span.
std::size_t argmax(std::span<const double> q);

/// Uniform random action with probability epsilon, else argmax.
std::size_t epsilon_greedy(std::span<const double> q, double epsilon, Rng& rng);

// One stored step. The id is globally unique (agent in the high bits) so
// merged shards can be deduplicated.
struct Experience {
  std::uint64_t id = 0;
  std::vector<double> s;
  int a = 0;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;

  bool operator==(const Experience&) const = default;
};

inline std::uint64_t experience_id(std::uint32_t agent, std::uint64_t seq) {
  return (static_cast<std::uint64_t>(agent) << 40) | (seq & ((1ULL << 40) - 1));
}

class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity);

  /// Appends, evicting the oldest entry when full. Entries whose id is
  /// already present are ignored; returns whether the entry was stored.
  /// Locally pushed entries also go to the pending shard.
  bool push(Experience e);
  /// Deduplicating, capacity-bounded merge of a peer shard. Returns the
  /// number of entries stored.
  std::size_t merge(std::span<const Experience> shard);

  /// Distinct entries drawn uniformly without replacement.
  std::vector<const Experience*> sample(std::size_t n, Rng& rng) const;

  /// Locally pushed entries since the previous call.
  std::vector<Experience> take_shard();

  std::size_t size() const { return ring_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool contains(std::uint64_t id) const { return ids_.count(id) != 0; }
  const Experience& at(std::size_t i) const;  // 0 is the oldest

 private:
  bool store(Experience e);

  std::size_t capacity_;
  std::vector<Experience> ring_;
  std::size_t head_ = 0;  // index of the oldest entry once full
  std::unordered_set<std::uint64_t> ids_;
  std::vector<Experience> pending_;
};

// ---- tabular ---------------------------------------------------------------

class QTable {
 public:
  explicit QTable(std::size_t num_actions) : num_actions_(num_actions) {}

  double get(std::uint64_t state, std::size_t action) const;
  void set(std::uint64_t state, std::size_t action, double value);
  /// Row of Q values, zeros for an unseen state.
  std::vector<double> row(std::uint64_t state) const;
  double max(std::uint64_t state) const;
  std::uint64_t visits(std::uint64_t state, std::size_t action) const;
  std::size_t num_actions() const { return num_actions_; }
  std::size_t num_states() const { return table_.size(); }
  /// Visited state keys in ascending order.
  std::vector<std::uint64_t> states() const;

 private:
  struct Row {
    std::vector<double> q;
    std::vector<std::uint64_t> n;
  };
  Row& row_ref(std::uint64_t state);

  std::size_t num_actions_;
  std::unordered_map<std::uint64_t, Row> table_;
};

struct TabularStep {
  std::uint64_t s = 0;
  std::size_t a = 0;
  double r = 0.0;
  std::uint64_t s_next = 0;
  bool done = false;
};

/// Q <- Q + psi * (r + zeta * max Q(s') - Q); terminal steps bootstrap with 0.
/// Returns the new entry.
double q_update_tabular(QTable& qt, const TabularStep& tr, const HyperParams& h);

// ---- deep learners ---------------------------------------------------------

struct LossRecord {
  bool updated = false;  // false while the memory is warming up
  double loss_mean = 0.0;
  double loss_uncertainty = 0.0;
};

/// Batched (states, next states) view of sampled experiences.
struct Batch {
  nn::Matrix s;
  nn::Matrix s_next;
  std::vector<int> a;
  nn::Vector r;
  std::vector<bool> done;
};
Batch make_batch(std::span<const Experience* const> items, int input_dim);

class DqlAgent {
 public:
  DqlAgent(int input_dim, int num_actions, const HyperParams& h, Rng& init_rng);

  std::vector<double> q_values(std::span<const double> x) const;
  std::size_t act(std::span<const double> x, double epsilon, Rng& rng) const;
  std::size_t greedy(std::span<const double> x) const;

  void remember(Experience e) { memory_.push(std::move(e)); }
  /// Samples a batch, regresses onto r + zeta * max_a Q_target(s', a), takes
  /// one Adam step and syncs the target on schedule.
  LossRecord train_step(Rng& rng);
  /// The update on a given batch; exposed for tests.
  LossRecord update(const Batch& b);
  nn::Vector targets(const Batch& b) const;

  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamSet& online() const { return theta_; }
  const nn::ParamSet& target() const { return theta_target_; }
  const nn::AdamState& adam() const { return adam_; }
  ReplayMemory& memory() { return memory_; }
  const ReplayMemory& memory() const { return memory_; }
  std::uint64_t updates() const { return updates_; }

  void save(std::ostream& out, const std::string& meta) const;
  void load(std::istream& in, std::string* meta);

 private:
  HyperParams h_;
  nn::MlpSpec spec_;
  nn::ParamSet theta_;
  nn::ParamSet theta_target_;
  nn::AdamState adam_;
  ReplayMemory memory_;
  std::uint64_t updates_ = 0;
};

/// mean + sample, element-wise. Throws kShape on a length mismatch.
std::vector<double> q_compose(std::span<const double> mean,
                              std::span<const double> uncertainty_sample);

/// scale * xi_a * m_a with xi_a standard normal, one draw per action.
std::vector<double> uncertainty_sample(std::span<const double> m, double scale,
                                       Rng& rng);

class DdqlAgent {
 public:
  DdqlAgent(int input_dim, int num_actions, const HyperParams& h, Rng& init_rng);

  /// Mean-stream value: v_theta + v_theta_prev (or v_theta alone when the
  /// previous-net sum is off). Used for greedy evaluation.
  std::vector<double> mean_q(std::span<const double> x) const;
  std::vector<double> uncertainty_q(std::span<const double> x) const;
  /// Exploration value: mean plus a Gaussian-scaled uncertainty term.
  std::vector<double> explore_q(std::span<const double> x, double scale,
                                Rng& rng) const;

  std::size_t act(std::span<const double> x, double epsilon, double scale,
                  Rng& rng) const;
  std::size_t greedy(std::span<const double> x) const;

  void remember(Experience e) { memory_.push(std::move(e)); }
  LossRecord train_step(Rng& rng);
  LossRecord update(const Batch& b);

  /// Double-Q targets for the mean stream: a* from the online mean value at
  /// s', evaluated by the target mean value; terminal steps give r.
  nn::Vector mean_targets(const Batch& b) const;
  nn::Vector uncertainty_targets(const Batch& b) const;
  /// Single-transition form of mean_targets.
  double ddql_target(const Experience& e) const;

  void sync_targets();

  const nn::MlpSpec& spec() const { return spec_; }
  const nn::ParamSet& theta() const { return theta_; }
  const nn::ParamSet& theta_prev() const { return theta_prev_; }
  const nn::ParamSet& theta_target() const { return theta_target_; }
  const nn::ParamSet& theta_target_prev() const { return theta_target_prev_; }
  const nn::ParamSet& phi() const { return phi_; }
  const nn::ParamSet& phi_prev() const { return phi_prev_; }
  const nn::ParamSet& phi_target() const { return phi_target_; }
  const nn::AdamState& adam_theta() const { return adam_theta_; }
  const nn::AdamState& adam_phi() const { return adam_phi_; }
  /// Test hook: overwrite one of the eight parameter sets by name
  /// ("theta", "theta_prev", "theta_target", "theta_target_prev", and the
  /// same for "phi").
  void set_params(const std::string& which, const nn::ParamSet& p);
  const HyperParams& hyper() const { return h_; }
  ReplayMemory& memory() { return memory_; }
  const ReplayMemory& memory() const { return memory_; }
  std::uint64_t updates() const { return updates_; }

  void save(std::ostream& out, const std::string& meta) const;
  void load(std::istream& in, std::string* meta);

 private:
  nn::Matrix stream(const nn::ParamSet& cur, const nn::ParamSet& prev,
                    const nn::Matrix& x) const;
  nn::Vector stream_targets(const Batch& b, const nn::ParamSet& tgt,
                            const nn::ParamSet& tgt_prev,
                            const nn::ParamSet& online,
                            const nn::ParamSet& online_prev) const;

  HyperParams h_;
  nn::MlpSpec spec_;
  nn::ParamSet theta_, theta_prev_, theta_target_, theta_target_prev_;
  nn::ParamSet phi_, phi_prev_, phi_target_, phi_target_prev_;
  nn::AdamState adam_theta_, adam_phi_;
  ReplayMemory memory_;
  std::uint64_t updates_ = 0;
};

// ---- memory distribution ---------------------------------------------------

using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_shard(std::span<const Experience> shard);
std::vector<Experience> deserialize_shard(std::span<const std::uint8_t> bytes);

struct MemoryDigest {
  std::uint32_t origin = 0;
  Digest hash{};
  std::vector<std::uint8_t> payload;

  static MemoryDigest make(std::uint32_t origin, std::span<const Experience> shard);
  bool verify() const { return sha256(payload) == hash; }
};

struct AggregationReport {
  std::size_t aggregator = 0;
  std::size_t shards = 0;
  std::size_t rejected = 0;  // shards whose payload failed verification
  std::size_t merged = 0;    // entries stored across all receivers
};

/// Corrupts a broadcast payload in transit; used by integrity tests.
using TamperHook = std::function<void(MemoryDigest&)>;

/// One aggregation round: the agent at round mod N collects every agent's
/// newest shard, hashes it and broadcasts digest plus payload; each receiver
/// verifies before merging.
AggregationReport aggregate_and_distribute(std::span<ReplayMemory* const> memories,
                                           std::uint64_t round,
                                           const TamperHook& tamper = {});

}  // namespace mecsim::agents

#endif  // MECSIM_AGENTS_HPP_
