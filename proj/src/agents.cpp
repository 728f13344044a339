#include "mecsim/agents.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include "mecsim/binary_io.hpp"
#include "mecsim/error.hpp"

namespace mecsim::agents {

void HyperParams::validate() const {
  if (!(psi > 0.0)) throw Error(ErrorCode::kConfig, "psi must be > 0");
  if (!(zeta > 0.0 && zeta < 1.0)) throw Error(ErrorCode::kConfig, "zeta must lie in (0, 1)");
  if (!(eps_start >= 0.0 && eps_start <= 1.0 && eps_end >= 0.0 && eps_end <= eps_start)) {
    throw Error(ErrorCode::kConfig, "epsilon schedule must satisfy 0 <= eps_end <= eps_start <= 1");
  }
  if (!(eps_floor_fraction > 0.0 && eps_floor_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "eps_floor_fraction must lie in (0, 1]");
  }
  if (eta < 1) throw Error(ErrorCode::kConfig, "eta must be >= 1");
  if (batch_size < 1) throw Error(ErrorCode::kConfig, "batch_size must be >= 1");
  if (target_sync_period < 1) throw Error(ErrorCode::kConfig, "target_sync_period must be >= 1");
  if (memory_capacity < batch_size) {
    throw Error(ErrorCode::kConfig, "memory_capacity must be >= batch_size");
  }
  if (train_every < 1) throw Error(ErrorCode::kConfig, "train_every must be >= 1");
  if (hidden.empty()) throw Error(ErrorCode::kConfig, "at least one hidden layer is required");
  for (int w : hidden) {
    if (w < 1) throw Error(ErrorCode::kConfig, "hidden widths must be >= 1");
  }
  if (!(uncertainty_scale >= 0.0)) {
    throw Error(ErrorCode::kConfig, "uncertainty_scale must be >= 0");
  }
}

double epsilon_at(const HyperParams& h, int episode) {
  const double floor_episode = h.eps_floor_fraction * h.eta;
  if (episode <= 0) return h.eps_start;
  if (episode >= floor_episode || h.eps_start <= 0.0) return h.eps_end;
  if (h.eps_end <= 0.0) {
    return h.eps_start * (1.0 - episode / floor_episode);
  }
  const double frac = episode / floor_episode;
  return std::max(h.eps_end, h.eps_start * std::pow(h.eps_end / h.eps_start, frac));
}

std::size_t argmax(std::span<const double> q) {
  if (q.empty()) throw Error(ErrorCode::kAction, "empty action set");
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q[i] > q[best]) best = i;
  }
  return best;
}

std::size_t epsilon_greedy(std::span<const double> q, double epsilon, Rng& rng) {
  if (q.empty()) throw Error(ErrorCode::kAction, "empty action set");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::kAction, "epsilon must lie in [0, 1]");
  }
  if (epsilon > 0.0 && uniform01(rng) < epsilon) return uniform_index(rng, q.size());
  return argmax(q);
}

// ---- replay ----------------------------------------------------------------

ReplayMemory::ReplayMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error(ErrorCode::kConfig, "replay capacity must be > 0");
  ring_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

bool ReplayMemory::store(Experience e) {
  if (ids_.count(e.id)) return false;
  ids_.insert(e.id);
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(e));
  } else {
    ids_.erase(ring_[head_].id);
    ring_[head_] = std::move(e);
    head_ = (head_ + 1) % capacity_;
  }
  return true;
}

bool ReplayMemory::push(Experience e) {
  if (ids_.count(e.id)) return false;
  pending_.push_back(e);
  return store(std::move(e));
}

std::size_t ReplayMemory::merge(std::span<const Experience> shard) {
  std::size_t added = 0;
  for (const auto& e : shard) added += store(e) ? 1 : 0;
  return added;
}

const Experience& ReplayMemory::at(std::size_t i) const {
  if (i >= ring_.size()) throw Error(ErrorCode::kBatch, "replay index out of range");
  return ring_.size() < capacity_ ? ring_[i] : ring_[(head_ + i) % capacity_];
}

std::vector<const Experience*> ReplayMemory::sample(std::size_t n, Rng& rng) const {
  const std::size_t m = ring_.size();
  if (n > m) throw Error(ErrorCode::kBatch, "batch larger than replay memory");
  // Floyd's algorithm: n distinct indices in O(n) draws.
  std::vector<std::size_t> picked;
  picked.reserve(n);
  for (std::size_t j = m - n; j < m; ++j) {
    const std::size_t t = uniform_index(rng, j + 1);
    const bool seen = std::find(picked.begin(), picked.end(), t) != picked.end();
    picked.push_back(seen ? j : t);
  }
  std::vector<const Experience*> out;
  out.reserve(n);
  for (std::size_t i : picked) out.push_back(&ring_[i]);
  return out;
}

std::vector<Experience> ReplayMemory::take_shard() {
  std::vector<Experience> out;
  out.swap(pending_);
  return out;
}

// ---- tabular ---------------------------------------------------------------

QTable::Row& QTable::row_ref(std::uint64_t state) {
  auto [it, inserted] = table_.try_emplace(state);
  if (inserted) {
    it->second.q.assign(num_actions_, 0.0);
    it->second.n.assign(num_actions_, 0);
  }
  return it->second;
}

double QTable::get(std::uint64_t state, std::size_t action) const {
  if (action >= num_actions_) throw Error(ErrorCode::kAction, "action index out of range");
  auto it = table_.find(state);
  return it == table_.end() ? 0.0 : it->second.q[action];
}

void QTable::set(std::uint64_t state, std::size_t action, double value) {
  if (action >= num_actions_) throw Error(ErrorCode::kAction, "action index out of range");
  if (!std::isfinite(value)) throw Error(ErrorCode::kNumeric, "non-finite Q value");
  Row& r = row_ref(state);
  r.q[action] = value;
  r.n[action] += 1;
}

std::vector<double> QTable::row(std::uint64_t state) const {
  auto it = table_.find(state);
  return it == table_.end() ? std::vector<double>(num_actions_, 0.0) : it->second.q;
}

double QTable::max(std::uint64_t state) const {
  auto it = table_.find(state);
  if (it == table_.end()) return 0.0;
  return *std::max_element(it->second.q.begin(), it->second.q.end());
}

std::uint64_t QTable::visits(std::uint64_t state, std::size_t action) const {
  auto it = table_.find(state);
  return it == table_.end() ? 0 : it->second.n.at(action);
}

std::vector<std::uint64_t> QTable::states() const {
  std::vector<std::uint64_t> keys;
  keys.reserve(table_.size());
  for (const auto& [k, _] : table_) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  return keys;
}

double q_update_tabular(QTable& qt, const TabularStep& tr, const HyperParams& h) {
  const double q = qt.get(tr.s, tr.a);
  const double bootstrap = tr.done ? 0.0 : h.zeta * qt.max(tr.s_next);
  const double updated = q + h.psi * (tr.r + bootstrap - q);
  qt.set(tr.s, tr.a, updated);
  return updated;
}

// ---- deep learners ---------------------------------------------------------

Batch make_batch(std::span<const Experience* const> items, int input_dim) {
  if (items.empty()) throw Error(ErrorCode::kBatch, "empty training batch");
  const auto n = static_cast<Eigen::Index>(items.size());
  Batch b;
  b.s.resize(input_dim, n);
  b.s_next.resize(input_dim, n);
  b.r.resize(n);
  b.a.reserve(items.size());
  b.done.reserve(items.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Experience& e = *items[static_cast<std::size_t>(i)];
    if (static_cast<int>(e.s.size()) != input_dim ||
        static_cast<int>(e.s_next.size()) != input_dim) {
      throw Error(ErrorCode::kShape, "experience state has the wrong dimension");
    }
    b.s.col(i) = Eigen::Map<const nn::Vector>(e.s.data(), input_dim);
    b.s_next.col(i) = Eigen::Map<const nn::Vector>(e.s_next.data(), input_dim);
    b.a.push_back(e.a);
    b.r[i] = e.r;
    b.done.push_back(e.done);
  }
  return b;
}

namespace {

std::vector<double> to_std(const nn::Vector& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::size_t col_argmax(const nn::Matrix& m, Eigen::Index c) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < m.rows(); ++i) {
    if (m(i, c) > m(best, c)) best = i;
  }
  return static_cast<std::size_t>(best);
}

void put_string(std::vector<std::uint8_t>& buf, const std::string& s) {
  io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  buf.insert(buf.end(), s.begin(), s.end());
}

std::string get_string(io::Reader& r) {
  const auto n = r.get<std::uint32_t>();
  std::string s(n, '\0');
  r.bytes(s.data(), n);
  return s;
}

constexpr char kAgentMagic[8] = {'M', 'E', 'C', 'S', 'A', 'G', '0', '1'};
constexpr std::uint32_t kAgentVersion = 1;

struct NetBlob {
  const nn::ParamSet* params;
  const nn::AdamState* adam;
};

// Agent checkpoint: magic, version, kind, metadata string, update count, then
// length-prefixed network checkpoints in a fixed order.
void save_agent(std::ostream& out, std::uint32_t kind, const std::string& meta,
                std::uint64_t updates, const nn::MlpSpec& spec,
                const std::vector<NetBlob>& nets) {
  std::vector<std::uint8_t> buf(std::begin(kAgentMagic), std::end(kAgentMagic));
  io::put_le<std::uint32_t>(buf, kAgentVersion);
  io::put_le<std::uint32_t>(buf, kind);
  put_string(buf, meta);
  io::put_le<std::uint64_t>(buf, updates);
  io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(nets.size()));
  for (const auto& n : nets) {
    std::ostringstream os(std::ios::binary);
    nn::save_checkpoint(os, spec, *n.params, n.adam);
    const std::string blob = os.str();
    io::put_le<std::uint64_t>(buf, blob.size());
    buf.insert(buf.end(), blob.begin(), blob.end());
  }
  io::write_all(out, buf);
}

std::vector<nn::Checkpoint> load_agent(std::istream& in, std::uint32_t kind,
                                       const nn::MlpSpec& spec, std::string* meta,
                                       std::uint64_t* updates, std::size_t expected) {
  const std::vector<std::uint8_t> buf = io::read_all(in);
  io::Reader r(buf.data(), buf.size());
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kAgentMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::kCheckpoint, "not an agent checkpoint (bad magic)");
  }
  if (r.get<std::uint32_t>() != kAgentVersion) {
    throw Error(ErrorCode::kCheckpoint, "unsupported agent checkpoint version");
  }
  if (r.get<std::uint32_t>() != kind) {
    throw Error(ErrorCode::kCheckpoint, "checkpoint belongs to a different agent kind");
  }
  std::string m = get_string(r);
  if (meta) *meta = std::move(m);
  *updates = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  if (count != expected) throw Error(ErrorCode::kCheckpoint, "unexpected network count");
  std::vector<nn::Checkpoint> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint64_t>();
    std::string blob(len, '\0');
    r.bytes(blob.data(), len);
    std::istringstream is(blob, std::ios::binary);
    out.push_back(nn::load_checkpoint(is));
    if (!(out.back().spec == spec)) {
      throw Error(ErrorCode::kCheckpoint, "checkpoint network shape differs from agent");
    }
  }
  if (!r.at_end()) throw Error(ErrorCode::kCheckpoint, "trailing bytes after agent checkpoint");
  return out;
}

}  // namespace

DqlAgent::DqlAgent(int input_dim, int num_actions, const HyperParams& h,
                   Rng& init_rng)
    : h_(h),
      spec_(nn::MlpSpec::q_network(input_dim, h.hidden, num_actions)),
      memory_(static_cast<std::size_t>(h.memory_capacity)) {
  h_.validate();
  theta_ = nn::init_params(spec_, init_rng);
  theta_target_ = theta_;
  adam_ = nn::AdamState::for_params(theta_, h_.psi);
}

std::vector<double> DqlAgent::q_values(std::span<const double> x) const {
  return to_std(nn::forward(spec_, theta_, x));
}

std::size_t DqlAgent::act(std::span<const double> x, double epsilon, Rng& rng) const {
  return epsilon_greedy(q_values(x), epsilon, rng);
}

std::size_t DqlAgent::greedy(std::span<const double> x) const {
  return argmax(q_values(x));
}

nn::Vector DqlAgent::targets(const Batch& b) const {
  const nn::Matrix qt = nn::forward_batch(spec_, theta_target_, b.s_next);
  nn::Matrix qo;
  if (h_.double_q) qo = nn::forward_batch(spec_, theta_, b.s_next);
  nn::Vector y(b.r.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (b.done[static_cast<std::size_t>(i)]) {
      y[i] = b.r[i];
      continue;
    }
    const double boot = h_.double_q
                            ? qt(static_cast<Eigen::Index>(col_argmax(qo, i)), i)
                            : qt.col(i).maxCoeff();
    y[i] = b.r[i] + h_.zeta * boot;
  }
  return y;
}

LossRecord DqlAgent::update(const Batch& b) {
  nn::TdBatch td{b.s, b.a, targets(b)};
  const nn::LossGrad lg = nn::td_loss(spec_, theta_, nullptr, td);
  nn::adam_step(theta_, lg.grad, adam_);
  ++updates_;
  if (updates_ % static_cast<std::uint64_t>(h_.target_sync_period) == 0) {
    theta_target_ = theta_;
  }
  return {true, lg.loss, 0.0};
}

LossRecord DqlAgent::train_step(Rng& rng) {
  if (memory_.size() < static_cast<std::size_t>(h_.batch_size)) return {};
  const auto items = memory_.sample(static_cast<std::size_t>(h_.batch_size), rng);
  return update(make_batch(items, spec_.input_dim()));
}

void DqlAgent::save(std::ostream& out, const std::string& meta) const {
  save_agent(out, 1, meta, updates_, spec_, {{&theta_, &adam_}, {&theta_target_, nullptr}});
}

void DqlAgent::load(std::istream& in, std::string* meta) {
  auto cks = load_agent(in, 1, spec_, meta, &updates_, 2);
  theta_ = std::move(cks[0].params);
  if (cks[0].has_adam) adam_ = std::move(cks[0].adam);
  theta_target_ = std::move(cks[1].params);
}

std::vector<double> q_compose(std::span<const double> mean,
                              std::span<const double> sample) {
  if (mean.size() != sample.size()) {
    throw Error(ErrorCode::kShape, "mean and uncertainty vectors differ in length");
  }
  std::vector<double> q(mean.size());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = mean[i] + sample[i];
  return q;
}

std::vector<double> uncertainty_sample(std::span<const double> m, double scale,
                                       Rng& rng) {
  std::vector<double> out(m.size(), 0.0);
  if (scale == 0.0) return out;
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = scale * standard_normal(rng) * m[i];
  return out;
}

DdqlAgent::DdqlAgent(int input_dim, int num_actions, const HyperParams& h,
                     Rng& init_rng)
    : h_(h),
      spec_(nn::MlpSpec::q_network(input_dim, h.hidden, num_actions)),
      memory_(static_cast<std::size_t>(h.memory_capacity)) {
  h_.validate();
  theta_ = nn::init_params(spec_, init_rng);
  phi_ = nn::init_params(spec_, init_rng);
  theta_prev_ = theta_;
  phi_prev_ = phi_;
  sync_targets();
  adam_theta_ = nn::AdamState::for_params(theta_, h_.psi);
  adam_phi_ = nn::AdamState::for_params(phi_, h_.psi);
}

void DdqlAgent::sync_targets() {
  theta_target_ = theta_;
  theta_target_prev_ = theta_prev_;
  phi_target_ = phi_;
  phi_target_prev_ = phi_prev_;
}

void DdqlAgent::set_params(const std::string& which, const nn::ParamSet& p) {
  if (static_cast<std::size_t>(p.values.size()) != spec_.param_count()) {
    throw Error(ErrorCode::kShape, "parameter set does not match the agent network");
  }
  if (which == "theta") theta_ = p;
  else if (which == "theta_prev") theta_prev_ = p;
  else if (which == "theta_target") theta_target_ = p;
  else if (which == "theta_target_prev") theta_target_prev_ = p;
  else if (which == "phi") phi_ = p;
  else if (which == "phi_prev") phi_prev_ = p;
  else if (which == "phi_target") phi_target_ = p;
  else if (which == "phi_target_prev") phi_target_prev_ = p;
  else throw Error(ErrorCode::kConfig, "unknown parameter set '" + which + "'");
}

nn::Matrix DdqlAgent::stream(const nn::ParamSet& cur, const nn::ParamSet& prev,
                             const nn::Matrix& x) const {
  nn::Matrix out = nn::forward_batch(spec_, cur, x);
  if (h_.use_prev_net_sum) out += nn::forward_batch(spec_, prev, x);
  return out;
}

std::vector<double> DdqlAgent::mean_q(std::span<const double> x) const {
  const nn::Matrix in = Eigen::Map<const nn::Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return to_std(stream(theta_, theta_prev_, in).col(0));
}

std::vector<double> DdqlAgent::uncertainty_q(std::span<const double> x) const {
  const nn::Matrix in = Eigen::Map<const nn::Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return to_std(stream(phi_, phi_prev_, in).col(0));
}

std::vector<double> DdqlAgent::explore_q(std::span<const double> x, double scale,
                                         Rng& rng) const {
  const std::vector<double> mean = mean_q(x);
  if (scale == 0.0) return mean;
  return q_compose(mean, uncertainty_sample(uncertainty_q(x), scale, rng));
}

std::size_t DdqlAgent::act(std::span<const double> x, double epsilon, double scale,
                           Rng& rng) const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw Error(ErrorCode::kAction, "epsilon must lie in [0, 1]");
  }
  if (epsilon > 0.0 && uniform01(rng) < epsilon) {
    return uniform_index(rng, static_cast<std::size_t>(spec_.output_dim()));
  }
  return argmax(explore_q(x, scale, rng));
}

std::size_t DdqlAgent::greedy(std::span<const double> x) const {
  return argmax(mean_q(x));
}

nn::Vector DdqlAgent::stream_targets(const Batch& b, const nn::ParamSet& tgt,
                                     const nn::ParamSet& tgt_prev,
                                     const nn::ParamSet& online,
                                     const nn::ParamSet& online_prev) const {
  // Action selection always uses the online mean stream.
  const nn::Matrix select = stream(theta_, theta_prev_, b.s_next);
  const nn::Matrix eval = h_.tvf_verbatim ? stream(online, online_prev, b.s_next)
                                          : stream(tgt, tgt_prev, b.s_next);
  const double weight = h_.tvf_verbatim ? h_.psi : h_.zeta;
  nn::Vector y(b.r.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (b.done[static_cast<std::size_t>(i)]) {
      y[i] = b.r[i];
      continue;
    }
    const auto a_star = static_cast<Eigen::Index>(col_argmax(select, i));
    y[i] = b.r[i] + weight * eval(a_star, i);
  }
  return y;
}

nn::Vector DdqlAgent::mean_targets(const Batch& b) const {
  return stream_targets(b, theta_target_, theta_target_prev_, theta_, theta_prev_);
}

nn::Vector DdqlAgent::uncertainty_targets(const Batch& b) const {
  return stream_targets(b, phi_target_, phi_target_prev_, phi_, phi_prev_);
}

double DdqlAgent::ddql_target(const Experience& e) const {
  const Experience* items[] = {&e};
  return mean_targets(make_batch(items, spec_.input_dim()))[0];
}

LossRecord DdqlAgent::update(const Batch& b) {
  const nn::ParamSet* theta_prev = h_.use_prev_net_sum ? &theta_prev_ : nullptr;
  const nn::ParamSet* phi_prev = h_.use_prev_net_sum ? &phi_prev_ : nullptr;
  const nn::TdBatch mean_batch{b.s, b.a, mean_targets(b)};
  const nn::TdBatch unc_batch{b.s, b.a, uncertainty_targets(b)};
  const nn::LossGrad lm = nn::td_loss_mean(spec_, mean_batch, theta_, theta_prev);
  const nn::LossGrad lu = nn::td_loss_uncertainty(spec_, unc_batch, phi_, phi_prev);

  nn::ParamSet theta_before = theta_;
  nn::ParamSet phi_before = phi_;
  nn::adam_step(theta_, lm.grad, adam_theta_);
  nn::adam_step(phi_, lu.grad, adam_phi_);
  theta_prev_ = std::move(theta_before);
  phi_prev_ = std::move(phi_before);

  ++updates_;
  if (updates_ % static_cast<std::uint64_t>(h_.target_sync_period) == 0) sync_targets();
  return {true, lm.loss, lu.loss};
}

LossRecord DdqlAgent::train_step(Rng& rng) {
  if (memory_.size() < static_cast<std::size_t>(h_.batch_size)) return {};
  const auto items = memory_.sample(static_cast<std::size_t>(h_.batch_size), rng);
  return update(make_batch(items, spec_.input_dim()));
}

void DdqlAgent::save(std::ostream& out, const std::string& meta) const {
  save_agent(out, 2, meta, updates_, spec_,
             {{&theta_, &adam_theta_},
              {&theta_prev_, nullptr},
              {&theta_target_, nullptr},
              {&theta_target_prev_, nullptr},
              {&phi_, &adam_phi_},
              {&phi_prev_, nullptr},
              {&phi_target_, nullptr},
              {&phi_target_prev_, nullptr}});
}

void DdqlAgent::load(std::istream& in, std::string* meta) {
  auto cks = load_agent(in, 2, spec_, meta, &updates_, 8);
  theta_ = std::move(cks[0].params);
  if (cks[0].has_adam) adam_theta_ = std::move(cks[0].adam);
  theta_prev_ = std::move(cks[1].params);
  theta_target_ = std::move(cks[2].params);
  theta_target_prev_ = std::move(cks[3].params);
  phi_ = std::move(cks[4].params);
  if (cks[4].has_adam) adam_phi_ = std::move(cks[4].adam);
  phi_prev_ = std::move(cks[5].params);
  phi_target_ = std::move(cks[6].params);
  phi_target_prev_ = std::move(cks[7].params);
}

// ---- memory distribution ---------------------------------------------------

Digest sha256(std::span<const std::uint8_t> bytes) {
  Digest d{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), d.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != d.size()) {
    throw Error(ErrorCode::kNumeric, "SHA-256 digest failed");
  }
  return d;
}

std::vector<std::uint8_t> serialize_shard(std::span<const Experience> shard) {
  std::vector<std::uint8_t> buf;
  io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(shard.size()));
  for (const auto& e : shard) {
    io::put_le<std::uint64_t>(buf, e.id);
    io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(e.s.size()));
    for (double v : e.s) io::put_le<double>(buf, v);
    io::put_le<std::int32_t>(buf, e.a);
    io::put_le<double>(buf, e.r);
    io::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(e.s_next.size()));
    for (double v : e.s_next) io::put_le<double>(buf, v);
    io::put_le<std::uint8_t>(buf, e.done ? 1 : 0);
  }
  return buf;
}

std::vector<Experience> deserialize_shard(std::span<const std::uint8_t> bytes) {
  io::Reader r(bytes.data(), bytes.size());
  const auto count = r.get<std::uint32_t>();
  std::vector<Experience> out;
  out.reserve(std::min<std::size_t>(count, bytes.size() / 16));
  const auto read_vec = [&r](std::vector<double>& v) {
    const auto n = r.get<std::uint32_t>();
    if (n > 1u << 20) throw Error(ErrorCode::kCheckpoint, "implausible state width");
    v.resize(n);
    for (auto& x : v) x = r.get<double>();
  };
  for (std::uint32_t i = 0; i < count; ++i) {
    Experience e;
    e.id = r.get<std::uint64_t>();
    read_vec(e.s);
    e.a = r.get<std::int32_t>();
    e.r = r.get<double>();
    read_vec(e.s_next);
    e.done = r.get<std::uint8_t>() != 0;
    out.push_back(std::move(e));
  }
  if (!r.at_end()) throw Error(ErrorCode::kCheckpoint, "trailing bytes after shard");
  return out;
}

MemoryDigest MemoryDigest::make(std::uint32_t origin, std::span<const Experience> shard) {
  MemoryDigest d;
  d.origin = origin;
  d.payload = serialize_shard(shard);
  d.hash = sha256(d.payload);
  return d;
}

AggregationReport aggregate_and_distribute(std::span<ReplayMemory* const> memories,
                                           std::uint64_t round,
                                           const TamperHook& tamper) {
  if (memories.empty()) throw Error(ErrorCode::kConfig, "aggregation needs at least one agent");
  AggregationReport rep;
  rep.aggregator = static_cast<std::size_t>(round % memories.size());

  std::vector<MemoryDigest> broadcast;
  broadcast.reserve(memories.size());
  for (std::size_t i = 0; i < memories.size(); ++i) {
    const auto shard = memories[i]->take_shard();
    broadcast.push_back(MemoryDigest::make(static_cast<std::uint32_t>(i), shard));
  }
  rep.shards = broadcast.size();
  if (tamper) {
    for (auto& d : broadcast) tamper(d);
  }

  for (const auto& d : broadcast) {
    if (!d.verify()) {
      ++rep.rejected;
      continue;
    }
    const std::vector<Experience> shard = deserialize_shard(d.payload);
    for (std::size_t j = 0; j < memories.size(); ++j) {
      if (j == d.origin) continue;  // already holds its own entries
      rep.merged += memories[j]->merge(shard);
    }
  }
  return rep;
}

}  // namespace mecsim::agents
