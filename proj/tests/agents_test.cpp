#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mecsim/agents.hpp"
#include "mecsim/error.hpp"
#include "oracles.hpp"

using namespace mecsim;
using namespace mecsim::agents;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::kIo;
}

Experience make_exp(std::uint64_t id, std::vector<double> s, int a, double r,
                    std::vector<double> s_next, bool done) {
  Experience e;
  e.id = id;
  e.s = std::move(s);
  e.a = a;
  e.r = r;
  e.s_next = std::move(s_next);
  e.done = done;
  return e;
}

HyperParams small_hyper() {
  HyperParams h;
  h.psi = 1e-3;
  h.batch_size = 4;
  h.memory_capacity = 64;
  h.target_sync_period = 5;
  h.hidden = {6};
  return h;
}

// Random experiences over a fixed input width.
std::vector<Experience> random_experiences(int n, int dim, int actions, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Experience> out;
  for (int k = 0; k < n; ++k) {
    std::vector<double> s(static_cast<std::size_t>(dim)), s2(static_cast<std::size_t>(dim));
    for (auto& v : s) v = uniform(rng, -1, 1);
    for (auto& v : s2) v = uniform(rng, -1, 1);
    out.push_back(make_exp(static_cast<std::uint64_t>(k), s,
                           static_cast<int>(uniform_index(rng, static_cast<std::size_t>(actions))),
                           uniform(rng, -1, 1), s2, bernoulli(rng, 0.2)));
  }
  return out;
}

Batch batch_of(const std::vector<Experience>& xs, std::size_t from, std::size_t n, int dim) {
  std::vector<const Experience*> items;
  for (std::size_t i = 0; i < n; ++i) items.push_back(&xs[(from + i) % xs.size()]);
  return make_batch(items, dim);
}

nn::ParamSet zeros(const nn::MlpSpec& spec) {
  nn::ParamSet p;
  p.values = nn::Vector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  return p;
}

nn::ParamSet with_output_bias(const nn::MlpSpec& spec, std::vector<double> bias) {
  nn::ParamSet p = zeros(spec);
  const std::size_t last = spec.num_layers() - 1;
  const auto off = static_cast<Eigen::Index>(
      spec.layer_offset(last) +
      static_cast<std::size_t>(spec.widths[last] * spec.widths[last + 1]));
  for (std::size_t i = 0; i < bias.size(); ++i) p.values[off + static_cast<Eigen::Index>(i)] = bias[i];
  return p;
}

}  // namespace

TEST(EpsilonGreedy, Examples) {
  Rng rng(1);
  const std::vector<double> q = {0.1, 0.9, 0.3};
  for (int i = 0; i < 100; ++i) EXPECT_EQ(epsilon_greedy(q, 0.0, rng), 1u);
  EXPECT_EQ(argmax(std::vector<double>{2.0, 2.0, 1.0}), 0u);
  EXPECT_EQ(code_of([&] { epsilon_greedy(std::vector<double>{}, 0.1, rng); }), ErrorCode::kAction);
  EXPECT_EQ(code_of([&] { epsilon_greedy(q, 1.5, rng); }), ErrorCode::kAction);
}

TEST(EpsilonGreedy, FullExplorationIsUniform) {
  Rng rng(2);
  const std::vector<double> q(10, 0.0);
  std::vector<int> counts(10, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++counts[epsilon_greedy(q, 1.0, rng)];
  const double sigma = std::sqrt(n * 0.1 * 0.9);
  for (int c : counts) EXPECT_LE(std::abs(c - n * 0.1), 3.0 * sigma);
}

TEST(EpsilonSchedule, DecaysToFloorAndHolds) {
  HyperParams h;
  h.eta = 100;
  EXPECT_DOUBLE_EQ(epsilon_at(h, 0), 1.0);
  double prev = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double e = epsilon_at(h, k);
    EXPECT_LE(e, prev);
    EXPECT_GE(e, h.eps_end);
    prev = e;
  }
  EXPECT_GT(epsilon_at(h, 79), h.eps_end);
  EXPECT_DOUBLE_EQ(epsilon_at(h, 80), h.eps_end);
  EXPECT_DOUBLE_EQ(epsilon_at(h, 100), h.eps_end);
}

TEST(Tabular, UpdateExamples) {
  HyperParams h;
  h.psi = 0.5;
  h.zeta = 0.9;
  QTable qt(2);
  qt.set(0, 1, 1.0);
  qt.set(1, 0, 2.0);
  EXPECT_NEAR(q_update_tabular(qt, {0, 1, 0.0, 1, false}, h), 1.4, 1e-12);

  QTable fix(2);
  fix.set(0, 0, 1.9);
  fix.set(1, 0, 1.0);
  EXPECT_NEAR(q_update_tabular(fix, {0, 0, 1.0, 1, false}, h), 1.9, 1e-12);

  h.psi = 1.0;
  QTable term(2);
  term.set(3, 0, 5.0);
  EXPECT_DOUBLE_EQ(q_update_tabular(term, {2, 1, 1.0, 3, true}, h), 1.0);
  EXPECT_EQ(term.visits(2, 1), 1u);
}

TEST(Tabular, ConvergesToValueIteration) {
  const mecsim::testing::TinyMdp mdp;
  const auto a = mecsim::testing::tabular_q_learning(mdp, 0.1, 0.9, 200000, 5);
  const auto b = mecsim::testing::tabular_q_learning(mdp, 0.1, 0.9, 200000, 5);
  EXPECT_LT(a.max_error, 1e-2);
  EXPECT_EQ(a.q, b.q);
  EXPECT_LT(mecsim::testing::bellman_residual(mdp, 0.1, 0.9, 1000, 6), 1e-3);
}

TEST(Compose, Examples) {
  EXPECT_EQ(q_compose(std::vector<double>{1.0, 2.0}, std::vector<double>{0.5, -0.5}),
            (std::vector<double>{1.5, 1.5}));
  EXPECT_EQ(code_of([] { q_compose(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}); }),
            ErrorCode::kShape);
  Rng a(4), b(4);
  const std::vector<double> m = {0.3, 1.2, 0.7};
  EXPECT_EQ(uncertainty_sample(m, 2.0, a), uncertainty_sample(m, 2.0, b));
  EXPECT_EQ(uncertainty_sample(m, 0.0, a), std::vector<double>(3, 0.0));
}

TEST(DdqlAgent, ZeroScaleExplorationIsTheMean) {
  Rng init(5), rng(6);
  DdqlAgent agent(4, 3, small_hyper(), init);
  const std::vector<double> x = {0.2, -0.1, 0.5, 0.9};
  EXPECT_EQ(agent.explore_q(x, 0.0, rng), agent.mean_q(x));
}

TEST(DdqlAgent, ExplorationDecomposes) {
  Rng init(7);
  DdqlAgent agent(4, 3, small_hyper(), init);
  const std::vector<double> x = {0.4, 0.3, -0.6, 0.1};
  Rng r1(9), r2(9);
  const auto composed =
      q_compose(agent.mean_q(x), uncertainty_sample(agent.uncertainty_q(x), 1.7, r2));
  EXPECT_EQ(agent.explore_q(x, 1.7, r1), composed);
  const nn::Matrix in = Eigen::Map<const nn::Matrix>(x.data(), 4, 1);
  const nn::Matrix sum = nn::forward_batch(agent.spec(), agent.theta(), in) +
                         nn::forward_batch(agent.spec(), agent.theta_prev(), in);
  const auto mean = agent.mean_q(x);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(mean[static_cast<std::size_t>(i)], sum(i, 0));
}

TEST(DdqlAgent, WarmUpSkipsUpdates) {
  Rng init(1), rng(2);
  DdqlAgent agent(3, 2, small_hyper(), init);
  for (const auto& e : random_experiences(3, 3, 2, 3)) agent.remember(e);
  EXPECT_FALSE(agent.train_step(rng).updated);
  agent.remember(random_experiences(4, 3, 2, 4)[3]);
  const auto rec = agent.train_step(rng);
  EXPECT_TRUE(rec.updated);
  EXPECT_EQ(agent.updates(), 1u);
}

TEST(DqlAgent, ZeroLossLeavesParams) {
  Rng init(11);
  HyperParams h = small_hyper();
  DqlAgent agent(3, 2, h, init);
  const std::vector<double> s = {0.1, 0.2, 0.3};
  const nn::Matrix in = Eigen::Map<const nn::Matrix>(s.data(), 3, 1);
  const double q = nn::forward_batch(agent.spec(), agent.online(), in)(1, 0);
  const std::vector<Experience> xs = {make_exp(1, s, 1, q, s, true)};
  const nn::Vector before = agent.online().values;
  const auto rec = agent.update(batch_of(xs, 0, 1, 3));
  EXPECT_EQ(rec.loss_mean, 0.0);
  EXPECT_EQ(agent.online().values, before);
}

TEST(DqlAgent, LearnsTwoStateChain) {
  // One-hot states; action 0 stays, action 1 switches.
  const double zeta = 0.5;
  const double reward[2][2] = {{0.0, 1.0}, {0.5, 0.0}};
  const int next[2][2] = {{0, 1}, {1, 0}};
  double q[2][2] = {};
  for (int it = 0; it < 200; ++it) {
    double nq[2][2];
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a) {
        const int n = next[s][a];
        nq[s][a] = reward[s][a] + zeta * std::max(q[n][0], q[n][1]);
      }
    std::copy(&nq[0][0], &nq[0][0] + 4, &q[0][0]);
  }
  HyperParams h;
  h.psi = 1e-2;
  h.zeta = zeta;
  h.batch_size = 16;
  h.memory_capacity = 64;
  h.target_sync_period = 10;
  h.hidden = {16};
  Rng init(21), rng(22);
  DqlAgent agent(2, 2, h, init);
  const auto onehot = [](int s) { return std::vector<double>{s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0}; };
  std::uint64_t id = 0;
  for (int rep = 0; rep < 16; ++rep)
    for (int s = 0; s < 2; ++s)
      for (int a = 0; a < 2; ++a)
        agent.remember(make_exp(id++, onehot(s), a, reward[s][a], onehot(next[s][a]), false));
  for (int k = 0; k < 2000; ++k) agent.train_step(rng);
  for (int s = 0; s < 2; ++s) {
    const auto v = agent.q_values(onehot(s));
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(v[static_cast<std::size_t>(a)], q[s][a], 0.05);
  }
}

TEST(DdqlTarget, Examples) {
  HyperParams h = small_hyper();
  h.zeta = 0.9;
  Rng init(3);
  DdqlAgent agent(2, 3, h, init);
  const auto& spec = agent.spec();
  for (const char* name : {"theta", "theta_prev", "theta_target", "theta_target_prev"}) {
    agent.set_params(name, zeros(spec));
  }
  const std::vector<double> s = {0.3, 0.6};
  EXPECT_DOUBLE_EQ(agent.ddql_target(make_exp(0, s, 0, 5.0, s, true)), 5.0);
  EXPECT_DOUBLE_EQ(agent.ddql_target(make_exp(0, s, 0, 0.7, s, false)), 0.7);

  agent.set_params("theta", with_output_bias(spec, {0.0, 1.0, 0.0}));
  agent.set_params("theta_target", with_output_bias(spec, {5.0, 2.0, 7.0}));
  EXPECT_NEAR(agent.ddql_target(make_exp(0, s, 0, 1.0, s, false)), 2.8, 1e-12);
}

TEST(DdqlAgent, ReducesToDoubleDqlWithoutPrevSumAndUncertainty) {
  HyperParams h = small_hyper();
  h.use_prev_net_sum = false;
  h.uncertainty_scale = 0.0;
  HyperParams hd = h;
  hd.double_q = true;
  Rng i1(31), i2(31);
  DdqlAgent ddql(3, 4, h, i1);
  DqlAgent dql(3, 4, hd, i2);
  ASSERT_EQ(ddql.theta().values, dql.online().values);
  const auto xs = random_experiences(40, 3, 4, 32);
  for (std::size_t k = 0; k < 30; ++k) {
    const Batch b = batch_of(xs, k * 3, 8, 3);
    ASSERT_EQ(ddql.mean_targets(b), dql.targets(b));
    const auto lr = ddql.update(b);
    const auto lq = dql.update(b);
    ASSERT_EQ(lr.loss_mean, lq.loss_mean);
  }
  EXPECT_EQ(ddql.theta().values, dql.online().values);
  EXPECT_EQ(ddql.theta_target().values, dql.target().values);
  const std::vector<double> x = {0.1, -0.7, 0.4};
  EXPECT_EQ(ddql.greedy(x), dql.greedy(x));
}

TEST(DdqlAgent, TargetsStaleUntilSync) {
  HyperParams h = small_hyper();
  h.target_sync_period = 4;
  Rng init(41);
  DdqlAgent agent(3, 2, h, init);
  const nn::Vector t0 = agent.theta_target().values;
  const nn::Vector p0 = agent.phi_target().values;
  const auto xs = random_experiences(20, 3, 2, 42);
  for (std::size_t k = 0; k < 3; ++k) {
    const nn::Vector before = agent.theta().values;
    agent.update(batch_of(xs, k * 4, 4, 3));
    EXPECT_EQ(agent.theta_prev().values, before);
    EXPECT_EQ(agent.theta_target().values, t0);
    EXPECT_EQ(agent.phi_target().values, p0);
  }
  agent.update(batch_of(xs, 12, 4, 3));
  EXPECT_EQ(agent.theta_target().values, agent.theta().values);
  EXPECT_EQ(agent.theta_target_prev().values, agent.theta_prev().values);
  EXPECT_EQ(agent.phi_target().values, agent.phi().values);
}

TEST(DdqlAgent, UnknownParamSetRejected) {
  Rng init(1);
  DdqlAgent agent(3, 2, small_hyper(), init);
  EXPECT_EQ(code_of([&] { agent.set_params("omega", agent.theta()); }), ErrorCode::kConfig);
  nn::ParamSet bad;
  bad.values = nn::Vector::Zero(2);
  EXPECT_EQ(code_of([&] { agent.set_params("theta", bad); }), ErrorCode::kShape);
}

TEST(DdqlAgent, CheckpointRoundTrip) {
  Rng init(51), other(52);
  DdqlAgent a(3, 2, small_hyper(), init);
  const auto xs = random_experiences(12, 3, 2, 53);
  for (std::size_t k = 0; k < 7; ++k) a.update(batch_of(xs, k, 4, 3));
  std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
  a.save(ss, "episode=7");
  DdqlAgent b(3, 2, small_hyper(), other);
  std::string meta;
  b.load(ss, &meta);
  EXPECT_EQ(meta, "episode=7");
  EXPECT_EQ(b.updates(), a.updates());
  EXPECT_EQ(b.theta().values, a.theta().values);
  EXPECT_EQ(b.theta_prev().values, a.theta_prev().values);
  EXPECT_EQ(b.theta_target().values, a.theta_target().values);
  EXPECT_EQ(b.theta_target_prev().values, a.theta_target_prev().values);
  EXPECT_EQ(b.phi().values, a.phi().values);
  EXPECT_EQ(b.phi_prev().values, a.phi_prev().values);
  EXPECT_EQ(b.phi_target().values, a.phi_target().values);
  EXPECT_EQ(b.adam_theta().m, a.adam_theta().m);
  EXPECT_EQ(b.adam_phi().v, a.adam_phi().v);

  std::istringstream junk("not a checkpoint");
  DdqlAgent c(3, 2, small_hyper(), other);
  EXPECT_EQ(code_of([&] { c.load(junk, nullptr); }), ErrorCode::kCheckpoint);
}

TEST(Replay, CapacityEvictionAndDedup) {
  ReplayMemory m(3);
  for (std::uint64_t i = 0; i < 3; ++i) EXPECT_TRUE(m.push(make_exp(i, {0.0}, 0, 0, {0.0}, false)));
  EXPECT_FALSE(m.push(make_exp(1, {9.0}, 0, 0, {0.0}, false)));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_TRUE(m.push(make_exp(3, {0.0}, 0, 0, {0.0}, false)));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_FALSE(m.contains(0));
  EXPECT_EQ(m.at(0).id, 1u);
  EXPECT_EQ(m.at(2).id, 3u);
  const auto shard = m.take_shard();
  EXPECT_EQ(shard.size(), 4u);
  EXPECT_TRUE(m.take_shard().empty());
  ReplayMemory fresh(10);
  EXPECT_EQ(fresh.merge(shard), 4u);
  EXPECT_EQ(fresh.merge(shard), 0u);
  EXPECT_TRUE(fresh.take_shard().empty());  // merged entries are not re-broadcast
}

TEST(Replay, SamplingDistinctAndBounded) {
  ReplayMemory m(50);
  for (std::uint64_t i = 0; i < 20; ++i) m.push(make_exp(i, {0.0}, 0, 0, {0.0}, false));
  Rng rng(3);
  for (int rep = 0; rep < 100; ++rep) {
    const auto s = m.sample(20, rng);
    std::set<std::uint64_t> ids;
    for (const auto* e : s) ids.insert(e->id);
    EXPECT_EQ(ids.size(), 20u);
  }
  EXPECT_EQ(code_of([&] { m.sample(21, rng); }), ErrorCode::kBatch);
  EXPECT_EQ(code_of([] { ReplayMemory zero(0); }), ErrorCode::kConfig);
}

TEST(Aggregation, RotatesAggregatorAndMerges) {
  std::vector<ReplayMemory> mem(3, ReplayMemory(100));
  std::vector<ReplayMemory*> ptrs;
  for (auto& m : mem) ptrs.push_back(&m);
  std::vector<std::size_t> seq;
  for (std::uint64_t round = 0; round < 6; ++round) {
    for (std::uint32_t a = 0; a < 3; ++a) {
      mem[a].push(make_exp(experience_id(a, round), {double(a)}, 0, 0, {0.0}, false));
    }
    const auto rep = aggregate_and_distribute(ptrs, round);
    seq.push_back(rep.aggregator);
    EXPECT_EQ(rep.shards, 3u);
    EXPECT_EQ(rep.rejected, 0u);
    EXPECT_EQ(rep.merged, 6u);
  }
  EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2}));
  for (const auto& m : mem) EXPECT_EQ(m.size(), 18u);
}

TEST(Aggregation, SingleAgentMergesNothing) {
  ReplayMemory m(10);
  m.push(make_exp(1, {0.0}, 0, 0, {0.0}, false));
  ReplayMemory* ptrs[] = {&m};
  const auto rep = aggregate_and_distribute(ptrs, 4);
  EXPECT_EQ(rep.aggregator, 0u);
  EXPECT_EQ(rep.merged, 0u);
  EXPECT_EQ(m.size(), 1u);
}

TEST(Aggregation, TamperedShardRejected) {
  std::vector<ReplayMemory> mem(3, ReplayMemory(100));
  std::vector<ReplayMemory*> ptrs;
  for (auto& m : mem) ptrs.push_back(&m);
  for (std::uint32_t a = 0; a < 3; ++a) {
    mem[a].push(make_exp(experience_id(a, 0), {1.0}, 0, 0.5, {0.0}, false));
  }
  const auto rep = aggregate_and_distribute(ptrs, 0, [](MemoryDigest& d) {
    if (d.origin == 1) d.payload.back() ^= 0x01;
  });
  EXPECT_EQ(rep.rejected, 1u);
  EXPECT_EQ(rep.merged, 4u);
  EXPECT_FALSE(mem[0].contains(experience_id(1, 0)));
  EXPECT_FALSE(mem[2].contains(experience_id(1, 0)));
  EXPECT_TRUE(mem[1].contains(experience_id(0, 0)));
}

TEST(Digest, KnownVectorAndIntegrity) {
  const std::string abc = "abc";
  const auto d = sha256(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()));
  const Digest expected = {0xba, 0x78, 0x16, 0xbf, 0x8f, 0x01, 0xcf, 0xea, 0x41, 0x41, 0x40,
                           0xde, 0x5d, 0xae, 0x22, 0x23, 0xb0, 0x03, 0x61, 0xa3, 0x96, 0x17,
                           0x7a, 0x9c, 0xb4, 0x10, 0xff, 0x61, 0xf2, 0x00, 0x15, 0xad};
  EXPECT_EQ(d, expected);

  const auto xs = random_experiences(5, 3, 2, 61);
  MemoryDigest md = MemoryDigest::make(2, xs);
  EXPECT_TRUE(md.verify());
  EXPECT_EQ(deserialize_shard(md.payload), xs);
  md.payload[md.payload.size() / 2] ^= 0x80;
  EXPECT_FALSE(md.verify());
}
