#include "mecsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mecsim/binary_io.hpp"
#include "mecsim/error.hpp"

namespace mecsim::harness {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

ExperimentConfig with_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig c = cfg;
  c.seed = seed;
  return c;
}

agents::HyperParams dql_hyper(const ExperimentConfig& cfg) {
  agents::HyperParams h = cfg.learn.deep;
  h.double_q = cfg.learn.dql_double_q;
  return h;
}

agents::HyperParams ql_hyper(const ExperimentConfig& cfg) {
  agents::HyperParams h = cfg.learn.deep;
  h.psi = cfg.learn.ql_psi;
  h.zeta = cfg.learn.ql_zeta;
  return h;
}

Learners make_learners(const ExperimentConfig& cfg, PolicyKind kind) {
  Learners l;
  l.kind = kind;
  l.bucketizer.bins = cfg.learn.ql_bins;
  const auto n = static_cast<std::size_t>(cfg.env.network.num_nodes);
  const int actions = static_cast<int>(cfg.env.actions.action_count());
  const int dim = static_cast<int>(env::kStateDim);
  for (std::size_t i = 0; i < n; ++i) {
    Rng init = make_rng(cfg.seed, "init", i);
    switch (kind) {
      case PolicyKind::kQl: l.ql.emplace_back(static_cast<std::size_t>(actions)); break;
      case PolicyKind::kDql: l.dql.emplace_back(dim, actions, dql_hyper(cfg), init); break;
      case PolicyKind::kDdql: l.ddql.emplace_back(dim, actions, cfg.learn.deep, init); break;
      default: break;
    }
  }
  return l;
}

std::vector<Rng> agent_streams(std::uint64_t seed, std::string_view name, std::size_t n) {
  std::vector<Rng> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(make_rng(seed, name, i));
  return out;
}

void save_qtable(std::ostream& out, const agents::QTable& qt) {
  std::vector<std::uint8_t> buf = {'M', 'E', 'C', 'S', 'Q', 'T', '0', '1'};
  io::put_le<std::uint64_t>(buf, qt.num_actions());
  const auto keys = qt.states();
  io::put_le<std::uint64_t>(buf, keys.size());
  for (auto k : keys) {
    io::put_le<std::uint64_t>(buf, k);
    for (double q : qt.row(k)) io::put_le<double>(buf, q);
  }
  io::write_all(out, buf);
}

void write_checkpoints(const std::filesystem::path& dir, const Learners& l, int episodes,
                       double epsilon) {
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto path = dir / ("agent_" + std::to_string(i) + ".ckpt");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string());
    std::ostringstream meta;
    meta << "policy=" << baselines::to_string(l.kind) << ";episode=" << episodes
         << ";epsilon=" << fmt(epsilon);
    if (l.kind == PolicyKind::kQl) {
      save_qtable(out, l.ql[i]);
    } else if (l.kind == PolicyKind::kDql) {
      meta << ";memory=" << l.dql[i].memory().size() << "/" << l.dql[i].memory().capacity();
      l.dql[i].save(out, meta.str());
    } else {
      meta << ";memory=" << l.ddql[i].memory().size() << "/" << l.ddql[i].memory().capacity();
      l.ddql[i].save(out, meta.str());
    }
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "checkpoint write failed: " + path.string());
  }
}

double nearest_rank_quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

}  // namespace

env::RewardParams calibrate_reward(const ExperimentConfig& cfg) {
  env::RewardParams r = cfg.env.reward;
  env::Environment e(cfg.env);
  std::vector<double> costs;
  std::vector<Rng> rngs = agent_streams(cfg.seed, "calibration-policy", e.config().network.num_nodes);
  for (int ep = 0; ep < cfg.calibration.episodes; ++ep) {
    e.reset(substream_seed(cfg.seed, "calibration", static_cast<std::uint64_t>(ep)));
    while (!e.done()) {
      const auto joint = baselines::joint_action(PolicyKind::kFlc, e, rngs, cfg.baselines);
      const auto res = e.step(joint);
      for (const auto& a : res.outcome.agents) {
        if (a.active) costs.push_back(a.cost.v);
      }
    }
  }
  const double c = nearest_rank_quantile(std::move(costs), cfg.calibration.quantile);
  r.c_const = c > 0.0 ? c : 1.0;
  r.penalty = -r.c_const;
  return r;
}

std::uint64_t StateBucketizer::bucket(std::span<const double> x) const {
  if (x.size() != env::kStateDim) throw Error(ErrorCode::kShape, "bucketizer expects an encoded state");
  static constexpr std::size_t kFeatures[] = {0, 1, 14, 12};  // gain, data, ck, category
  std::uint64_t key = 0;
  for (std::size_t f : kFeatures) {
    const double u = std::clamp((x[f] + 1.0) / 2.0, 0.0, 1.0);
    const auto b = std::min<std::uint64_t>(static_cast<std::uint64_t>(u * bins),
                                           static_cast<std::uint64_t>(bins - 1));
    key = key * static_cast<std::uint64_t>(bins) + b;
  }
  return key;
}

std::size_t Learners::size() const {
  switch (kind) {
    case PolicyKind::kQl: return ql.size();
    case PolicyKind::kDql: return dql.size();
    case PolicyKind::kDdql: return ddql.size();
    default: return 0;
  }
}

std::vector<env::ActionVector> greedy_joint(const Learners& l, const env::Environment& e) {
  if (l.size() == 0) throw Error(ErrorCode::kConfig, "no trained learners");
  const auto& grid = e.config().actions;
  std::vector<env::ActionVector> joint(e.num_agents());
  std::vector<double> x(env::kStateDim);
  for (std::size_t i = 0; i < e.num_agents(); ++i) {
    if (!e.active(i)) continue;
    e.encode_into(e.observe(i), x);
    const std::size_t k = i % l.size();
    std::size_t a = 0;
    switch (l.kind) {
      case PolicyKind::kQl: a = agents::argmax(l.ql[k].row(l.bucketizer.bucket(x))); break;
      case PolicyKind::kDql: a = l.dql[k].greedy(x); break;
      case PolicyKind::kDdql: a = l.ddql[k].greedy(x); break;
      default: throw Error(ErrorCode::kConfig, "not a learning policy");
    }
    if (a >= grid.action_count()) {
      throw Error(ErrorCode::kAction, "learner action grid differs from the environment");
    }
    joint[i] = grid.decode(a);
  }
  return joint;
}

std::string metrics_header() {
  return std::string("# schema=") + kMetricsSchema +
         "\nepisode,loss_mean,loss_uncertainty,agent_loss,cum_reward,total_reward,"
         "sum_cost,violations,handovers,hash_rejections,epsilon\n";
}

std::string metrics_row(const EpisodeMetrics& m) {
  std::string agent_loss;
  for (std::size_t i = 0; i < m.agent_loss.size(); ++i) {
    if (i) agent_loss += ';';
    agent_loss += fmt(m.agent_loss[i]);
  }
  std::ostringstream os;
  os << m.episode << ',' << fmt(m.loss_mean) << ',' << fmt(m.loss_uncertainty) << ','
     << agent_loss << ',' << fmt(m.cum_reward) << ',' << fmt(m.total_reward) << ','
     << fmt(m.sum_cost) << ',' << m.violations << ',' << m.handovers << ','
     << m.hash_rejections << ',' << fmt(m.epsilon) << '\n';
  return os.str();
}

RunResult run_experiment(const ExperimentConfig& cfg_in, PolicyKind policy,
                         const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg = cfg_in;
  if (cfg.calibration.enabled) cfg.env.reward = calibrate_reward(cfg);
  cfg.validate();

  RunResult result;
  result.policy = policy;
  result.seed = cfg.seed;
  result.reward = cfg.env.reward;

  const int episodes = opt.episodes >= 0 ? opt.episodes : cfg.learn.deep.eta;
  agents::HyperParams sched = cfg.learn.deep;
  sched.eta = std::max(1, episodes);
  const bool learning = baselines::is_learning(policy);
  const bool deep = policy == PolicyKind::kDql || policy == PolicyKind::kDdql;

  env::Environment e(cfg.env);
  const auto n = static_cast<std::size_t>(cfg.env.network.num_nodes);
  const auto& grid = cfg.env.actions;
  Learners L = make_learners(cfg, policy);
  const agents::HyperParams qh = ql_hyper(cfg);
  std::vector<Rng> act_rng = agent_streams(cfg.seed, "policy", n);
  std::vector<Rng> train_rng = agent_streams(cfg.seed, "train", n);
  std::vector<std::uint64_t> seq(n, 0);

  std::ofstream csv;
  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    csv.open(opt.out_dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw Error(ErrorCode::kIo, "cannot write " + (opt.out_dir / "metrics.csv").string());
    csv << metrics_header();
    csv.flush();
  }

  std::uint64_t global_step = 0;
  double epsilon = 0.0;
  std::vector<double> x(env::kStateDim);
  std::vector<std::vector<double>> encoded(n, std::vector<double>(env::kStateDim));

  for (int ep = 0; ep < episodes; ++ep) {
    epsilon = learning ? agents::epsilon_at(sched, ep) : 0.0;
    const double scale = sched.eps_start > 0.0
                             ? sched.uncertainty_scale * epsilon / sched.eps_start
                             : 0.0;
    e.set_training_progress(learning ? cfg.learn.deep.psi : 0.0, epsilon);
    e.reset(substream_seed(cfg.seed, "env", static_cast<std::uint64_t>(ep)));

    EpisodeMetrics m;
    m.episode = ep;
    m.epsilon = epsilon;
    std::vector<double> weight(n, 1.0), disc(n, 0.0), loss_sum(n, 0.0), unc_sum(n, 0.0);
    std::vector<int> loss_count(n, 0);

    while (!e.done()) {
      std::vector<env::ActionVector> joint;
      if (learning) {
        joint.assign(n, env::ActionVector{});
        for (std::size_t i = 0; i < n; ++i) {
          if (!e.active(i)) continue;
          e.encode_into(e.observe(i), encoded[i]);
          std::size_t a = 0;
          switch (policy) {
            case PolicyKind::kQl:
              a = agents::epsilon_greedy(L.ql[i].row(L.bucketizer.bucket(encoded[i])), epsilon,
                                         act_rng[i]);
              break;
            case PolicyKind::kDql: a = L.dql[i].act(encoded[i], epsilon, act_rng[i]); break;
            default: a = L.ddql[i].act(encoded[i], epsilon, scale, act_rng[i]); break;
          }
          joint[i] = grid.decode(a);
        }
      } else {
        joint = baselines::joint_action(policy, e, act_rng, cfg.baselines);
      }

      const env::StepResult res = e.step(joint);
      for (std::size_t k = 0; k < res.transitions.size(); ++k) {
        const auto& tr = res.transitions[k];
        const auto i = static_cast<std::size_t>(res.agent_index[k]);
        disc[i] += weight[i] * tr.r;
        weight[i] *= cfg.env.reward.zeta;
        m.total_reward += tr.r;
        if (!learning) continue;
        e.encode_into(tr.s_next, x);
        const auto a = static_cast<int>(grid.encode(tr.a));
        if (policy == PolicyKind::kQl) {
          agents::q_update_tabular(
              L.ql[i],
              {L.bucketizer.bucket(encoded[i]), static_cast<std::size_t>(a), tr.r,
               L.bucketizer.bucket(x), tr.done},
              qh);
          continue;
        }
        agents::Experience ex{agents::experience_id(static_cast<std::uint32_t>(i), seq[i]++),
                              encoded[i], a, tr.r, x, tr.done};
        if (policy == PolicyKind::kDql) {
          L.dql[i].remember(std::move(ex));
        } else {
          L.ddql[i].remember(std::move(ex));
        }
      }
      m.sum_cost += res.outcome.sum_cost;
      m.violations += res.outcome.violations;
      m.handovers += res.outcome.handovers;

      ++global_step;
      if (deep && global_step % static_cast<std::uint64_t>(sched.train_every) == 0) {
        for (std::size_t i = 0; i < n; ++i) {
          const agents::LossRecord rec = policy == PolicyKind::kDql
                                             ? L.dql[i].train_step(train_rng[i])
                                             : L.ddql[i].train_step(train_rng[i]);
          if (!rec.updated) continue;
          loss_sum[i] += rec.loss_mean;
          unc_sum[i] += rec.loss_uncertainty;
          ++loss_count[i];
        }
      }
    }

    if (policy == PolicyKind::kDdql && cfg.learn.share_memory) {
      std::vector<agents::ReplayMemory*> mems;
      for (auto& a : L.ddql) mems.push_back(&a.memory());
      m.hash_rejections = static_cast<int>(
          agents::aggregate_and_distribute(mems, static_cast<std::uint64_t>(ep)).rejected);
    } else if (policy == PolicyKind::kDdql) {
      for (auto& a : L.ddql) a.memory().take_shard();
    } else if (policy == PolicyKind::kDql) {
      for (auto& a : L.dql) a.memory().take_shard();
    }

    int updated_agents = 0;
    m.agent_loss.assign(deep ? n : 0, 0.0);
    for (std::size_t i = 0; deep && i < n; ++i) {
      if (loss_count[i] == 0) continue;
      m.agent_loss[i] = loss_sum[i] / loss_count[i];
      m.loss_mean += m.agent_loss[i];
      m.loss_uncertainty += unc_sum[i] / loss_count[i];
      ++updated_agents;
    }
    if (updated_agents > 0) {
      m.loss_mean /= updated_agents;
      m.loss_uncertainty /= updated_agents;
    }
    m.cum_reward = std::accumulate(disc.begin(), disc.end(), 0.0) / static_cast<double>(n);
    if (csv.is_open()) {
      csv << metrics_row(m);
      csv.flush();
      if (!csv) throw Error(ErrorCode::kIo, "metrics write failed");
    }
    result.episodes.push_back(std::move(m));
  }

  if (learning && !opt.out_dir.empty() && opt.save_checkpoint) {
    write_checkpoints(opt.out_dir, L, episodes, epsilon);
  }
  result.learners = std::move(L);
  result.eval = evaluate_policy(cfg, policy, learning ? &result.learners : nullptr);
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

EvalResult evaluate_policy(const ExperimentConfig& cfg, PolicyKind policy,
                           const Learners* learners) {
  const bool learning = baselines::is_learning(policy);
  if (learning && (!learners || learners->size() == 0)) {
    throw Error(ErrorCode::kConfig, std::string("evaluating ") + baselines::to_string(policy) +
                                        " needs trained learners");
  }
  env::Environment e(cfg.env);
  e.set_training_progress(learning ? cfg.learn.deep.psi : 0.0,
                          learning ? cfg.learn.deep.eps_end : 0.0);
  std::vector<Rng> rngs = agent_streams(cfg.seed, "eval-policy", e.config().network.num_nodes);
  EvalResult r;
  double steps = 0.0;
  double agent_steps = 0.0;
  double violations = 0.0;
  for (int k = 0; k < cfg.eval_episodes; ++k) {
    e.reset(substream_seed(cfg.seed, "eval", static_cast<std::uint64_t>(k)));
    while (!e.done()) {
      const auto joint = learning ? greedy_joint(*learners, e)
                                  : baselines::joint_action(policy, e, rngs, cfg.baselines);
      const auto res = e.step(joint);
      r.mean_sum_cost += res.outcome.sum_cost;
      violations += res.outcome.violations;
      agent_steps += static_cast<double>(res.transitions.size());
      steps += 1.0;
    }
  }
  r.episodes = cfg.eval_episodes;
  r.mean_step_cost = steps > 0.0 ? r.mean_sum_cost / steps : 0.0;
  r.mean_sum_cost /= cfg.eval_episodes;
  r.violation_rate = agent_steps > 0.0 ? violations / agent_steps : 0.0;
  return r;
}

std::string summary_header() {
  return "policy,seed,episodes,eval_episodes,eval_sum_cost,eval_step_cost,"
         "eval_violation_rate,reward_c,wall_seconds\n";
}

std::string summary_row(const RunResult& r) {
  std::ostringstream os;
  os << baselines::to_string(r.policy) << ',' << r.seed << ',' << r.episodes.size() << ','
     << r.eval.episodes << ',' << fmt(r.eval.mean_sum_cost) << ',' << fmt(r.eval.mean_step_cost)
     << ',' << fmt(r.eval.violation_rate) << ',' << fmt(r.reward.c_const) << ','
     << fmt(r.wall_seconds) << '\n';
  return os.str();
}

std::vector<CompareRow> compare_costs(const std::map<PolicyKind, double>& costs) {
  const auto it = costs.find(PolicyKind::kDdql);
  if (it == costs.end()) throw Error(ErrorCode::kConfig, "comparison needs a ddql cost");
  std::vector<CompareRow> rows;
  for (const auto& [p, c] : costs) {
    CompareRow row;
    row.policy = p;
    row.mean_cost = c;
    row.reduction = c != 0.0 ? (c - it->second) / c : 0.0;
    rows.push_back(row);
  }
  return rows;
}

std::string compare_csv(const std::vector<CompareRow>& rows) {
  std::string out = "policy,mean_cost,ddql_reduction\n";
  for (const auto& r : rows) {
    out += std::string(baselines::to_string(r.policy)) + ',' + fmt(r.mean_cost) + ',' +
           fmt(r.reduction) + '\n';
  }
  return out;
}

TrainedSet train_all(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                     int seeds) {
  TrainedSet out;
  for (PolicyKind p : policies) {
    if (!baselines::is_learning(p)) continue;
    for (int s = 0; s < seeds; ++s) {
      RunResult r = run_experiment(with_seed(cfg, cfg.seed + static_cast<std::uint64_t>(s)), p);
      out.emplace(std::make_pair(p, s), std::move(r.learners));
    }
  }
  return out;
}

bool non_decreasing(const std::vector<double>& v, double tol_fraction) {
  if (v.size() < 2) return true;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double slack = tol_fraction * (*hi - *lo);
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[i - 1] - slack) return false;
  }
  return true;
}

namespace {

template <typename Point, typename Apply>
SweepTable sweep(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                 const std::vector<Point>& grid, int seeds, const TrainedSet* trained,
                 const std::string& axis, Apply apply) {
  TrainedSet local;
  if (!trained) {
    local = train_all(cfg, policies, seeds);
    trained = &local;
  }
  SweepTable t;
  t.axis = axis;
  std::map<PolicyKind, std::vector<double>> series;
  for (PolicyKind p : policies) {
    for (const Point& pt : grid) {
      double sum = 0.0;
      for (int s = 0; s < seeds; ++s) {
        ExperimentConfig c = with_seed(cfg, cfg.seed + static_cast<std::uint64_t>(s));
        apply(c, pt);
        c.validate();
        const Learners* l = nullptr;
        if (baselines::is_learning(p)) {
          const auto it = trained->find({p, s});
          if (it == trained->end()) {
            throw Error(ErrorCode::kConfig, std::string("no trained learners for ") +
                                                baselines::to_string(p));
          }
          l = &it->second;
        }
        sum += evaluate_policy(c, p, l).mean_sum_cost;
      }
      const double mean = sum / seeds;
      t.rows.push_back({p, static_cast<double>(pt), mean, seeds});
      series[p].push_back(mean);
    }
  }
  for (const auto& [p, v] : series) t.monotone[p] = non_decreasing(v, 0.02);
  if (series.count(PolicyKind::kFoc) && series.count(PolicyKind::kFlc)) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (series[PolicyKind::kFoc][k] > series[PolicyKind::kFlc][k]) {
        t.crossover = static_cast<double>(grid[k]);
        break;
      }
    }
  }
  return t;
}

}  // namespace

std::string SweepTable::to_csv() const {
  std::string out = "policy," + axis + ",mean_cost,seeds,monotone\n";
  for (const auto& r : rows) {
    const auto it = monotone.find(r.policy);
    out += std::string(baselines::to_string(r.policy)) + ',' + fmt(r.point) + ',' +
           fmt(r.mean_cost) + ',' + std::to_string(r.seeds) + ',' +
           (it != monotone.end() && it->second ? "true" : "false") + '\n';
  }
  return out;
}

SweepTable sweep_data_size(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                           const std::vector<double>& grid, int seeds,
                           const TrainedSet* trained) {
  for (double d : grid) {
    if (!(d >= cfg.env.task.data_min && d <= cfg.env.task.data_max)) {
      throw Error(ErrorCode::kConfig, "sweep data size " + fmt(d) + " outside task.data range");
    }
  }
  return sweep(cfg, policies, grid, seeds, trained, "data_size",
               [](ExperimentConfig& c, double d) { c.env.task.fixed_data = d; });
}

SweepTable sweep_mec_count(const ExperimentConfig& cfg, const std::vector<PolicyKind>& policies,
                           const std::vector<int>& grid, int seeds, const TrainedSet* trained) {
  const double aerial_share = static_cast<double>(cfg.env.network.num_aerial) /
                              static_cast<double>(cfg.env.network.num_mecs);
  for (int m : grid) {
    if (m < 1) throw Error(ErrorCode::kConfig, "MEC counts must be >= 1");
  }
  SweepTable t = sweep(cfg, policies, grid, seeds, trained, "mec_count",
                       [aerial_share](ExperimentConfig& c, int m) {
                         c.env.network.num_mecs = m;
                         c.env.network.num_aerial =
                             static_cast<int>(std::lround(aerial_share * m));
                       });
  t.crossover.reset();
  std::map<double, double> foc, flc;
  for (const auto& r : t.rows) {
    if (r.policy == PolicyKind::kFoc) foc[r.point] = r.mean_cost;
    if (r.policy == PolicyKind::kFlc) flc[r.point] = r.mean_cost;
  }
  for (const auto& [pt, c] : foc) {
    if (flc.count(pt) && c > flc[pt]) {
      t.crossover = pt;
      break;
    }
  }
  return t;
}

SmallInstanceReport verify_small_instance(const env::Environment& e,
                                          const std::map<PolicyKind, const Learners*>& learned,
                                          const baselines::BaselineParams& bp,
                                          std::uint64_t seed,
                                          const SmallInstanceLimits& lim) {
  const auto& grid = e.config().actions;
  const std::size_t n = e.num_agents();
  const std::size_t m = e.num_mecs();

  // Per-agent candidates: local grid actions, and offloading grid actions
  // aimed at every MEC, so baselines that pick a non-associated MEC stay
  // inside the enumerated set.
  std::vector<env::ActionVector> cand;
  for (std::size_t k = 0; k < grid.action_count(); ++k) {
    env::ActionVector a = grid.decode(k);
    if (a.gamma == 0) {
      cand.push_back(a);
      continue;
    }
    for (std::size_t j = 0; j < m; ++j) {
      a.target_mec = static_cast<int>(j);
      cand.push_back(a);
    }
  }
  double joint_points = 1.0;
  for (std::size_t i = 0; i < n; ++i) joint_points *= static_cast<double>(cand.size());

  SmallInstanceReport rep;
  rep.agents = n;
  rep.mecs = m;
  rep.joint_points = static_cast<std::size_t>(std::min(joint_points, 1e18));
  if (n > lim.max_agents || m > lim.max_mecs ||
      joint_points > static_cast<double>(lim.max_joint_points)) {
    std::ostringstream os;
    os << "instance too large for exhaustive search: " << n << " agents, " << m << " MECs, "
       << fmt(joint_points) << " joint points (limits " << lim.max_agents << ", "
       << lim.max_mecs << ", " << lim.max_joint_points << ")";
    throw Error(ErrorCode::kInstanceTooLarge, os.str());
  }

  std::vector<std::size_t> idx(n, 0);
  std::vector<env::ActionVector> joint(n);
  rep.optimum = INFINITY;
  double total = 0.0;
  std::size_t count = 0;
  while (true) {
    for (std::size_t i = 0; i < n; ++i) joint[i] = cand[idx[i]];
    const double c = e.evaluate(joint).sum_cost;
    rep.optimum = std::min(rep.optimum, c);
    total += c;
    ++count;
    std::size_t i = 0;
    while (i < n && ++idx[i] == cand.size()) idx[i++] = 0;
    if (i == n) break;
  }

  // Each task picks its own cheapest candidate while the others stay local.
  std::vector<env::ActionVector> greedy(n, baselines::flc_policy(grid));
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<env::ActionVector> probe(n, baselines::flc_policy(grid));
    double best = INFINITY;
    for (const auto& a : cand) {
      probe[i] = a;
      const double c = e.evaluate(probe).agents[i].cost.v;
      if (c < best) {
        best = c;
        greedy[i] = a;
      }
    }
  }
  rep.greedy_per_task = e.evaluate(greedy).sum_cost;
  rep.random_expected_gap = total / static_cast<double>(count) - rep.optimum;

  std::vector<Rng> rngs = agent_streams(seed, "verify-policy", n);
  for (PolicyKind p : {PolicyKind::kFlc, PolicyKind::kFoc, PolicyKind::kRodrs,
                       PolicyKind::kRosrs}) {
    rep.gaps[p] = e.evaluate(baselines::joint_action(p, e, rngs, bp)).sum_cost - rep.optimum;
  }
  for (const auto& [p, l] : learned) {
    if (l) rep.gaps[p] = e.evaluate(greedy_joint(*l, e)).sum_cost - rep.optimum;
  }
  return rep;
}

}  // namespace mecsim::harness
