// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset; the exit status is non-zero when any fails.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "invariants.hpp"
#include "mecsim/error.hpp"
#include "mecsim/harness.hpp"
#include "oracles.hpp"

using namespace mecsim;
using namespace mecsim::harness;

namespace {

constexpr int kSeeds = 5;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

ExperimentConfig desk() {
  return load_config(std::string(MECSIM_CONFIG_DIR) + "/desk.cfg");
}

ExperimentConfig seeded(ExperimentConfig c, int s) {
  c.seed += static_cast<std::uint64_t>(s);
  return c;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Training runs on desk.cfg shared by the first four criteria.
struct DeskRuns {
  std::map<PolicyKind, std::vector<RunResult>> learned;
  std::map<PolicyKind, std::vector<double>> eval_cost;
  TrainedSet trained;
};

DeskRuns& desk_runs() {
  static DeskRuns runs = [] {
    DeskRuns r;
    const ExperimentConfig base = desk();
    for (PolicyKind p : {PolicyKind::kDdql, PolicyKind::kDql, PolicyKind::kQl}) {
      for (int s = 0; s < kSeeds; ++s) {
        RunResult res = run_experiment(seeded(base, s), p);
        std::printf("  trained %s seed %d: eval %.4f, %.1f s\n", baselines::to_string(p), s,
                    res.eval.mean_sum_cost, res.wall_seconds);
        std::fflush(stdout);
        r.eval_cost[p].push_back(res.eval.mean_sum_cost);
        r.trained.emplace(std::make_pair(p, s), std::move(res.learners));
        res.learners = {};
        r.learned[p].push_back(std::move(res));
      }
    }
    for (PolicyKind p : {PolicyKind::kFlc, PolicyKind::kFoc, PolicyKind::kRodrs, PolicyKind::kRosrs}) {
      for (int s = 0; s < kSeeds; ++s) {
        r.eval_cost[p].push_back(evaluate_policy(seeded(base, s), p, nullptr).mean_sum_cost);
      }
    }
    return r;
  }();
  return runs;
}

Verdict cost_reduction() {
  auto& r = desk_runs();
  const double ddql = mean(r.eval_cost[PolicyKind::kDdql]);
  std::ostringstream os;
  bool strict = true;
  double best_static = 1e300;
  for (const auto& [p, costs] : r.eval_cost) {
    const double c = mean(costs);
    os << baselines::to_string(p) << "=" << fmt("%.2f", c) << " ";
    if (p == PolicyKind::kDdql) continue;
    strict = strict && ddql < c;
    if (!baselines::is_learning(p)) best_static = std::min(best_static, c);
  }
  const double reduction = (best_static - ddql) / best_static;
  double slowest = 0.0;
  for (const auto& run : r.learned[PolicyKind::kDdql]) slowest = std::max(slowest, run.wall_seconds);
  os << "| reduction vs best static " << fmt("%.2f%%", 100 * reduction) << ", slowest ddql seed "
     << fmt("%.0f s", slowest);
  return {strict && reduction >= 0.15 && slowest <= 600.0, os.str()};
}

// Trailing moving average with a window of up to 50 episodes.
std::vector<double> moving_average(const std::vector<double>& v, std::size_t w) {
  std::vector<double> out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sum += v[i];
    if (i >= w) sum -= v[i - w];
    out[i] = sum / static_cast<double>(std::min(i + 1, w));
  }
  return out;
}

Verdict reward_convergence() {
  auto& r = desk_runs();
  std::ostringstream os;
  bool ok = true;
  for (const auto& run : r.learned[PolicyKind::kDdql]) {
    std::vector<double> rew;
    for (const auto& m : run.episodes) rew.push_back(m.cum_reward);
    const auto ma = moving_average(rew, 50);
    const std::size_t third = ma.size() / 3;
    const double first = mean({ma.begin(), ma.begin() + static_cast<long>(third)});
    const double last = mean({ma.end() - static_cast<long>(third), ma.end()});
    ok = ok && last >= first;
    os << "seed " << run.seed << ": " << fmt("%.3f", first) << " -> " << fmt("%.3f", last) << "; ";
  }
  return {ok, os.str()};
}

Verdict loss_decay() {
  auto& r = desk_runs();
  std::ostringstream os;
  bool ok = true;
  for (const auto& run : r.learned[PolicyKind::kDdql]) {
    std::vector<double> loss;
    for (const auto& m : run.episodes) loss.push_back(m.loss_mean);
    const std::size_t tenth = std::max<std::size_t>(1, loss.size() / 10);
    const double first = mean({loss.begin(), loss.begin() + static_cast<long>(tenth)});
    const double last = mean({loss.end() - static_cast<long>(tenth), loss.end()});
    const double ratio = first > 0.0 ? last / first : 1e300;
    ok = ok && ratio < 0.3;
    os << "seed " << run.seed << ": ratio " << fmt("%.3f", ratio) << "; ";
  }
  return {ok, os.str()};
}

Verdict data_monotone() {
  auto& r = desk_runs();
  const std::vector<PolicyKind> all(std::begin(baselines::kAllPolicies),
                                    std::end(baselines::kAllPolicies));
  const auto table = sweep_data_size(desk(), all, {10, 25, 40, 60, 80}, kSeeds, &r.trained);
  std::ostringstream os;
  bool ok = true;
  for (PolicyKind p : all) {
    const bool mono = table.monotone.at(p);
    ok = ok && mono;
    os << baselines::to_string(p) << (mono ? " ok" : " NOT monotone") << "; ";
  }
  return {ok, os.str()};
}

Verdict foc_crossover() {
  ExperimentConfig c = desk();
  c.env.mec.compute_scale = 0.25;
  c.env.network.num_nodes = 20;
  std::vector<double> foc, flc;
  for (int s = 0; s < kSeeds; ++s) {
    foc.push_back(evaluate_policy(seeded(c, s), PolicyKind::kFoc, nullptr).mean_sum_cost);
    flc.push_back(evaluate_policy(seeded(c, s), PolicyKind::kFlc, nullptr).mean_sum_cost);
  }
  return {mean(foc) > mean(flc),
          "foc " + fmt("%.3f", mean(foc)) + " vs flc " + fmt("%.3f", mean(flc))};
}

Verdict tabular_oracle() {
  const mecsim::testing::TinyMdp mdp;
  const auto a = mecsim::testing::tabular_q_learning(mdp, 0.1, 0.9, 200000, 1);
  const auto b = mecsim::testing::tabular_q_learning(mdp, 0.1, 0.9, 200000, 1);
  const bool same = a.q == b.q;
  return {a.max_error < 1e-2 && same,
          "max error " + fmt("%.2e", a.max_error) + (same ? ", deterministic" : ", NOT deterministic")};
}

Verdict gradients() {
  using mecsim::testing::LossStream;
  std::ostringstream os;
  bool ok = true;
  for (LossStream s : {LossStream::kMean, LossStream::kUncertainty}) {
    double worst = 0.0;
    long checked = 0, skipped = 0;
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto d = mecsim::testing::gradient_check_draw(1000 + k, s);
      worst = std::max(worst, d.max_rel_error);
      checked += d.checked;
      skipped += d.skipped;
    }
    ok = ok && worst < 1e-4 && checked > 0;
    os << (s == LossStream::kMean ? "mean" : "uncertainty") << " loss max rel "
       << fmt("%.2e", worst) << " (" << checked << " checked, " << skipped << " skipped); ";
  }
  return {ok, os.str()};
}

Verdict overestimation() {
  int wins = 0;
  std::vector<double> dql, ddql;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = mecsim::testing::noisy_bandit(s);
    dql.push_back(r.dql_max_q);
    ddql.push_back(r.ddql_max_q);
    wins += r.dql_max_q > r.ddql_max_q ? 1 : 0;
  }
  const double p = mecsim::testing::sign_test_p(wins, 20);
  return {mean(dql) >= mean(ddql) && p < 0.05,
          "dql mean max-Q " + fmt("%.4f", mean(dql)) + ", ddql " + fmt("%.4f", mean(ddql)) +
              ", wins " + std::to_string(wins) + "/20, p=" + fmt("%.2e", p)};
}

Verdict invariants() {
  std::vector<mecsim::testing::PropertyResult> all;
  for (auto&& suite : {mecsim::testing::geo_channel_properties(1000, 11),
                       mecsim::testing::task_cost_properties(1000, 12),
                       mecsim::testing::env_properties(1000, 13)}) {
    all.insert(all.end(), suite.begin(), suite.end());
  }
  std::ostringstream os;
  bool ok = true;
  for (const auto& r : all) {
    if (r.ok()) continue;
    ok = false;
    os << r.name << " failed " << r.failures << "/" << r.cases << " (" << r.counterexample << "); ";
  }
  if (ok) os << all.size() << " properties x 1000 cases";
  return {ok, os.str()};
}

Verdict small_instance() {
  const ExperimentConfig c = load_config(std::string(MECSIM_CONFIG_DIR) + "/verify.cfg");
  const RunResult run = run_experiment(c, PolicyKind::kDdql);
  env::Environment e(c.env);
  e.set_training_progress(c.learn.deep.psi, c.learn.deep.eps_end);
  int better = 0;
  bool bounded = true;
  std::ostringstream os;
  for (std::uint64_t k = 0; k < 10; ++k) {
    e.reset(substream_seed(c.seed, "verify", k));
    const auto rep = verify_small_instance(e, {{PolicyKind::kDdql, &run.learners}}, c.baselines, k);
    for (const auto& [p, gap] : rep.gaps) bounded = bounded && gap >= -1e-9;
    const double g = rep.gaps.at(PolicyKind::kDdql);
    better += g < rep.random_expected_gap ? 1 : 0;
    os << fmt("%.3f", g) << "/" << fmt("%.3f", rep.random_expected_gap) << " ";
  }
  return {bounded && better >= 8, "ddql/random gaps " + os.str() + "| ddql better on " +
                                      std::to_string(better) + "/10" +
                                      (bounded ? "" : ", optimum NOT a lower bound")};
}

Verdict reproducible() {
  ExperimentConfig c = desk();
  c.learn.deep.eta = 20;
  const auto dir = std::filesystem::temp_directory_path() / "mecsim_acceptance_repro";
  std::filesystem::remove_all(dir);
  RunOptions a, b;
  a.out_dir = dir / "a";
  b.out_dir = dir / "b";
  run_experiment(c, PolicyKind::kDdql, a);
  run_experiment(c, PolicyKind::kDdql, b);
  const auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  };
  const std::string x = slurp(a.out_dir / "metrics.csv");
  const std::string y = slurp(b.out_dir / "metrics.csv");
  std::filesystem::remove_all(dir);
  return {!x.empty() && x == y, std::to_string(x.size()) + " bytes, " + (x == y ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"cost reduction vs every policy", cost_reduction},
      {"reward convergence", reward_convergence},
      {"loss decay", loss_decay},
      {"data-size monotonicity", data_monotone},
      {"FOC above FLC under scarce compute", foc_crossover},
      {"tabular oracle equivalence", tabular_oracle},
      {"gradient correctness", gradients},
      {"overestimation ordering", overestimation},
      {"model invariant suite", invariants},
      {"small-instance optimality gap", small_instance},
      {"reproducibility", reproducible},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += v.pass ? 0 : 1;
    std::printf("%s criterion %d: %s | %s\n", v.pass ? "PASS" : "FAIL", id,
                criteria[k].first.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
