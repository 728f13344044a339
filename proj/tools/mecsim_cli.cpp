// Command-line front end: single runs, policy comparison, sweeps and the
// small-instance verifier. Exit codes: 0 success, 2 configuration error,
// 3 runtime error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mecsim/error.hpp"
#include "mecsim/harness.hpp"

namespace fs = std::filesystem;
using namespace mecsim;
using harness::PolicyKind;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::vector<PolicyKind> parse_policies(const std::vector<std::string>& names) {
  std::vector<PolicyKind> out;
  for (const auto& n : names) {
    const auto p = baselines::parse_policy(n);
    if (!p) throw Error(ErrorCode::kConfig, "--policies: unknown policy '" + n + "'");
    out.push_back(*p);
  }
  if (out.empty()) out.assign(std::begin(baselines::kAllPolicies), std::end(baselines::kAllPolicies));
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
}

harness::ExperimentConfig load(const std::string& path, std::uint64_t seed, bool seed_set) {
  harness::ExperimentConfig cfg = path.empty() ? harness::ExperimentConfig{}
                                               : harness::load_config(path);
  if (seed_set) cfg.seed = seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-MEC offloading simulator and learner harness"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string policy_name = "ddql";
  std::uint64_t seed = 0;
  int episodes = -1;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "Experiment configuration file");
  app.add_option("--policy", policy_name, "flc|foc|rodrs|rosrs|ql|dql|ddql")
      ->check(CLI::IsMember({"flc", "foc", "rodrs", "rosrs", "ql", "dql", "ddql"}));
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--episodes", episodes, "Training episodes (overrides ddql.eta)");
  app.add_option("--out", out_dir, "Output directory");

  int seeds = 1;
  std::vector<std::string> policy_names;

  auto* compare = app.add_subcommand("compare", "Run every policy and report DDQL reductions");
  compare->add_option("--seeds", seeds, "Seeds per policy (master + index)")->check(CLI::PositiveNumber);
  compare->add_option("--policies", policy_names, "Subset of policies (default all)");

  std::vector<double> data_grid = {10, 25, 40, 60, 80};
  auto* sweep_data = app.add_subcommand("sweep-data", "Sum cost against task data size");
  sweep_data->add_option("--grid", data_grid, "Data sizes in raw task units");
  sweep_data->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  sweep_data->add_option("--policies", policy_names);

  std::vector<int> mec_grid = {1, 2, 4, 6, 8};
  auto* sweep_mec = app.add_subcommand("sweep-mec", "Sum cost against MEC count");
  sweep_mec->add_option("--grid", mec_grid, "MEC counts");
  sweep_mec->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  sweep_mec->add_option("--policies", policy_names);

  int instances = 10;
  auto* verify = app.add_subcommand("verify", "Exhaustive one-step optimum on tiny instances");
  verify->add_option("--instances", instances, "Seeded instances to check")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    harness::ExperimentConfig cfg = load(config_path, seed, seed_opt->count() > 0);
    if (episodes >= 0) cfg.learn.deep.eta = std::max(1, episodes);
    const fs::path out(out_dir);

    if (*compare) {
      const auto policies = parse_policies(policy_names);
      std::map<PolicyKind, double> costs;
      std::string summary = harness::summary_header();
      for (PolicyKind p : policies) {
        double sum = 0.0;
        for (int s = 0; s < seeds; ++s) {
          harness::ExperimentConfig c = cfg;
          c.seed = cfg.seed + static_cast<std::uint64_t>(s);
          harness::RunOptions opt;
          opt.out_dir = out / (std::string(baselines::to_string(p)) + "_seed" + std::to_string(c.seed));
          const auto r = harness::run_experiment(c, p, opt);
          summary += harness::summary_row(r);
          sum += r.eval.mean_sum_cost;
          std::cerr << baselines::to_string(p) << " seed " << c.seed << ": eval sum cost "
                    << r.eval.mean_sum_cost << "\n";
        }
        costs[p] = sum / seeds;
      }
      write_file(out / "summary.csv", summary);
      if (costs.count(PolicyKind::kDdql)) {
        const std::string table = harness::compare_csv(harness::compare_costs(costs));
        write_file(out / "compare.csv", table);
        std::cout << table;
      }
      return 0;
    }
    if (*sweep_data || *sweep_mec) {
      const auto policies = parse_policies(policy_names);
      const harness::SweepTable t =
          *sweep_data ? harness::sweep_data_size(cfg, policies, data_grid, seeds)
                      : harness::sweep_mec_count(cfg, policies, mec_grid, seeds);
      const std::string csv = t.to_csv();
      write_file(out / (*sweep_data ? "sweep_data.csv" : "sweep_mec.csv"), csv);
      std::cout << csv;
      if (t.crossover) std::cout << "foc_exceeds_flc_at," << *t.crossover << "\n";
      return 0;
    }
    if (*verify) {
      const harness::RunResult trained = harness::run_experiment(cfg, PolicyKind::kDdql);
      std::ostringstream csv;
      csv << "instance,agents,mecs,joint_points,optimum,greedy_per_task,random_gap";
      for (PolicyKind p : {PolicyKind::kFlc, PolicyKind::kFoc, PolicyKind::kRodrs,
                           PolicyKind::kRosrs, PolicyKind::kDdql}) {
        csv << ',' << baselines::to_string(p) << "_gap";
      }
      csv << '\n';
      env::Environment e(cfg.env);
      e.set_training_progress(cfg.learn.deep.psi, cfg.learn.deep.eps_end);
      for (int k = 0; k < instances; ++k) {
        const std::uint64_t s = substream_seed(cfg.seed, "verify", static_cast<std::uint64_t>(k));
        e.reset(s);
        const auto rep = harness::verify_small_instance(
            e, {{PolicyKind::kDdql, &trained.learners}}, cfg.baselines, s);
        csv << k << ',' << rep.agents << ',' << rep.mecs << ',' << rep.joint_points << ','
            << rep.optimum << ',' << rep.greedy_per_task << ',' << rep.random_expected_gap;
        for (const auto& [p, g] : rep.gaps) csv << ',' << g;
        csv << '\n';
      }
      write_file(out / "verify.csv", csv.str());
      std::cout << csv.str();
      return 0;
    }

    const PolicyKind policy = *baselines::parse_policy(policy_name);
    harness::RunOptions opt;
    opt.out_dir = out;
    const harness::RunResult r = harness::run_experiment(cfg, policy, opt);
    write_file(out / "summary.csv", harness::summary_header() + harness::summary_row(r));
    std::cout << harness::summary_header() << harness::summary_row(r);
    return 0;
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return e.code() == ErrorCode::kConfig ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
