#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>
#include <string_view>
#include <variant>

#include "mecsim/error.hpp"
#include "mecsim/harness.hpp"

namespace mecsim::harness {

namespace {

using Value = std::variant<double, bool, std::string, std::vector<double>>;
using Setter = std::function<void(ExperimentConfig&, const Value&, const std::string&)>;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfig, key + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::optional<double> to_number(std::string_view s) {
  const std::string str(s);
  if (str.empty()) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(str.c_str(), &end);
  if (end != str.c_str() + str.size() || errno == ERANGE) return std::nullopt;
  return v;
}

Value parse_value(std::string_view raw, const std::string& where) {
  const std::string_view v = trim(raw);
  if (v.empty()) throw Error(ErrorCode::kConfig, where + ": missing value");
  if (v.front() == '[') {
    if (v.back() != ']') throw Error(ErrorCode::kConfig, where + ": unterminated list");
    std::vector<double> out;
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
      const auto comma = body.find(',');
      const std::string_view item = trim(body.substr(0, comma));
      const auto num = to_number(item);
      if (!num) throw Error(ErrorCode::kConfig, where + ": list item '" + std::string(item) + "' is not a number");
      out.push_back(*num);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (const auto num = to_number(v)) return *num;
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
    return std::string(v.substr(1, v.size() - 2));
  }
  return std::string(v);
}

double as_number(const Value& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) {
    if (!std::isfinite(*d)) fail(key, "must be finite");
    return *d;
  }
  fail(key, "expected a number");
}

struct Bounds {
  double lo = -INFINITY;
  double hi = INFINITY;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double v) const {
    return (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  }
  std::string describe() const {
    std::ostringstream os;
    os << "must lie in " << (lo_open ? '(' : '[') << lo << ", " << hi << (hi_open ? ')' : ']');
    return os.str();
  }
};

constexpr Bounds kAny{};
constexpr Bounds kPositive{0.0, INFINITY, true, false};
constexpr Bounds kNonNegative{0.0, INFINITY, false, false};
constexpr Bounds kUnit{0.0, 1.0, false, false};
constexpr Bounds kOpenUnit{0.0, 1.0, true, true};

template <typename Get>
Setter real(Get get, Bounds b = kAny) {
  return [get, b](ExperimentConfig& c, const Value& v, const std::string& key) {
    const double d = as_number(v, key);
    if (!b.contains(d)) fail(key, b.describe());
    get(c) = d;
  };
}

template <typename Get>
Setter integer(Get get, double lo, double hi) {
  return [get, lo, hi](ExperimentConfig& c, const Value& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d != std::floor(d)) fail(key, "expected an integer");
    if (d < lo || d > hi) {
      std::ostringstream os;
      os << "must lie in [" << lo << ", " << hi << "]";
      fail(key, os.str());
    }
    get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(d);
  };
}

template <typename Get>
Setter boolean(Get get) {
  return [get](ExperimentConfig& c, const Value& v, const std::string& key) {
    const auto* b = std::get_if<bool>(&v);
    if (!b) fail(key, "expected true or false");
    get(c) = *b;
  };
}

template <typename Get>
Setter list(Get get, Bounds item = kAny, std::size_t min_size = 1) {
  return [get, item, min_size](ExperimentConfig& c, const Value& v, const std::string& key) {
    const auto* l = std::get_if<std::vector<double>>(&v);
    if (!l) fail(key, "expected a list like [a, b]");
    if (l->size() < min_size) fail(key, "needs at least " + std::to_string(min_size) + " entries");
    for (double d : *l) {
      if (!item.contains(d)) fail(key, "every entry " + item.describe());
    }
    get(c) = *l;
  };
}

template <typename GetLo, typename GetHi>
Setter range(GetLo lo, GetHi hi, Bounds b = kAny) {
  return [lo, hi, b](ExperimentConfig& c, const Value& v, const std::string& key) {
    const auto* l = std::get_if<std::vector<double>>(&v);
    if (!l || l->size() != 2) fail(key, "expected a range [min, max]");
    if ((*l)[0] > (*l)[1]) fail(key, "range minimum exceeds maximum");
    if (!b.contains((*l)[0]) || !b.contains((*l)[1])) fail(key, "range ends " + b.describe());
    lo(c) = (*l)[0];
    hi(c) = (*l)[1];
  };
}

const std::map<std::string, Setter>& registry() {
  using C = ExperimentConfig;
  static const std::map<std::string, Setter> reg = {
      {"seed", integer([](C& c) -> std::uint64_t& { return c.seed; }, 0, 9.007199254740992e15)},
      {"eval.episodes", integer([](C& c) -> int& { return c.eval_episodes; }, 1, 1e6)},

      {"network.num_mecs", integer([](C& c) -> int& { return c.env.network.num_mecs; }, 1, 1e4)},
      {"network.num_aerial", integer([](C& c) -> int& { return c.env.network.num_aerial; }, 0, 1e4)},
      {"network.num_nodes", integer([](C& c) -> int& { return c.env.network.num_nodes; }, 1, 1e5)},
      {"network.arena_size", real([](C& c) -> double& { return c.env.network.arena_size; }, kPositive)},
      {"network.uav_altitude", range([](C& c) -> double& { return c.env.network.uav_altitude_min; },
                                     [](C& c) -> double& { return c.env.network.uav_altitude_max; }, kPositive)},
      {"network.bs_height", real([](C& c) -> double& { return c.env.network.bs_height; }, kPositive)},
      {"network.node_height", real([](C& c) -> double& { return c.env.network.node_height; }, kNonNegative)},
      {"network.node_speed", real([](C& c) -> double& { return c.env.network.node_speed_max; }, kNonNegative)},
      {"network.uav_speed", real([](C& c) -> double& { return c.env.network.uav_speed_max; }, kNonNegative)},

      {"mec.cr_aerial", range([](C& c) -> double& { return c.env.mec.cr_aerial_min; },
                              [](C& c) -> double& { return c.env.mec.cr_aerial_max; }, kPositive)},
      {"mec.cr_fixed", real([](C& c) -> double& { return c.env.mec.cr_fixed; }, kPositive)},
      {"mec.compute_scale", real([](C& c) -> double& { return c.env.mec.compute_scale; }, kPositive)},
      {"mec.power", real([](C& c) -> double& { return c.env.mec.power; }, kNonNegative)},
      {"mec.exec_coeff", real([](C& c) -> double& { return c.env.mec.exec_coeff; }, kNonNegative)},
      {"mec.return_coeff", real([](C& c) -> double& { return c.env.mec.return_coeff; }, kNonNegative)},

      {"node.cpu", range([](C& c) -> double& { return c.env.node.cpu_min; },
                         [](C& c) -> double& { return c.env.node.cpu_max; }, kPositive)},
      {"node.energy_initial", real([](C& c) -> double& { return c.env.node.energy_initial; }, kPositive)},
      {"node.energy_drain", real([](C& c) -> double& { return c.env.node.energy_drain; }, kNonNegative)},

      {"task.data", range([](C& c) -> double& { return c.env.task.data_min; },
                          [](C& c) -> double& { return c.env.task.data_max; }, kPositive)},
      {"task.data_scale", real([](C& c) -> double& { return c.env.task.data_scale; }, kPositive)},
      {"task.ck", range([](C& c) -> double& { return c.env.task.ck_min; },
                        [](C& c) -> double& { return c.env.task.ck_max; }, kPositive)},
      {"task.ck_scale", real([](C& c) -> double& { return c.env.task.ck_scale; }, kPositive)},
      {"task.cdata_ratio", real([](C& c) -> double& { return c.env.task.cdata_ratio; }, kUnit)},
      {"task.th", range([](C& c) -> double& { return c.env.task.th_min; },
                        [](C& c) -> double& { return c.env.task.th_max; }, kPositive)},
      {"task.fixed_data", real([](C& c) -> double& { return c.env.task.fixed_data; }, kNonNegative)},
      {"task.band_edges", list([](C& c) -> std::vector<double>& { return c.env.urgency.band_edges; }, kPositive)},
      {"task.category_priors", list([](C& c) -> std::vector<double>& { return c.env.urgency.priors; }, kNonNegative)},

      {"channel.carrier_hz", real([](C& c) -> double& { return c.env.radio.channel.carrier_hz; }, kPositive)},
      {"channel.light_speed", real([](C& c) -> double& { return c.env.radio.channel.light_speed; }, kPositive)},
      {"channel.eta_los_db", real([](C& c) -> double& { return c.env.radio.channel.eta_los_db; })},
      {"channel.eta_nlos_db", real([](C& c) -> double& { return c.env.radio.channel.eta_nlos_db; })},
      {"channel.alpha", real([](C& c) -> double& { return c.env.radio.channel.alpha; }, kPositive)},
      {"channel.beta", real([](C& c) -> double& { return c.env.radio.channel.beta; }, kNonNegative)},
      {"channel.obstruction_radius", real([](C& c) -> double& { return c.env.radio.obstruction.radius; }, kNonNegative)},
      {"channel.obstruction_density", real([](C& c) -> double& { return c.env.radio.obstruction.density; }, kNonNegative)},
      {"channel.obstruction_height_mean", real([](C& c) -> double& { return c.env.radio.obstruction.height_mean; }, kPositive)},
      {"channel.quadrature_panels", integer([](C& c) -> int& { return c.env.radio.obstruction.panels; }, 1, 1e7)},
      {"channel.upper_limit",
       [](C& c, const Value& v, const std::string& key) {
         const auto* s = std::get_if<std::string>(&v);
         if (s && *s == "half_distance_over_radius") {
           c.env.radio.obstruction.upper_limit = geo::IntegralUpperLimit::kHalfDistanceOverRadius;
         } else if (s && *s == "half_distance_times_radius") {
           c.env.radio.obstruction.upper_limit = geo::IntegralUpperLimit::kHalfDistanceTimesRadius;
         } else {
           fail(key, "expected half_distance_over_radius or half_distance_times_radius");
         }
       }},
      {"channel.rician_k", real([](C& c) -> double& { return c.env.radio.rician_k; }, kNonNegative)},
      {"channel.bandwidth", real([](C& c) -> double& { return c.env.radio.bandwidth; }, kPositive)},
      {"channel.noise", real([](C& c) -> double& { return c.env.radio.noise; }, kPositive)},
      {"channel.traffic_ref", real([](C& c) -> double& { return c.env.radio.traffic_ref; }, kPositive)},

      {"link.delay_tr", real([](C& c) -> double& { return c.env.link.delay_tr; }, kNonNegative)},
      {"link.delay_process", real([](C& c) -> double& { return c.env.link.delay_process; }, kNonNegative)},
      {"link.lambda_floor", real([](C& c) -> double& { return c.env.link.lambda_floor; }, kPositive)},
      {"link.rate_floor", real([](C& c) -> double& { return c.env.link.rate_floor; }, kPositive)},
      {"link.uplink_scale", real([](C& c) -> double& { return c.env.link.uplink_scale; }, kNonNegative)},
      {"link.downlink_scale", real([](C& c) -> double& { return c.env.link.downlink_scale; }, kNonNegative)},

      {"cost.kappa", real([](C& c) -> double& { return c.env.cost.kappa; }, kUnit)},
      {"cost.ho_energy_uses_power", boolean([](C& c) -> bool& { return c.env.cost.ho_energy_uses_power; })},

      {"constraints.energy_threshold", real([](C& c) -> double& { return c.env.constraints.ue_threshold; }, kPositive)},
      {"constraints.t_max_task", list([](C& c) -> std::vector<double>& { return c.env.constraints.t_max_task; }, kPositive)},
      {"constraints.p_max_mec", real([](C& c) -> double& { return c.env.constraints.p_max_m; }, kPositive)},
      {"constraints.p_max_node", real([](C& c) -> double& { return c.env.constraints.p_max_n; }, kPositive)},

      {"actions.subbands", integer([](C& c) -> int& { return c.env.actions.subbands; }, 1, 64)},
      {"actions.traffic_levels", list([](C& c) -> std::vector<double>& { return c.env.actions.traffic_levels; }, kPositive)},
      {"actions.rho_levels", list([](C& c) -> std::vector<double>& { return c.env.actions.rho_levels; }, Bounds{0.0, 1.0, true, false})},
      {"actions.power_levels", list([](C& c) -> std::vector<double>& { return c.env.actions.power_levels_w; }, kNonNegative)},
      {"actions.tx_energy_levels", list([](C& c) -> std::vector<double>& { return c.env.actions.tx_energy_levels; }, kPositive)},

      {"env.steps", integer([](C& c) -> int& { return c.env.steps; }, 1, 1e7)},
      {"env.global_cost_state", boolean([](C& c) -> bool& { return c.env.global_cost_state; })},
      {"env.resource_coupling", boolean([](C& c) -> bool& { return c.env.resource_coupling; })},

      {"reward.auto_calibrate", boolean([](C& c) -> bool& { return c.calibration.enabled; })},
      {"reward.calibration_quantile", real([](C& c) -> double& { return c.calibration.quantile; }, kUnit)},
      {"reward.calibration_episodes", integer([](C& c) -> int& { return c.calibration.episodes; }, 1, 1e4)},
      {"reward.c_const", real([](C& c) -> double& { return c.env.reward.c_const; }, kPositive)},
      {"reward.penalty", real([](C& c) -> double& { return c.env.reward.penalty; }, Bounds{-INFINITY, 0.0, false, true})},

      {"norm.gain_db", range([](C& c) -> double& { return c.env.norm.gain_db_min; },
                             [](C& c) -> double& { return c.env.norm.gain_db_max; })},
      {"norm.rate_log", range([](C& c) -> double& { return c.env.norm.rate_log_min; },
                              [](C& c) -> double& { return c.env.norm.rate_log_max; })},
      {"norm.cost_max", real([](C& c) -> double& { return c.env.norm.cost_max; }, kPositive)},

      {"ddql.psi", real([](C& c) -> double& { return c.learn.deep.psi; }, kPositive)},
      {"ddql.zeta", real([](C& c) -> double& { return c.learn.deep.zeta; }, kOpenUnit)},
      {"ddql.epsilon", range([](C& c) -> double& { return c.learn.deep.eps_end; },
                             [](C& c) -> double& { return c.learn.deep.eps_start; }, kUnit)},
      {"ddql.epsilon_floor_fraction", real([](C& c) -> double& { return c.learn.deep.eps_floor_fraction; }, Bounds{0.0, 1.0, true, false})},
      {"ddql.eta", integer([](C& c) -> int& { return c.learn.deep.eta; }, 1, 1e7)},
      {"ddql.batch_size", integer([](C& c) -> int& { return c.learn.deep.batch_size; }, 1, 1e6)},
      {"ddql.target_sync_period", integer([](C& c) -> int& { return c.learn.deep.target_sync_period; }, 1, 1e9)},
      {"ddql.memory_capacity", integer([](C& c) -> int& { return c.learn.deep.memory_capacity; }, 1, 1e8)},
      {"ddql.train_every", integer([](C& c) -> int& { return c.learn.deep.train_every; }, 1, 1e6)},
      {"ddql.hidden",
       [](C& c, const Value& v, const std::string& key) {
         const auto* l = std::get_if<std::vector<double>>(&v);
         if (!l || l->empty()) fail(key, "expected a non-empty list of widths");
         std::vector<int> w;
         for (double d : *l) {
           if (d < 1 || d != std::floor(d) || d > 1e6) fail(key, "widths must be positive integers");
           w.push_back(static_cast<int>(d));
         }
         c.learn.deep.hidden = std::move(w);
       }},
      {"ddql.uncertainty_scale", real([](C& c) -> double& { return c.learn.deep.uncertainty_scale; }, kNonNegative)},
      {"ddql.use_prev_net_sum", boolean([](C& c) -> bool& { return c.learn.deep.use_prev_net_sum; })},
      {"ddql.tvf_verbatim", boolean([](C& c) -> bool& { return c.learn.deep.tvf_verbatim; })},
      {"ddql.share_memory", boolean([](C& c) -> bool& { return c.learn.share_memory; })},
      {"dql.double_q", boolean([](C& c) -> bool& { return c.learn.dql_double_q; })},
      {"ql.psi", real([](C& c) -> double& { return c.learn.ql_psi; }, Bounds{0.0, 1.0, true, false})},
      {"ql.zeta", real([](C& c) -> double& { return c.learn.ql_zeta; }, kOpenUnit)},
      {"ql.bins", integer([](C& c) -> int& { return c.learn.ql_bins; }, 1, 64)},

      {"baselines.offload_prob", real([](C& c) -> double& { return c.baselines.offload_prob; }, kUnit)},
      {"baselines.dedicated_rho", real([](C& c) -> double& { return c.baselines.dedicated_rho; }, Bounds{0.0, 1.0, true, false})},
  };
  return reg;
}

}  // namespace

void ExperimentConfig::validate() const {
  env.validate();
  try {
    learn.deep.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("ddql.") + e.what());
  }
  if (learn.deep.hidden.empty()) throw Error(ErrorCode::kConfig, "ddql.hidden: needs a hidden layer");
  if (eval_episodes < 1) throw Error(ErrorCode::kConfig, "eval.episodes: must be >= 1");
}

ExperimentConfig parse_config(const std::string& text, const std::string& source) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool penalty_set = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    const std::string_view body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfig, where + ": expected 'key = value'");
    }
    const std::string key(trim(body.substr(0, eq)));
    const auto& reg = registry();
    const auto it = reg.find(key);
    if (it == reg.end()) {
      throw Error(ErrorCode::kConfig, key + ": unknown key (" + where + ")");
    }
    const Value v = parse_value(body.substr(eq + 1), key + " (" + where + ")");
    it->second(cfg, v, key);
    if (key == "reward.penalty") penalty_set = true;
  }
  // Cumulative reward uses the learners' discount.
  cfg.env.reward.zeta = cfg.learn.deep.zeta;
  if (!penalty_set) cfg.env.reward.penalty = -cfg.env.reward.c_const;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : registry()) keys.push_back(k);
  return keys;
}

}  // namespace mecsim::harness
