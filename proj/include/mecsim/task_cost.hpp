#ifndef MECSIM_TASK_COST_HPP_
#define MECSIM_TASK_COST_HPP_

// Task representation and the execution-time / energy / weighted-cost model
// for local execution and MEC offloading, plus the constraint checker.
//
// All quantities are normalized scalars. The formulas are kept in the exact
// product/quotient form of the underlying model, including the places where
// energy coefficients appear inside time expressions.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mecsim/geo_channel.hpp"

namespace mecsim::cost {

enum class Category : std::uint8_t { kHigh = 0, kMedium = 1, kLow = 2 };

inline constexpr int kNumCategories = 3;

const char* to_string(Category c);

struct Task {
  Category cat = Category::kLow;
  double data = 1.0;    // input size
  double ck = 1.0;      // computational complexity
  double th_max = 1.0;  // latency threshold
  geo::Position3D origin;
  double cdata = 0.1;   // result size

  /// Throws kInvalidTask unless data > 0, ck > 0, th_max > 0, 0 <= cdata <= data.
  void validate() const;
};

struct UserNode {
  int id = 0;
  geo::Position3D pos;
  double f_n = 1.0;    // local CPU frequency
  double ue = 1.0;     // remaining energy budget
  double p_tx = 0.1;   // transmit power
  double ue_tr = 1.0;  // per-transmission energy coefficient
};

enum class MecKind : std::uint8_t { kAerial, kGroundFixed };

struct MecNode {
  int id = 0;
  geo::Position3D pos;
  MecKind kind = MecKind::kGroundFixed;
  double f_max = 1.0;    // max compute frequency
  double cr_max = 1.0;   // total computational resources
  double p_m = 0.1;      // operating power
  double ue_m = 1.0;     // per-execution energy coefficient
  double ue_tr_m = 1.0;  // return-transmission energy coefficient
};

struct LinkParams {
  double delay_tr = 1.0;       // aggregate per-hop transmission delay factor
  double delay_process = 1.0;  // local processing delay factor
  double lambda_floor = 1.0;   // substituted for a zero obstruction density
  double rate_floor = 1e-6;    // epsilon_R
  double uplink_scale = 1.0;   // scales the uplink transmission energy
  double downlink_scale = 1.0; // scales the return transmission energy
};

struct CostParams {
  double kappa = 0.5;
  // Multiply the handover energy by the node transmit power instead of using
  // the time expression verbatim.
  bool ho_energy_uses_power = false;
};

// Inputs to the handover branch. No handover happens while the serving MEC is
// still the best one.
struct HandoverContext {
  bool serving_is_best = true;
  geo::Position3D old_pos;
  geo::Position3D new_pos;
};

// Per-link quantities the offload formulas need beyond the node/MEC records.
struct OffloadLink {
  double distance = 1.0;
  double rate = 1.0;
  double lambda_o = 1.0;
  double g_h = 1.0;  // obstruction CCDF value
  HandoverContext ho;
};

struct CostBreakdown {
  bool offloaded = false;
  double t_local = 0.0;
  double t_tr_n = 0.0;
  double t_m = 0.0;
  double t_tr_m = 0.0;
  double t_ho = 0.0;
  double ue_local = 0.0;
  double ue_tr_n = 0.0;
  double ue_m = 0.0;
  double ue_tr_m = 0.0;
  double ue_ho = 0.0;
  double v = 0.0;
  bool rate_floored = false;

  double time() const { return t_local + t_tr_n + t_m + t_tr_m + t_ho; }
  double energy() const { return ue_local + ue_tr_n + ue_m + ue_tr_m + ue_ho; }
  /// Energy drawn from the user node's own battery.
  double node_energy() const { return ue_local + ue_tr_n; }
};

struct OffloadTimes {
  double t_tr_n = 0.0;
  double t_m = 0.0;
  double t_tr_m = 0.0;
  double t_ho = 0.0;
  bool rate_floored = false;
};

struct OffloadEnergies {
  double ue_tr_n = 0.0;
  double ue_m = 0.0;
  double ue_tr_m = 0.0;
  double ue_ho = 0.0;
};

double weighted_cost(double t_total, double ue_total, const CostParams& p);

/// t_local = data * ck * ue / f_n and ue_local = f_n * ck * delay_process * p_tx.
CostBreakdown local_cost(const Task& task, const UserNode& n,
                         const LinkParams& link, const CostParams& p);

OffloadTimes offload_times(const Task& task, const UserNode& n,
                           const MecNode& m, const LinkParams& link,
                           double rho, const OffloadLink& ol);

OffloadEnergies offload_energies(const Task& task, const UserNode& n,
                                 const MecNode& m, const LinkParams& link,
                                 double rho, const OffloadLink& ol,
                                 const CostParams& p);

/// Full offload breakdown: times, energies and the weighted cost.
CostBreakdown offload_cost(const Task& task, const UserNode& n,
                           const MecNode& m, const LinkParams& link,
                           double rho, const OffloadLink& ol,
                           const CostParams& p);

struct BranchCosts {
  int gamma = 0;  // 0 local, 1 MEC
  double v_local = 0.0;
  double v_offload = 0.0;
};

/// Sum over tasks of (1 - gamma) * V_local + gamma * V_offload.
double total_cost(std::span<const BranchCosts> decisions);

enum class Constraint : std::uint8_t { kC1, kC2, kC3, kC4, kC5 };

const char* to_string(Constraint c);

struct ConstraintSet {
  double ue_threshold = 1.0;
  std::vector<double> t_max_task = {1.0, 1.0, 1.0};  // per category
  double p_max_m = 5.0;
  double p_max_n = 1.0;
};

struct ConstraintInput {
  int gamma = 0;
  double rho = 0.0;
  double p_tx = 0.0;
  double p_m = 0.0;
  double energy = 0.0;
  double time = 0.0;
  Category cat = Category::kLow;
  double th_max = 0.0;  // <= 0 means no per-task cap beyond t_max_task
};

struct ConstraintReport {
  std::vector<Constraint> violations;
  bool satisfied() const { return violations.empty(); }
};

ConstraintReport check_constraints(const ConstraintInput& in,
                                   const ConstraintSet& c);

}  // namespace mecsim::cost

#endif  // MECSIM_TASK_COST_HPP_
