#include "mecsim/task_cost.hpp"

#include <cmath>

#include "mecsim/error.hpp"

namespace mecsim::cost {

const char* to_string(Category c) {
  switch (c) {
    case Category::kHigh: return "high";
    case Category::kMedium: return "medium";
    case Category::kLow: return "low";
  }
  return "?";
}

const char* to_string(Constraint c) {
  switch (c) {
    case Constraint::kC1: return "C1";
    case Constraint::kC2: return "C2";
    case Constraint::kC3: return "C3";
    case Constraint::kC4: return "C4";
    case Constraint::kC5: return "C5";
  }
  return "?";
}

void Task::validate() const {
  if (!(data > 0.0)) throw Error(ErrorCode::kInvalidTask, "task data must be > 0");
  if (!(ck > 0.0)) throw Error(ErrorCode::kInvalidTask, "task ck must be > 0");
  if (!(th_max > 0.0)) throw Error(ErrorCode::kInvalidTask, "task th_max must be > 0");
  if (cdata < 0.0 || cdata > data) {
    throw Error(ErrorCode::kInvalidTask, "task cdata must lie in [0, data]");
  }
}

double weighted_cost(double t_total, double ue_total, const CostParams& p) {
  return p.kappa * t_total + (1.0 - p.kappa) * ue_total;
}

CostBreakdown local_cost(const Task& task, const UserNode& n,
                         const LinkParams& link, const CostParams& p) {
  if (!(n.f_n > 0.0)) {
    throw Error(ErrorCode::kInvalidNode, "local execution needs f_n > 0");
  }
  task.validate();
  CostBreakdown c;
  c.offloaded = false;
  c.t_local = task.data * task.ck * n.ue / n.f_n;
  c.ue_local = n.f_n * task.ck * link.delay_process * n.p_tx;
  c.v = weighted_cost(c.time(), c.energy(), p);
  return c;
}

OffloadTimes offload_times(const Task& task, const UserNode& n,
                           const MecNode& m, const LinkParams& link,
                           double rho, const OffloadLink& ol) {
  if (!(rho > 0.0)) {
    throw Error(ErrorCode::kNoResources, "offloading with a zero resource share");
  }
  if (!(m.f_max > 0.0)) {
    throw Error(ErrorCode::kInvalidNode, "MEC needs f_max > 0");
  }
  task.validate();
  OffloadTimes t;
  double rate = ol.rate;
  if (!(rate >= link.rate_floor)) {
    rate = link.rate_floor;
    t.rate_floored = true;
  }
  const double lambda = ol.lambda_o > 0.0 ? ol.lambda_o : link.lambda_floor;
  t.t_tr_n = task.data * ol.distance * link.delay_tr * n.ue_tr / (rate * lambda);
  t.t_m = task.ck * task.data * m.ue_m / (rho * m.f_max);
  t.t_tr_m = task.cdata * link.delay_tr * m.ue_tr_m / rate;
  t.t_ho = ol.ho.serving_is_best
               ? 0.0
               : geo::distance(ol.ho.new_pos, ol.ho.old_pos) * t.t_tr_m;
  return t;
}

OffloadEnergies offload_energies(const Task& task, const UserNode& n,
                                 const MecNode& m, const LinkParams& link,
                                 double rho, const OffloadLink& ol,
                                 const CostParams& p) {
  const OffloadTimes t = offload_times(task, n, m, link, rho, ol);
  OffloadEnergies e;
  e.ue_tr_n = ol.distance * link.delay_tr * ol.g_h * link.uplink_scale;
  e.ue_m = m.f_max * rho * m.p_m;
  e.ue_tr_m = link.delay_tr * ol.g_h * ol.distance * link.downlink_scale;
  if (!ol.ho.serving_is_best) {
    const double hop = geo::distance(ol.ho.new_pos, ol.ho.old_pos);
    e.ue_ho = p.ho_energy_uses_power ? hop * n.p_tx : hop * t.t_tr_m;
  }
  return e;
}

CostBreakdown offload_cost(const Task& task, const UserNode& n,
                           const MecNode& m, const LinkParams& link,
                           double rho, const OffloadLink& ol,
                           const CostParams& p) {
  const OffloadTimes t = offload_times(task, n, m, link, rho, ol);
  const OffloadEnergies e = offload_energies(task, n, m, link, rho, ol, p);
  CostBreakdown c;
  c.offloaded = true;
  c.t_tr_n = t.t_tr_n;
  c.t_m = t.t_m;
  c.t_tr_m = t.t_tr_m;
  c.t_ho = t.t_ho;
  c.rate_floored = t.rate_floored;
  c.ue_tr_n = e.ue_tr_n;
  c.ue_m = e.ue_m;
  c.ue_tr_m = e.ue_tr_m;
  c.ue_ho = e.ue_ho;
  c.v = weighted_cost(c.time(), c.energy(), p);
  return c;
}

double total_cost(std::span<const BranchCosts> decisions) {
  double sum = 0.0;
  for (const auto& d : decisions) {
    sum += d.gamma == 0 ? d.v_local : d.v_offload;
  }
  return sum;
}

ConstraintReport check_constraints(const ConstraintInput& in,
                                   const ConstraintSet& c) {
  ConstraintReport r;
  if (in.gamma != 0 && in.gamma != 1) r.violations.push_back(Constraint::kC1);
  if (in.rho < 0.0 || in.rho > 1.0) r.violations.push_back(Constraint::kC2);
  const bool node_power_ok = in.p_tx >= 0.0 && in.p_tx <= c.p_max_n;
  const bool mec_power_ok = in.p_m >= 0.0 && in.p_m <= c.p_max_m;
  if (!node_power_ok || !mec_power_ok) r.violations.push_back(Constraint::kC3);
  if (in.energy < 0.0 || in.energy > c.ue_threshold) {
    r.violations.push_back(Constraint::kC4);
  }
  double cap = c.t_max_task.empty()
                   ? INFINITY
                   : c.t_max_task[static_cast<std::size_t>(in.cat) %
                                  c.t_max_task.size()];
  if (in.th_max > 0.0) cap = std::min(cap, in.th_max);
  if (in.time > cap) r.violations.push_back(Constraint::kC5);
  return r;
}

}  // namespace mecsim::cost
