#ifndef GRIDRED_INTEGRATOR_HPP
#define GRIDRED_INTEGRATOR_HPP

#include <functional>
#include <optional>
#include <vector>

#include "gridred/types.hpp"

namespace gridred {

struct StepControl {
  double dt_pre = 0.01;    // output step before fault clearing, s
  double dt_post = 0.03;   // output step after fault clearing, s
  double tolerance = 1e-6; // relative local error per step
};

struct EventSchedule {
  double fault_on = 0.0;
  double clear_near = 0.0;    // near breaker opens
  double clear_remote = 0.0;  // remote breaker opens
  int faulted_branch = 0;
  int faulted_end = 0;  // bus id at the near end

  void validate() const {
    if (!(fault_on < clear_near && clear_near < clear_remote))
      throw ConfigError("event schedule must satisfy fault_on < clear_near < clear_remote");
  }
};

/// Stage index for a time: 0 pre-fault, 1 fault on, 2 near end cleared,
/// 3 fully cleared. Without a schedule everything is stage 0.
int stage_at(const std::optional<EventSchedule>& events, double t);

/// f(t, x, stage). The stage is resolved by the integrator from the event
/// schedule so that no step ever straddles a discontinuity.
using StagedRhs = std::function<VectorXd(double, const VectorXd&, int)>;

struct Trajectory {
  std::vector<double> times;
  MatrixXd states;  // one row per time point

  VectorXd at(int k) const { return states.row(k).transpose(); }
  VectorXd back() const { return states.row(states.rows() - 1).transpose(); }
};

/// Output grid over [t0, t1]: dt_pre spacing until the remote clearing time,
/// dt_post after, with every event time forced onto the grid.
std::vector<double> output_grid(double t0, double t1, const StepControl& control,
                                const std::optional<EventSchedule>& events);

/// Implicit trapezoidal integration with an embedded backward-Euler error
/// estimate and finite-difference Jacobians reused across iterations.
/// States are reported exactly on the output grid; internal sub-steps adapt
/// to the local error tolerance.
Trajectory integrate(const StagedRhs& f, const VectorXd& x0, double t0, double t1,
                     const StepControl& control,
                     const std::optional<EventSchedule>& events = std::nullopt);

/// Single-interval convenience: integrate [t0, t1] under one fixed stage and
/// return only the final state.
VectorXd integrate_interval(const StagedRhs& f, const VectorXd& x0, double t0, double t1,
                            int stage, double tolerance);

}  // namespace gridred

#endif  // GRIDRED_INTEGRATOR_HPP
