#include "gridred/integrator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

namespace gridred {

int stage_at(const std::optional<EventSchedule>& events, double t) {
  if (!events) return 0;
  if (t < events->fault_on) return 0;
  if (t < events->clear_near) return 1;
  if (t < events->clear_remote) return 2;
  return 3;
}

std::vector<double> output_grid(double t0, double t1, const StepControl& control,
                                const std::optional<EventSchedule>& events) {
  if (!(t1 > t0)) throw ConfigError("output grid requires t1 > t0");
  std::vector<double> grid;
  grid.push_back(t0);
  const double switch_t = events ? events->clear_remote : t1;
  double t = t0;
  const double eps = 1e-9 * (t1 - t0);
  while (t < t1 - eps) {
    const double dt = (t < switch_t - eps) ? control.dt_pre : control.dt_post;
    double next = t + dt;
    if (events) {
      for (double ev : {events->fault_on, events->clear_near, events->clear_remote})
        if (ev > t + eps && ev < next - eps) next = ev;
    }
    next = std::min(next, t1);
    grid.push_back(next);
    t = next;
  }
  return grid;
}

namespace {

// One adaptive implicit-trapezoidal advance over [a, b] under a fixed stage.
// Used for both output intervals and inter-event segments.
class TrapezoidalStepper {
 public:
  TrapezoidalStepper(const StagedRhs& f, int stage, double rtol)
      : f_(f), stage_(stage), rtol_(rtol) {}

  VectorXd advance(VectorXd x, double a, double b) {
    const int n = static_cast<int>(x.size());
    double t = a;
    double h = b - a;
    VectorXd f0 = f_(t, x, stage_);
    bool jac_fresh = false;

    int guard = 0;
    while (t < b - 1e-14 * std::max(1.0, std::abs(b))) {
      if (++guard > 1000000) throw NumericalError("integrator stalled near t = " + std::to_string(t));
      h = std::min(h, b - t);

      if (!have_jac_) {
        numerical_jacobian(t, x, f0);
        jac_fresh = true;
      }
      bool newton_ok = false;
      VectorXd z, f1;
      for (int attempt = 0; attempt < 40; ++attempt) {
        if (h != h_fact_) factor(h);
        if (newton_solve(t, x, f0, h, z, f1)) {
          newton_ok = true;
          break;
        }
        if (!jac_fresh) {
          numerical_jacobian(t, x, f0);
          jac_fresh = true;
          continue;
        }
        h *= 0.5;
        if (h < 1e-13 * std::max(1.0, b - a))
          throw NumericalError("implicit step Newton failed at t = " + std::to_string(t) +
                               ", |x| = " + std::to_string(x.norm()));
      }
      if (!newton_ok)
        throw NumericalError("implicit step Newton failed at t = " + std::to_string(t));

      // Trapezoid vs backward Euler: z_TR - z_BE = h/2 (f0 - f1).
      double err = 0.0;
      for (int i = 0; i < n; ++i) {
        const double scale = atol_ + rtol_ * std::max(std::abs(x(i)), std::abs(z(i)));
        err = std::max(err, 0.5 * h * std::abs(f1(i) - f0(i)) / scale);
      }

      if (err <= 1.0) {
        t += h;
        x = z;
        f0 = f1;
        jac_fresh = false;
        steps_since_jac_++;
        if (steps_since_jac_ > 25) have_jac_ = false;
        const double grow = (err > 1e-10) ? 0.9 / std::sqrt(err) : 5.0;
        h *= std::clamp(grow, 0.2, 5.0);
      } else {
        h *= std::clamp(0.9 / std::sqrt(err), 0.1, 0.5);
        if (h < 1e-13 * std::max(1.0, b - a))
          throw NumericalError("integrator step size underflow at t = " + std::to_string(t));
      }
    }
    h_carry_ = h;
    return x;
  }

  double suggested_h() const { return h_carry_; }
  void seed_h(double h) { h_carry_ = h; }

 private:
  void numerical_jacobian(double t, const VectorXd& x, const VectorXd& f0) {
    const int n = static_cast<int>(x.size());
    jac_.resize(n, n);
    VectorXd xp = x;
    for (int j = 0; j < n; ++j) {
      const double eps = 1.5e-8 * std::max(1.0, std::abs(x(j)));
      xp(j) = x(j) + eps;
      jac_.col(j) = (f_(t, xp, stage_) - f0) / eps;
      xp(j) = x(j);
    }
    have_jac_ = true;
    steps_since_jac_ = 0;
    h_fact_ = -1.0;  // force refactorization
  }

  void factor(double h) {
    const int n = static_cast<int>(jac_.rows());
    lu_.compute(MatrixXd::Identity(n, n) - 0.5 * h * jac_);
    h_fact_ = h;
  }

  bool newton_solve(double t, const VectorXd& x, const VectorXd& f0, double h, VectorXd& z,
                    VectorXd& f1) {
    const int n = static_cast<int>(x.size());
    z = x + h * f0;  // explicit Euler predictor
    for (int it = 0; it < 12; ++it) {
      f1 = f_(t + h, z, stage_);
      if (!f1.allFinite()) return false;
      const VectorXd g = z - x - 0.5 * h * (f0 + f1);
      const VectorXd dz = lu_.solve(-g);
      z += dz;
      double nd = 0.0;
      for (int i = 0; i < n; ++i)
        nd = std::max(nd, std::abs(dz(i)) / (atol_ + rtol_ * std::max(1.0, std::abs(z(i)))));
      if (nd < 1e-2) {
        f1 = f_(t + h, z, stage_);
        return f1.allFinite();
      }
    }
    return false;
  }

  const StagedRhs& f_;
  int stage_;
  double rtol_;
  double atol_ = 1e-9;
  MatrixXd jac_;
  Eigen::PartialPivLU<MatrixXd> lu_;
  bool have_jac_ = false;
  int steps_since_jac_ = 0;
  double h_fact_ = -1.0;
  double h_carry_ = 0.0;
};

}  // namespace

Trajectory integrate(const StagedRhs& f, const VectorXd& x0, double t0, double t1,
                     const StepControl& control, const std::optional<EventSchedule>& events) {
  if (!x0.allFinite()) throw NumericalError("integrate: non-finite initial state");
  if (events) events->validate();
  const std::vector<double> grid = output_grid(t0, t1, control, events);

  Trajectory traj;
  traj.times = grid;
  traj.states.resize(grid.size(), x0.size());
  traj.states.row(0) = x0.transpose();

  VectorXd x = x0;
  int stage = stage_at(events, t0);
  TrapezoidalStepper stepper(f, stage, control.tolerance);
  std::unique_ptr<TrapezoidalStepper> holder;  // rebuilt on stage changes

  for (size_t k = 1; k < grid.size(); ++k) {
    const double a = grid[k - 1];
    const double b = grid[k];
    const int s = stage_at(events, a);
    if (s != stage) {
      stage = s;
      holder = std::make_unique<TrapezoidalStepper>(f, stage, control.tolerance);
    }
    TrapezoidalStepper& st = holder ? *holder : stepper;
    x = st.advance(x, a, b);
    traj.states.row(k) = x.transpose();
  }
  return traj;
}

VectorXd integrate_interval(const StagedRhs& f, const VectorXd& x0, double t0, double t1,
                            int stage, double tolerance) {
  StepControl ctrl;
  ctrl.tolerance = tolerance;
  TrapezoidalStepper st(f, stage, tolerance);
  return st.advance(x0, t0, t1);
}

}  // namespace gridred
