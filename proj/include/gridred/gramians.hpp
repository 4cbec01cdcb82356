#ifndef GRIDRED_GRAMIANS_HPP
#define GRIDRED_GRAMIANS_HPP

#include <functional>
#include <string>
#include <vector>

#include "gridred/dynamics.hpp"
#include "gridred/types.hpp"

namespace gridred {

/// Generic autonomous system with inputs; the perturbation experiments and
/// the balancing pipeline only see this interface.
struct DynamicalSystem {
  int n = 0, v = 0, p = 0;
  std::function<VectorXd(const VectorXd& x, const VectorXd& u)> f;
  std::function<VectorXd(const VectorXd& x, const VectorXd& u)> h;
};

/// Wrap an area's dynamics (at a fixed network configuration) as a
/// DynamicalSystem. Each evaluation context gets its own warm-start cache.
DynamicalSystem area_system(const AreaDynamics& dyn, const NetworkMatrices& mats);

/// States and inputs divided by their steady-state values so that unit
/// perturbations mean "100 % of steady state". Zero components get a unit
/// scale instead, with a warning recorded.
struct ScaledSystem {
  DynamicalSystem sys;       // scaled dynamics
  DynamicalSystem raw;       // original dynamics
  VectorXd tx, tu;           // scaling diagonals
  VectorXd x0_scaled, u0_scaled;
  VectorXd x0_raw, u0_raw;
  std::vector<int> substituted_states, substituted_inputs;
};

ScaledSystem scale_system(const DynamicalSystem& raw, const VectorXd& x0, const VectorXd& u0);

enum class InputShape { Step, Impulse };

/// Direction sets, magnitudes, and sampling for the covariance experiments.
/// Empty direction sets mean the default {+I, -I}; empty per-entry magnitude
/// factors mean all ones.
struct PerturbationScheme {
  std::vector<MatrixXd> t_c;  // input direction matrices, each v x v orthonormal
  std::vector<MatrixXd> t_o;  // state direction matrices, each n x n orthonormal
  VectorXd m0 = (VectorXd(4) << 0.25, 0.5, 0.75, 1.0).finished();
  VectorXd ku_entry;  // per-input magnitude factor
  VectorXd kx_entry;  // per-state magnitude factor
  InputShape shape = InputShape::Step;
  double horizon = 5.0;
  double dt = 0.01;
  double ode_tol = 1e-8;
  int jobs = 1;

  std::string summary() const;
};

void validate_scheme(const PerturbationScheme& scheme, int n, int v);

struct CovariancePair {
  MatrixXd w_c, w_o;
  VectorXd tx, tu;
  VectorXd x0_scaled, u0_scaled;
  std::string scheme_summary;
};

/// Symmetric within 1e-10 and positive semidefinite within
/// min eig > -1e-8 * max eig; throws otherwise.
void check_covariance(const MatrixXd& w, const std::string& name);

MatrixXd controllability_covariance(const ScaledSystem& ss, const PerturbationScheme& scheme);
MatrixXd observability_covariance(const ScaledSystem& ss, const PerturbationScheme& scheme);

CovariancePair covariance_pair(const ScaledSystem& ss, const PerturbationScheme& scheme);

/// Per-variable-type perturbation magnitude factors (inputs V, theta; states
/// delta, omega, e'_q, e'_d).
struct MagnitudeProfile {
  double k_v = 1.0, k_th = 1.0;
  double k_delta = 1.0, k_omega = 1.0, k_eqp = 1.0, k_edp = 1.0;
};

/// Factors determined on the paper's full-scale case; shipped as a documented
/// default, not a reproduction target.
MagnitudeProfile reference_profile();

/// The six magnitude-set variants: linear or geometric M0, with the k factors
/// optionally halved or doubled.
struct SchemeProfile {
  bool geometric = false;
  double k_scale = 1.0;
};
SchemeProfile parse_profile(const std::string& name);  // LS, LS-Half, ..., GS-Double
VectorXd profile_m0(const SchemeProfile& p);

VectorXd ku_for_inputs(const MagnitudeProfile& prof, int p);
VectorXd kx_for_states(const MagnitudeProfile& prof, const StateLayout& layout);

struct CalibrationResult {
  double k_v = 0.0, k_th = 0.0;
  double k_delta = 0.0, k_omega = 0.0, k_eqp = 0.0, k_edp = 0.0;
  int n_f = 0;
  double alpha_u = 2.0, alpha_x = 2.0;
  int failed_faults = 0;

  MagnitudeProfile as_profile() const {
    return {k_v, k_th, k_delta, k_omega, k_eqp, k_edp};
  }
};

/// Sample n_f line faults (0.05 s / 0.1 s two-stage clearing), measure the
/// relative pre/post-fault changes of the external area's inputs and states,
/// and derive the per-type magnitude factors. Deterministic given the seed.
CalibrationResult calibrate_magnitudes(const PowerCase& c, int n_f, double alpha_u, double alpha_x,
                                       std::uint64_t seed, double ode_tol = 1e-6);

/// Solve A X + X A^T + Q = 0 by complex Schur reduction; requires
/// lambda_i(A) + lambda_j(A) != 0 for all pairs.
MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q);

/// Finite-difference linearization of a system at (x0, u0).
struct LinearizedSystem {
  MatrixXd a, b, c;
};
LinearizedSystem linearize(const DynamicalSystem& sys, const VectorXd& x0, const VectorXd& u0);

/// Gramians of the linearized scaled system, the baseline route. Frozen
/// coordinates (identified by `frozen`) are excluded from the Lyapunov solves
/// and zero-padded back in; their infinite-horizon observability is undefined.
CovariancePair linearized_covariance_pair(const ScaledSystem& ss, const std::vector<bool>& frozen);

}  // namespace gridred

#endif  // GRIDRED_GRAMIANS_HPP
