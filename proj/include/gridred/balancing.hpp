#ifndef GRIDRED_BALANCING_HPP
#define GRIDRED_BALANCING_HPP

#include <string>

#include "gridred/gramians.hpp"
#include "gridred/matrixio.hpp"
#include "gridred/types.hpp"

namespace gridred {

/// Coordinate change balancing a covariance pair, with the transformed
/// covariances in the four-block controllable/observable form. Convention:
/// W_c_bal = T W_c T^T and W_o_bal = T^{-T} W_o T^{-1}.
struct BalancedReduction {
  MatrixXd t, t_inv;
  VectorXd hankel;   // eigenvalues of W_o_bal * W_c_bal, descending
  VectorXd sigma1;   // jointly controllable and observable block
  VectorXd sigma3;   // observable-only block
  int n1 = 0, n2 = 0, n3 = 0;  // block sizes: both, controllable-only, observable-only
  int n_red = -1;    // retained order; -1 until truncated
  VectorXd xbar_ss;  // transformed scaled steady state, full length
  VectorXd tx, tu;   // scaling diagonals carried from the covariance pair
  std::string method;  // "nm", "lm", or "laub"

  int n() const { return static_cast<int>(hankel.size()); }
  VectorXd xbar_tail() const {
    if (n_red < 0) throw ConfigError("reduction is not truncated yet");
    return xbar_ss.tail(n() - n_red);
  }
};

/// The four-step balancing transformation, tolerant of rank-deficient
/// covariances. n_red is left unset.
BalancedReduction balance(const CovariancePair& cov);

/// Square-root balancing from Cholesky factors and one SVD. Requires both
/// matrices to be positive definite; a Cholesky or rank failure is reported
/// as a non-minimal system.
BalancedReduction balance_laub(const CovariancePair& cov);

BalancedReduction truncate(BalancedReduction bal, double cutoff);
BalancedReduction truncate_to(BalancedReduction bal, int n_red);

inline constexpr double kDefaultHankelCutoff = 1e-5;

/// Retained-coordinate derivative of the Galerkin-projected system:
/// the full scaled RHS evaluated with the truncated tail frozen at its
/// steady-state values, projected onto the first n_red balanced coordinates.
VectorXd reduced_rhs(const BalancedReduction& bal, const ScaledSystem& ss, const VectorXd& xbar1,
                     const VectorXd& u_scaled);

/// Original-coordinate state reconstructed from retained coordinates.
VectorXd reduced_to_full(const BalancedReduction& bal, const VectorXd& xbar1);

/// Retained initial condition for a full-state scaled start.
VectorXd project_initial(const BalancedReduction& bal, const VectorXd& x_scaled);

TextDocument reduction_to_document(const BalancedReduction& bal);
BalancedReduction reduction_from_document(const TextDocument& doc);

TextDocument covariance_to_document(const CovariancePair& pair);
CovariancePair covariance_from_document(const TextDocument& doc);

}  // namespace gridred

#endif  // GRIDRED_BALANCING_HPP
