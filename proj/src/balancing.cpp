#include "gridred/balancing.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace gridred {

namespace {

constexpr double kRankTol = 1e-10;  // relative to the largest eigenvalue

struct SymEig {
  VectorXd values;  // descending
  MatrixXd vectors; // columns, sign-fixed
};

// Symmetric eigendecomposition, descending order, each eigenvector's first
// component of magnitude > 1e-12 made positive so the transformation is
// deterministic.
SymEig sym_eig_desc(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(m);
  if (eig.info() != Eigen::Success) throw NumericalError("symmetric eigendecomposition failed");
  const int n = static_cast<int>(m.rows());
  SymEig out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (int i = 0; i < n; ++i) {
    out.values(i) = eig.eigenvalues()(n - 1 - i);
    VectorXd v = eig.eigenvectors().col(n - 1 - i);
    for (int k = 0; k < n; ++k) {
      if (std::abs(v(k)) > 1e-12) {
        if (v(k) < 0) v = -v;
        break;
      }
    }
    out.vectors.col(i) = v;
  }
  return out;
}

int rank_by_tol(const VectorXd& descending) {
  if (descending.size() == 0) return 0;
  const double lmax = descending(0);
  if (!(lmax > 0)) return 0;
  int r = 0;
  while (r < descending.size() && descending(r) > kRankTol * lmax) ++r;
  return r;
}

VectorXd hankel_of_product(const MatrixXd& wo_bal, const MatrixXd& wc_bal) {
  const Eigen::VectorXcd ev = (wo_bal * wc_bal).eigenvalues();
  VectorXd h = ev.real();
  std::sort(h.data(), h.data() + h.size(), std::greater<double>());
  for (int i = 0; i < h.size(); ++i)
    if (std::abs(h(i)) < 1e-14) h(i) = 0.0;
  return h;
}

}  // namespace

BalancedReduction balance(const CovariancePair& cov) {
  check_covariance(cov.w_c, "controllability covariance");
  check_covariance(cov.w_o, "observability covariance");
  const int n = static_cast<int>(cov.w_c.rows());
  if (cov.w_o.rows() != n) throw ConfigError("covariance dimensions do not match");

  // Step 1: T1 maps W_c to diag(I_nc, 0).
  const SymEig ec = sym_eig_desc(cov.w_c);
  const int nc = rank_by_tol(ec.values);
  MatrixXd t1(n, n), t1_inv(n, n);
  for (int i = 0; i < nc; ++i) {
    const double s = std::sqrt(ec.values(i));
    t1.row(i) = ec.vectors.col(i).transpose() / s;
    t1_inv.col(i) = ec.vectors.col(i) * s;
  }
  for (int i = nc; i < n; ++i) {
    t1.row(i) = ec.vectors.col(i).transpose();
    t1_inv.col(i) = ec.vectors.col(i);
  }

  // Step 2: diagonalize the controllable block of the transformed W_o.
  const MatrixXd wo1 = t1_inv.transpose() * cov.w_o * t1_inv;
  int n1 = 0;
  MatrixXd t2 = MatrixXd::Identity(n, n), t2_inv = MatrixXd::Identity(n, n);
  VectorXd sigma1(0);
  if (nc > 0) {
    const SymEig eo = sym_eig_desc(wo1.topLeftCorner(nc, nc));
    n1 = rank_by_tol(eo.values);
    sigma1 = eo.values.head(n1).cwiseSqrt();
    t2.topLeftCorner(nc, nc) = eo.vectors.transpose();
    t2_inv.topLeftCorner(nc, nc) = eo.vectors;
  }

  const MatrixXd wo2 = t2_inv.transpose() * wo1 * t2_inv;

  // Step 3: clear the coupling between the balanced block and the
  // uncontrollable part.
  MatrixXd t3 = MatrixXd::Identity(n, n), t3_inv = MatrixXd::Identity(n, n);
  if (n1 > 0 && n > nc) {
    const MatrixXd w12 = wo2.block(0, nc, n1, n - nc);
    const VectorXd s1sq_inv = sigma1.array().square().inverse();
    const MatrixXd e = s1sq_inv.asDiagonal() * w12;
    t3.block(0, nc, n1, n - nc) = e;
    t3_inv.block(0, nc, n1, n - nc) = -e;
  }
  const MatrixXd wo3 = t3_inv.transpose() * wo2 * t3_inv;

  // Step 4: diagonalize the observable-uncontrollable block and normalize the
  // balanced block to sigma1.
  MatrixXd t4 = MatrixXd::Identity(n, n), t4_inv = MatrixXd::Identity(n, n);
  int n3 = 0;
  VectorXd sigma3(0);
  if (n1 > 0) {
    const VectorXd s1h = sigma1.cwiseSqrt();
    t4.topLeftCorner(n1, n1) = s1h.asDiagonal();
    t4_inv.topLeftCorner(n1, n1) = s1h.cwiseInverse().asDiagonal();
  }
  if (n > nc) {
    const SymEig e22 = sym_eig_desc(wo3.block(nc, nc, n - nc, n - nc));
    n3 = rank_by_tol(e22.values);
    sigma3 = e22.values.head(n3);
    t4.block(nc, nc, n - nc, n - nc) = e22.vectors.transpose();
    t4_inv.block(nc, nc, n - nc, n - nc) = e22.vectors;
  }

  BalancedReduction bal;
  bal.t = t4 * t3 * t2 * t1;
  bal.t_inv = t1_inv * t2_inv * t3_inv * t4_inv;
  bal.n1 = n1;
  bal.n2 = nc - n1;
  bal.n3 = n3;
  bal.sigma1 = sigma1;
  bal.sigma3 = sigma3;
  bal.method = "nm";
  bal.tx = cov.tx;
  bal.tu = cov.tu;
  if (cov.x0_scaled.size() == n)
    bal.xbar_ss = bal.t * cov.x0_scaled;
  else
    bal.xbar_ss = VectorXd::Zero(n);

  const MatrixXd wc_bal = bal.t * cov.w_c * bal.t.transpose();
  const MatrixXd wo_bal = bal.t_inv.transpose() * cov.w_o * bal.t_inv;
  bal.hankel = hankel_of_product(wo_bal, wc_bal);
  return bal;
}

BalancedReduction balance_laub(const CovariancePair& cov) {
  const int n = static_cast<int>(cov.w_c.rows());
  Eigen::LLT<MatrixXd> llt_c(cov.w_c);
  Eigen::LLT<MatrixXd> llt_o(cov.w_o);
  if (llt_c.info() != Eigen::Success || llt_o.info() != Eigen::Success)
    throw NumericalError(
        "non-minimal system: covariance is not positive definite, square-root balancing is not "
        "applicable");
  const MatrixXd l_c = llt_c.matrixL();
  const MatrixXd l_o = llt_o.matrixL();

  Eigen::JacobiSVD<MatrixXd> svd(l_o.transpose() * l_c, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const VectorXd lambda = svd.singularValues();
  if (lambda(n - 1) < 1e-12 * lambda(0))
    throw NumericalError("non-minimal system: vanishing Hankel value in square-root balancing");

  // The balancing map is x_bal = Lambda^{1/2} V^T L_c^{-1} x; its inverse is
  // the printed L_c V Lambda^{-1/2}.
  const MatrixXd t_print =
      l_c * svd.matrixV() * lambda.cwiseSqrt().cwiseInverse().asDiagonal();
  const MatrixXd l_c_inv = l_c.triangularView<Eigen::Lower>().solve(MatrixXd::Identity(n, n));
  const MatrixXd t = lambda.cwiseSqrt().asDiagonal() * svd.matrixV().transpose() * l_c_inv;

  BalancedReduction bal;
  bal.t = t;
  bal.t_inv = t_print;
  bal.n1 = n;
  bal.n2 = 0;
  bal.n3 = 0;
  bal.sigma1 = lambda;
  bal.sigma3 = VectorXd(0);
  bal.method = "laub";
  bal.tx = cov.tx;
  bal.tu = cov.tu;
  if (cov.x0_scaled.size() == n)
    bal.xbar_ss = bal.t * cov.x0_scaled;
  else
    bal.xbar_ss = VectorXd::Zero(n);

  const MatrixXd wc_bal = bal.t * cov.w_c * bal.t.transpose();
  const MatrixXd wo_bal = bal.t_inv.transpose() * cov.w_o * bal.t_inv;
  bal.hankel = hankel_of_product(wo_bal, wc_bal);
  return bal;
}

BalancedReduction truncate(BalancedReduction bal, double cutoff) {
  int n_red = 0;
  while (n_red < bal.hankel.size() && bal.hankel(n_red) > cutoff) ++n_red;
  if (n_red == 0)
    throw NumericalError("truncation cutoff " + std::to_string(cutoff) + " retains no states");
  bal.n_red = n_red;
  return bal;
}

BalancedReduction truncate_to(BalancedReduction bal, int n_red) {
  if (n_red < 1 || n_red > bal.n()) throw ConfigError("explicit n_red out of range");
  bal.n_red = n_red;
  return bal;
}

VectorXd reduced_rhs(const BalancedReduction& bal, const ScaledSystem& ss, const VectorXd& xbar1,
                     const VectorXd& u_scaled) {
  if (bal.n_red < 0) throw ConfigError("reduced_rhs needs a truncated reduction");
  VectorXd xbar(bal.n());
  xbar << xbar1, bal.xbar_ss.tail(bal.n() - bal.n_red);
  const VectorXd x_scaled = bal.t_inv * xbar;
  const VectorXd dx_scaled = ss.sys.f(x_scaled, u_scaled);
  return (bal.t * dx_scaled).head(bal.n_red);
}

VectorXd reduced_to_full(const BalancedReduction& bal, const VectorXd& xbar1) {
  if (bal.n_red < 0) throw ConfigError("reduction is not truncated yet");
  VectorXd xbar(bal.n());
  xbar << xbar1, bal.xbar_ss.tail(bal.n() - bal.n_red);
  const VectorXd x_scaled = bal.t_inv * xbar;
  return bal.tx.cwiseProduct(x_scaled);
}

VectorXd project_initial(const BalancedReduction& bal, const VectorXd& x_scaled) {
  if (bal.n_red < 0) throw ConfigError("reduction is not truncated yet");
  return (bal.t * x_scaled).head(bal.n_red);
}

TextDocument reduction_to_document(const BalancedReduction& bal) {
  TextDocument doc;
  doc.meta["kind"] = "reduction";
  doc.meta["method"] = bal.method;
  doc.meta["n_red"] = std::to_string(bal.n_red);
  doc.meta["blocks"] =
      std::to_string(bal.n1) + " " + std::to_string(bal.n2) + " " + std::to_string(bal.n3);
  doc.matrices["T"] = bal.t;
  doc.matrices["T_inv"] = bal.t_inv;
  doc.vectors["hankel"] = bal.hankel;
  doc.vectors["sigma1"] = bal.sigma1;
  doc.vectors["sigma3"] = bal.sigma3;
  doc.vectors["xbar_ss"] = bal.xbar_ss;
  doc.vectors["tx"] = bal.tx;
  doc.vectors["tu"] = bal.tu;
  return doc;
}

BalancedReduction reduction_from_document(const TextDocument& doc) {
  BalancedReduction bal;
  bal.method = doc.meta_at("method");
  bal.n_red = static_cast<int>(doc.meta_num("n_red"));
  {
    std::istringstream ss(doc.meta_at("blocks"));
    ss >> bal.n1 >> bal.n2 >> bal.n3;
  }
  bal.t = doc.matrix("T");
  bal.t_inv = doc.matrix("T_inv");
  bal.hankel = doc.vector("hankel");
  bal.sigma1 = doc.vector("sigma1");
  bal.sigma3 = doc.vector("sigma3");
  bal.xbar_ss = doc.vector("xbar_ss");
  bal.tx = doc.vector("tx");
  bal.tu = doc.vector("tu");
  if ((bal.t * bal.t_inv - MatrixXd::Identity(bal.t.rows(), bal.t.cols())).cwiseAbs().maxCoeff() >
      1e-6)
    throw ConfigError("reduction document: T and T_inv are not inverses");
  return bal;
}

TextDocument covariance_to_document(const CovariancePair& pair) {
  TextDocument doc;
  doc.meta["kind"] = "covariance";
  doc.meta["scheme"] = pair.scheme_summary;
  doc.matrices["W_c"] = pair.w_c;
  doc.matrices["W_o"] = pair.w_o;
  doc.vectors["tx"] = pair.tx;
  doc.vectors["tu"] = pair.tu;
  doc.vectors["x0_scaled"] = pair.x0_scaled;
  doc.vectors["u0_scaled"] = pair.u0_scaled;
  return doc;
}

CovariancePair covariance_from_document(const TextDocument& doc) {
  CovariancePair pair;
  pair.w_c = doc.matrix("W_c");
  pair.w_o = doc.matrix("W_o");
  pair.tx = doc.vector("tx");
  pair.tu = doc.vector("tu");
  pair.x0_scaled = doc.vector("x0_scaled");
  pair.u0_scaled = doc.vector("u0_scaled");
  pair.scheme_summary = doc.meta.count("scheme") ? doc.meta.at("scheme") : "";
  if (pair.w_o.rows() != pair.w_c.rows())
    throw ConfigError("covariance document has mismatched matrix dimensions");
  return pair;
}

}  // namespace gridred
