#include "support/oracles.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "gridred/network.hpp"

namespace gridred::testing {

MatrixXd lyapunov_kron(const MatrixXd& a, const MatrixXd& q) {
  const int n = static_cast<int>(a.rows());
  MatrixXd big = MatrixXd::Zero(n * n, n * n);
  // vec(A X + X A^T) = (I kron A + A kron I) vec(X), column-major vec.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        big(j * n + i, j * n + k) += a(i, k);  // A X
        big(j * n + i, k * n + i) += a(j, k);  // X A^T
      }
  VectorXd rhs(n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) rhs(j * n + i) = -q(i, j);
  const VectorXd x = big.fullPivLu().solve(rhs);
  MatrixXd out(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) out(i, j) = x(j * n + i);
  return 0.5 * (out + out.transpose());
}

DynamicalSystem LinearTestSystem::system() const {
  DynamicalSystem sys;
  sys.n = static_cast<int>(a.rows());
  sys.v = static_cast<int>(b.cols());
  sys.p = static_cast<int>(c.rows());
  const MatrixXd aa = a, bb = b, cc = c;
  sys.f = [aa, bb](const VectorXd& x, const VectorXd& u) -> VectorXd { return aa * x + bb * u; };
  sys.h = [cc](const VectorXd& x, const VectorXd&) -> VectorXd { return cc * x; };
  return sys;
}

LinearTestSystem random_stable_system(int n, int v, int p, Rng& rng) {
  VectorXd lambda(n);
  for (int i = 0; i < n; ++i) lambda(i) = -rng.uniform(0.5, 3.0);
  MatrixXd s = MatrixXd::Identity(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s(i, j) += 0.3 * (rng.uniform() - 0.5);
  LinearTestSystem sys;
  sys.a = s * lambda.asDiagonal() * s.inverse();
  sys.b.resize(n, v);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < v; ++j) sys.b(i, j) = rng.uniform(-1.0, 1.0);
  sys.c.resize(p, n);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < n; ++j) sys.c(i, j) = rng.uniform(-1.0, 1.0);
  return sys;
}

MatrixXd random_psd(int n, int rank, Rng& rng, double scale) {
  MatrixXd g(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = scale * rng.uniform(-1.0, 1.0);
  return g * g.transpose();
}

DenseReduction dense_eliminate(const AreaView& area, const NetworkConfig& config) {
  const int nb = area.n_buses();
  const int ng = area.n_machines();
  const int nz = area.n_zip();
  const int np = area.n_pseudo();
  const int ntot = nb + ng;

  // Assemble from scratch with plain loops.
  MatrixXcd y = MatrixXcd::Zero(ntot, ntot);
  std::set<int> removed(config.removed_branches.begin(), config.removed_branches.end());
  for (const auto& br : area.branches) {
    if (removed.count(br.id)) continue;
    const Complex ys = 1.0 / br.z;
    y(br.from, br.from) += ys + Complex(0, br.b_shunt / 2);
    y(br.to, br.to) += ys + Complex(0, br.b_shunt / 2);
    y(br.from, br.to) -= ys;
    y(br.to, br.from) -= ys;
  }
  for (int i = 0; i < nb; ++i) {
    const Bus& bus = area.buses[i];
    if (bus.p_load != 0 || bus.q_load != 0)
      y(i, i) += std::conj(Complex(bus.p_load, bus.q_load)) / std::norm(bus.v0);
  }
  for (const auto& z : area.zip_loads)
    y(z.bus, z.bus) += std::conj(Complex(z.p1 * z.p0, z.q1 * z.q0)) / std::norm(z.v_nc0);
  for (const auto& [bus, adm] : config.extra_shunts) y(bus, bus) += adm;
  for (int k = 0; k < ng; ++k) {
    const Machine& m = area.machines[k];
    const Complex ym = 1.0 / Complex(0.0, m.xp_d * area.base_mva / m.s_n);
    y(m.bus, m.bus) += ym;
    y(nb + k, nb + k) += ym;
    y(m.bus, nb + k) -= ym;
    y(nb + k, m.bus) -= ym;
  }

  std::vector<int> src, zip, elim;
  for (int k = 0; k < ng; ++k) src.push_back(nb + k);
  for (const auto& ps : area.pseudo) src.push_back(ps.local_bus);
  std::set<int> zset;
  for (const auto& z : area.zip_loads) {
    zip.push_back(z.bus);
    zset.insert(z.bus);
  }
  std::set<int> sset(src.begin(), src.end());
  for (int i = 0; i < nb; ++i)
    if (!sset.count(i) && !zset.count(i)) elim.push_back(i);

  auto pick = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    MatrixXcd m(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < cols.size(); ++j) m(i, j) = y(rows[i], cols[j]);
    return m;
  };
  const MatrixXcd yee_inv = pick(elim, elim).inverse();

  DenseReduction d;
  d.y_g = pick(src, src) - pick(src, elim) * yee_inv * pick(elim, src);
  d.y_gnc = pick(src, zip) - pick(src, elim) * yee_inv * pick(elim, zip);
  d.y_ncg = pick(zip, src) - pick(zip, elim) * yee_inv * pick(elim, src);
  d.y_nc = pick(zip, zip) - pick(zip, elim) * yee_inv * pick(elim, zip);

  const int nrec = nb - nz;
  d.r_g = MatrixXcd::Zero(nrec, ng + np);
  d.r_nc = MatrixXcd::Zero(nrec, nz);
  int row = 0;
  for (int i = 0; i < nb; ++i) {
    if (zset.count(i)) continue;
    const auto it = std::find(elim.begin(), elim.end(), i);
    if (it != elim.end()) {
      const int e = static_cast<int>(it - elim.begin());
      d.r_g.row(row) = (-yee_inv * pick(elim, src)).row(e);
      d.r_nc.row(row) = (-yee_inv * pick(elim, zip)).row(e);
    } else {
      for (const auto& ps : area.pseudo)
        if (ps.local_bus == i) d.r_g(row, ng + ps.tie_index) = 1.0;
    }
    ++row;
  }
  return d;
}

Complex scalar_nc_oracle(const NetworkMatrices& mats, const std::vector<ZipLoad>& zips,
                         const VectorXcd& psi) {
  auto resid = [&](Complex v) {
    VectorXcd vv(1);
    vv(0) = v;
    return std::abs(nc_residual(mats, zips, psi, vv)(0));
  };
  // Coarse grid over a generous region of the complex plane, then shrink.
  double cx = 1.0, cy = 0.0, half = 1.2;
  Complex best(1.0, 0.0);
  for (int round = 0; round < 14; ++round) {
    double fbest = std::numeric_limits<double>::max();
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j) {
        const Complex v(cx + half * i / 20.0, cy + half * j / 20.0);
        if (std::abs(v) < 1e-3) continue;
        const double f = resid(v);
        if (f < fbest) {
          fbest = f;
          best = v;
        }
      }
    cx = best.real();
    cy = best.imag();
    half *= 0.12;
  }
  return best;
}

}  // namespace gridred::testing
