#include "gridred/network.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace gridred {

NetworkConfig stage_config(const AreaView& area, const FaultSpec& fault, FaultStage stage) {
  NetworkConfig cfg;
  if (stage == FaultStage::Pre) return cfg;
  const Branch* br = nullptr;
  for (const auto& b : area.branches)
    if (b.id == fault.branch_id) br = &b;
  if (br == nullptr) return cfg;  // fault is outside this area

  const int near_case = fault.bus_id;
  const int near_local = area.local_bus(near_case);
  if (near_local != br->from && near_local != br->to)
    throw ConfigError("fault bus " + std::to_string(fault.bus_id) + " is not an endpoint of branch " +
                      std::to_string(fault.branch_id));
  const int remote_local = (near_local == br->from) ? br->to : br->from;

  switch (stage) {
    case FaultStage::On:
      cfg.extra_shunts.emplace_back(near_local, Complex(kFaultShunt, 0.0));
      break;
    case FaultStage::NearCleared:
      // Near breaker open: the line hangs off the remote bus with the fault
      // shorting its far end.
      cfg.removed_branches.push_back(br->id);
      cfg.extra_shunts.emplace_back(remote_local,
                                    1.0 / br->z + Complex(0.0, br->b_shunt / 2.0));
      break;
    case FaultStage::Post:
      cfg.removed_branches.push_back(br->id);
      break;
    default:
      break;
  }
  return cfg;
}

MatrixXcd assemble_bus_y(const AreaView& area, const NetworkConfig& config) {
  const int nb = area.n_buses();
  MatrixXcd y = MatrixXcd::Zero(nb, nb);
  std::set<int> removed(config.removed_branches.begin(), config.removed_branches.end());

  for (const auto& b : area.branches) {
    if (removed.count(b.id)) continue;
    const Complex ys = 1.0 / b.z;
    const Complex ysh(0.0, b.b_shunt / 2.0);
    y(b.from, b.from) += ys + ysh;
    y(b.to, b.to) += ys + ysh;
    y(b.from, b.to) -= ys;
    y(b.to, b.from) -= ys;
  }
  for (const auto& b : area.buses) {
    if (b.p_load == 0.0 && b.q_load == 0.0) continue;
    const int i = area.local_bus(b.id);
    const double v2 = std::norm(b.v0);
    y(i, i) += Complex(b.p_load, -b.q_load) / v2;
  }
  for (const auto& z : area.zip_loads) {
    const double v2 = std::norm(z.v_nc0);
    y(z.bus, z.bus) += Complex(z.p1 * z.p0, -z.q1 * z.q0) / v2;
  }
  for (const auto& [bus, adm] : config.extra_shunts) y(bus, bus) += adm;
  return y;
}

NetworkMatrices build_matrices(const AreaView& area, const NetworkConfig& config) {
  const int nb = area.n_buses();
  const int ng = area.n_machines();
  const int np = area.n_pseudo();
  const int nz = area.n_zip();
  const int nsrc = ng + np;
  const int ntot = nb + ng;  // buses plus machine internal nodes

  MatrixXcd y = MatrixXcd::Zero(ntot, ntot);
  y.topLeftCorner(nb, nb) = assemble_bus_y(area, config);

  // Machines enter behind their transient reactance, converted from machine
  // base to system base.
  for (int k = 0; k < ng; ++k) {
    const Machine& m = area.machines[k];
    const double xp_sys = m.xp_d * area.base_mva / m.s_n;
    const Complex ym = 1.0 / Complex(0.0, xp_sys);
    const int t = m.bus;
    const int g = nb + k;
    y(t, t) += ym;
    y(g, g) += ym;
    y(t, g) -= ym;
    y(g, t) -= ym;
  }

  // Node partition: sources (machine internal nodes, then pseudo buses),
  // ZIP buses, eliminated buses.
  std::vector<int> src_nodes;
  for (int k = 0; k < ng; ++k) src_nodes.push_back(nb + k);
  for (const auto& ps : area.pseudo) src_nodes.push_back(ps.local_bus);

  NetworkMatrices mats;
  mats.n_machines = ng;
  mats.n_pseudo = np;
  mats.n_zip = nz;
  mats.n_buses = nb;
  mats.row_of_bus.assign(nb, -1);
  mats.zip_of_bus.assign(nb, -1);

  std::vector<int> zip_nodes;
  for (int i = 0; i < nz; ++i) {
    zip_nodes.push_back(area.zip_loads[i].bus);
    mats.zip_of_bus[area.zip_loads[i].bus] = i;
  }

  std::set<int> retained(src_nodes.begin(), src_nodes.end());
  for (int n : zip_nodes) {
    if (retained.count(n))
      throw ConfigError("ZIP bus " + std::to_string(area.case_bus_ids[n]) +
                        " coincides with a source node");
    retained.insert(n);
  }
  std::vector<int> elim_nodes;
  for (int i = 0; i < nb; ++i)
    if (!retained.count(i)) elim_nodes.push_back(i);

  const int ne = static_cast<int>(elim_nodes.size());
  auto gather = [&](const std::vector<int>& rows, const std::vector<int>& cols) {
    MatrixXcd m(rows.size(), cols.size());
    for (size_t i = 0; i < rows.size(); ++i)
      for (size_t j = 0; j < cols.size(); ++j) m(i, j) = y(rows[i], cols[j]);
    return m;
  };

  const MatrixXcd y_ss = gather(src_nodes, src_nodes);
  const MatrixXcd y_sz = gather(src_nodes, zip_nodes);
  const MatrixXcd y_se = gather(src_nodes, elim_nodes);
  const MatrixXcd y_zs = gather(zip_nodes, src_nodes);
  const MatrixXcd y_zz = gather(zip_nodes, zip_nodes);
  const MatrixXcd y_ze = gather(zip_nodes, elim_nodes);
  const MatrixXcd y_es = gather(elim_nodes, src_nodes);
  const MatrixXcd y_ez = gather(elim_nodes, zip_nodes);
  const MatrixXcd y_ee = gather(elim_nodes, elim_nodes);

  MatrixXcd x_s(ne, nsrc), x_z(ne, nz);
  if (ne > 0) {
    for (int i = 0; i < ne; ++i) {
      if (y_ee.row(i).cwiseAbs().maxCoeff() == 0.0)
        throw NumericalError("islanded bus " +
                             std::to_string(area.case_bus_ids[elim_nodes[i]]) +
                             ": interior admittance block is singular");
    }
    Eigen::FullPivLU<MatrixXcd> lu(y_ee);
    if (!lu.isInvertible()) {
      // Name the weakest-coupled bus; the exact culprit is not recoverable
      // from a rank-deficient factorization.
      int worst = 0;
      double wmin = std::numeric_limits<double>::max();
      for (int i = 0; i < ne; ++i) {
        const double s = y_ee.row(i).cwiseAbs().sum();
        if (s < wmin) {
          wmin = s;
          worst = i;
        }
      }
      throw NumericalError("interior admittance block is singular near bus " +
                           std::to_string(area.case_bus_ids[elim_nodes[worst]]));
    }
    x_s = lu.solve(y_es);
    x_z = lu.solve(y_ez);
  }

  mats.y_g = y_ss - (ne > 0 ? MatrixXcd(y_se * x_s) : MatrixXcd::Zero(nsrc, nsrc));
  mats.y_gnc = y_sz - (ne > 0 ? MatrixXcd(y_se * x_z) : MatrixXcd::Zero(nsrc, nz));
  mats.y_ncg = y_zs - (ne > 0 ? MatrixXcd(y_ze * x_s) : MatrixXcd::Zero(nz, nsrc));
  mats.y_nc = y_zz - (ne > 0 ? MatrixXcd(y_ze * x_z) : MatrixXcd::Zero(nz, nz));

  // Reconstruction rows: eliminated buses from the Schur solve, pseudo buses
  // as unit selectors of the input sources.
  const int nrec = nb - nz;
  mats.r_g = MatrixXcd::Zero(nrec, nsrc);
  mats.r_nc = MatrixXcd::Zero(nrec, nz);
  int row = 0;
  for (int i = 0; i < nb; ++i) {
    if (mats.zip_of_bus[i] >= 0) continue;
    mats.row_of_bus[i] = row;
    const auto it = std::find(elim_nodes.begin(), elim_nodes.end(), i);
    if (it != elim_nodes.end()) {
      const int e = static_cast<int>(it - elim_nodes.begin());
      mats.r_g.row(row) = -x_s.row(e);
      mats.r_nc.row(row) = -x_z.row(e);
    } else {
      // A pseudo-source bus: its voltage is the corresponding input source.
      bool found = false;
      for (const auto& ps : area.pseudo) {
        if (ps.local_bus == i) {
          mats.r_g(row, ng + ps.tie_index) = 1.0;
          found = true;
        }
      }
      if (!found)
        throw NumericalError("retained bus " + std::to_string(area.case_bus_ids[i]) +
                             " is neither eliminated nor a pseudo source");
    }
    ++row;
  }

  if (!mats.y_g.allFinite() || !mats.y_gnc.allFinite() || !mats.y_ncg.allFinite() ||
      !mats.y_nc.allFinite() || !mats.r_g.allFinite() || !mats.r_nc.allFinite())
    throw NumericalError("non-finite entries in reduced network matrices");
  return mats;
}

VectorXcd zip_injection_current(const std::vector<ZipLoad>& zips, const VectorXcd& v_nc) {
  const int nz = static_cast<int>(zips.size());
  VectorXcd inj(nz);
  for (int i = 0; i < nz; ++i) {
    const ZipLoad& z = zips[i];
    const Complex v = v_nc(i);
    const double r = std::abs(v);
    const double v0 = std::abs(z.v_nc0);
    if (r > 0.5) {
      const Complex a(z.p3 * z.p0, z.q3 * z.q0);
      const Complex b(z.p2 * z.p0 / v0, z.q2 * z.q0 / v0);
      inj(i) = -std::conj((a + b * r) / v);
    } else {
      const Complex s((z.p2 + z.p3) * z.p0, (z.q2 + z.q3) * z.q0);
      inj(i) = -std::conj(s / (v0 * v0)) * v;
    }
  }
  return inj;
}

VectorXcd nc_residual(const NetworkMatrices& mats, const std::vector<ZipLoad>& zips,
                      const VectorXcd& psi, const VectorXcd& v_nc) {
  return mats.y_ncg * psi + mats.y_nc * v_nc - zip_injection_current(zips, v_nc);
}

namespace {

// d(injection)/d(Re V, Im V) for one ZIP bus, as a real 2x2 block.
Eigen::Matrix2d zip_injection_jacobian(const ZipLoad& z, Complex v) {
  const double r = std::abs(v);
  const double v0 = std::abs(z.v_nc0);
  Complex didu, didv;
  if (r > 0.5) {
    const Complex a = std::conj(Complex(z.p3 * z.p0, z.q3 * z.q0));
    const Complex b = std::conj(Complex(z.p2 * z.p0 / v0, z.q2 * z.q0 / v0));
    const Complex w = std::conj(v);
    const Complex g = (a + b * r) / w;
    const Complex dgdu = b * (v.real() / r) / w - g / w;
    const Complex dgdv = b * (v.imag() / r) / w + Complex(0, 1) * g / w;
    didu = -dgdu;
    didv = -dgdv;
  } else {
    const Complex c = -std::conj(Complex((z.p2 + z.p3) * z.p0, (z.q2 + z.q3) * z.q0)) / (v0 * v0);
    didu = c;
    didv = Complex(0, 1) * c;
  }
  Eigen::Matrix2d j;
  j << didu.real(), didv.real(), didu.imag(), didv.imag();
  return j;
}

}  // namespace

VectorXcd solve_nc_voltages(const NetworkMatrices& mats, const VectorXcd& psi,
                            const std::vector<ZipLoad>& zips, const VectorXcd& guess, double tol,
                            int max_iter, NcSolveReport* report) {
  const int nz = static_cast<int>(zips.size());
  if (nz == 0) {
    if (report) *report = {};
    return VectorXcd(0);
  }
  if (!guess.allFinite()) throw NumericalError("non-finite initial guess for ZIP voltages");

  VectorXcd v = guess;
  const VectorXcd rhs_fixed = mats.y_ncg * psi;

  // Real 2x2 blocks of the linear part, fixed across iterations.
  MatrixXd j_lin(2 * nz, 2 * nz);
  for (int i = 0; i < nz; ++i)
    for (int k = 0; k < nz; ++k) {
      const Complex yy = mats.y_nc(i, k);
      j_lin(2 * i, 2 * k) = yy.real();
      j_lin(2 * i, 2 * k + 1) = -yy.imag();
      j_lin(2 * i + 1, 2 * k) = yy.imag();
      j_lin(2 * i + 1, 2 * k + 1) = yy.real();
    }

  auto eval = [&](const VectorXcd& vv) -> VectorXcd {
    return rhs_fixed + mats.y_nc * vv - zip_injection_current(zips, vv);
  };

  VectorXcd f = eval(v);
  double fnorm = f.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < max_iter && fnorm >= tol; ++it) {
    MatrixXd j = j_lin;
    for (int i = 0; i < nz; ++i)
      j.block<2, 2>(2 * i, 2 * i) -= zip_injection_jacobian(zips[i], v(i));

    Eigen::FullPivLU<MatrixXd> lu(j);
    if (!lu.isInvertible())
      throw NumericalError("ZIP Newton: singular Jacobian at iteration " + std::to_string(it));
    VectorXd fr(2 * nz);
    for (int i = 0; i < nz; ++i) {
      fr(2 * i) = f(i).real();
      fr(2 * i + 1) = f(i).imag();
    }
    const VectorXd dx = lu.solve(-fr);

    double step = 1.0;
    for (int bt = 0; bt < 5; ++bt) {
      VectorXcd cand = v;
      for (int i = 0; i < nz; ++i) cand(i) += step * Complex(dx(2 * i), dx(2 * i + 1));
      const VectorXcd fc = eval(cand);
      const double fcn = fc.cwiseAbs().maxCoeff();
      if (fcn < fnorm || bt == 4) {
        v = cand;
        f = fc;
        fnorm = fcn;
        break;
      }
      step *= 0.5;
    }
  }
  if (fnorm >= tol)
    throw NumericalError("ZIP Newton did not converge after " + std::to_string(max_iter) +
                         " iterations; residual " + std::to_string(fnorm));

  const double recheck = nc_residual(mats, zips, psi, v).cwiseAbs().maxCoeff();
  if (report) {
    report->iterations = it;
    report->residual = recheck;
  }
  return v;
}

VectorXcd reconstruct_voltages(const NetworkMatrices& mats, const VectorXcd& psi_state,
                               const VectorXcd& psi_input, const VectorXcd& v_nc) {
  if (psi_state.size() != mats.n_machines || psi_input.size() != mats.n_pseudo ||
      v_nc.size() != mats.n_zip)
    throw NumericalError("reconstruct_voltages: dimension mismatch");
  VectorXcd psi(mats.n_sources());
  psi << psi_state, psi_input;
  const VectorXcd rec = mats.r_g * psi + mats.r_nc * v_nc;
  VectorXcd v(mats.n_buses);
  for (int i = 0; i < mats.n_buses; ++i)
    v(i) = (mats.zip_of_bus[i] >= 0) ? v_nc(mats.zip_of_bus[i]) : rec(mats.row_of_bus[i]);
  return v;
}

BoundaryState BoundaryState::zero(int p) {
  BoundaryState b;
  b.v_s = VectorXd::Zero(p);
  b.th_s = VectorXd::Zero(p);
  b.v_e = VectorXd::Zero(p);
  b.th_e = VectorXd::Zero(p);
  return b;
}

namespace {

// Boundary-bus voltages of one area given the opposite side's (V, theta).
VectorXcd area_boundary_voltages(const AreaAlgebraic& alg, const VectorXd& v_opp,
                                 const VectorXd& th_opp, VectorXcd* vnc_out) {
  const int p = static_cast<int>(v_opp.size());
  VectorXcd psi_input(p);
  for (int i = 0; i < p; ++i) psi_input(i) = std::polar(v_opp(i), th_opp(i));
  VectorXcd psi(alg.psi_state.size() + p);
  psi << alg.psi_state, psi_input;
  const VectorXcd vnc = solve_nc_voltages(*alg.mats, psi, *alg.zips, alg.vnc_guess);
  if (vnc_out) *vnc_out = vnc;
  const VectorXcd all = reconstruct_voltages(*alg.mats, alg.psi_state, psi_input, vnc);
  VectorXcd vb(alg.boundary_buses.size());
  for (size_t i = 0; i < alg.boundary_buses.size(); ++i) vb(i) = all(alg.boundary_buses[i]);
  return vb;
}

}  // namespace

BoundaryState update_boundary(const AreaAlgebraic& study, const AreaAlgebraic& external,
                              const BoundaryState& previous, double tol, int max_iter,
                              BoundaryUpdateReport* report) {
  const int p = previous.p();
  if (p == 0) {
    if (report) *report = {};
    return BoundaryState::zero(0);
  }

  // Unknowns z = [V_s; V_e; th_s; th_e].
  VectorXd z(4 * p);
  z << previous.v_s, previous.v_e, previous.th_s, previous.th_e;

  auto residual = [&](const VectorXd& zz, VectorXcd* vnc_s, VectorXcd* vnc_e) -> VectorXd {
    const VectorXd v_s = zz.segment(0, p);
    const VectorXd v_e = zz.segment(p, p);
    const VectorXd th_s = zz.segment(2 * p, p);
    const VectorXd th_e = zz.segment(3 * p, p);
    // The study area is driven by the external boundary buses and vice versa.
    const VectorXcd vb_s = area_boundary_voltages(study, v_e, th_e, vnc_s);
    const VectorXcd vb_e = area_boundary_voltages(external, v_s, th_s, vnc_e);
    VectorXd f(4 * p);
    for (int i = 0; i < p; ++i) {
      f(i) = std::abs(vb_s(i)) - v_s(i);
      f(p + i) = std::abs(vb_e(i)) - v_e(i);
      f(2 * p + i) = wrap_angle(std::arg(vb_s(i)) - th_s(i));
      f(3 * p + i) = wrap_angle(std::arg(vb_e(i)) - th_e(i));
    }
    return f;
  };

  VectorXcd vnc_s, vnc_e;
  VectorXd f = residual(z, &vnc_s, &vnc_e);
  double fnorm = f.cwiseAbs().maxCoeff();
  int it = 0;
  for (; it < max_iter && fnorm >= tol; ++it) {
    MatrixXd jac(4 * p, 4 * p);
    for (int k = 0; k < 4 * p; ++k) {
      const double eps = 1e-7 * std::max(1.0, std::abs(z(k)));
      VectorXd zp = z;
      zp(k) += eps;
      jac.col(k) = (residual(zp, nullptr, nullptr) - f) / eps;
    }
    Eigen::FullPivLU<MatrixXd> lu(jac);
    if (!lu.isInvertible())
      throw NumericalError("boundary Newton: singular Jacobian at iteration " + std::to_string(it));
    const VectorXd dz = lu.solve(-f);

    double step = 1.0;
    for (int bt = 0; bt < 5; ++bt) {
      const VectorXd cand = z + step * dz;
      const VectorXd fc = residual(cand, &vnc_s, &vnc_e);
      const double fcn = fc.cwiseAbs().maxCoeff();
      if (fcn < fnorm || bt == 4) {
        z = cand;
        f = fc;
        fnorm = fcn;
        break;
      }
      step *= 0.5;
    }
  }
  if (fnorm >= tol)
    throw NumericalError("boundary Newton did not converge after " + std::to_string(it) +
                         " iterations; residual " + std::to_string(fnorm));

  BoundaryState out;
  out.v_s = z.segment(0, p);
  out.v_e = z.segment(p, p);
  out.th_s = z.segment(2 * p, p);
  out.th_e = z.segment(3 * p, p);
  // Keep angle trajectories continuous across steps.
  for (int i = 0; i < p; ++i) {
    out.th_s(i) = unwrap_near(out.th_s(i), previous.th_s(i));
    out.th_e(i) = unwrap_near(out.th_e(i), previous.th_e(i));
  }
  if (report) {
    report->iterations = it;
    report->residual = residual(z, nullptr, nullptr).cwiseAbs().maxCoeff();
    report->vnc_s = vnc_s;
    report->vnc_e = vnc_e;
  }
  return out;
}

}  // namespace gridred
