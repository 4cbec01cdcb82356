#include "gridred/gramians.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "gridred/integrator.hpp"

namespace gridred {

DynamicalSystem area_system(const AreaDynamics& dyn, const NetworkMatrices& mats) {
  DynamicalSystem sys;
  sys.n = dyn.n_states();
  sys.v = dyn.n_inputs();
  sys.p = dyn.n_outputs();
  // Stateless closures: no warm-start cache, safe for concurrent experiments.
  sys.f = [&dyn, &mats](const VectorXd& x, const VectorXd& u) { return dyn.rhs(mats, x, u); };
  sys.h = [&dyn, &mats](const VectorXd& x, const VectorXd& u) { return dyn.outputs(mats, x, u); };
  return sys;
}

ScaledSystem scale_system(const DynamicalSystem& raw, const VectorXd& x0, const VectorXd& u0) {
  if (x0.size() != raw.n || u0.size() != raw.v)
    throw ConfigError("scale_system: steady state dimensions do not match the system");
  ScaledSystem ss;
  ss.raw = raw;
  ss.x0_raw = x0;
  ss.u0_raw = u0;
  ss.tx = x0;
  ss.tu = u0;
  for (int i = 0; i < raw.n; ++i)
    if (std::abs(ss.tx(i)) < 1e-9) {
      ss.tx(i) = 1.0;
      ss.substituted_states.push_back(i);
    }
  for (int i = 0; i < raw.v; ++i)
    if (std::abs(ss.tu(i)) < 1e-9) {
      ss.tu(i) = 1.0;
      ss.substituted_inputs.push_back(i);
    }
  ss.x0_scaled = x0.cwiseQuotient(ss.tx);
  ss.u0_scaled = u0.cwiseQuotient(ss.tu);

  const VectorXd tx = ss.tx, tu = ss.tu;
  ss.sys.n = raw.n;
  ss.sys.v = raw.v;
  ss.sys.p = raw.p;
  ss.sys.f = [raw, tx, tu](const VectorXd& xs, const VectorXd& us) -> VectorXd {
    return raw.f(tx.cwiseProduct(xs), tu.cwiseProduct(us)).cwiseQuotient(tx);
  };
  ss.sys.h = [raw, tx, tu](const VectorXd& xs, const VectorXd& us) -> VectorXd {
    return raw.h(tx.cwiseProduct(xs), tu.cwiseProduct(us));
  };
  return ss;
}

std::string PerturbationScheme::summary() const {
  std::ostringstream os;
  os << "shape=" << (shape == InputShape::Step ? "step" : "impulse") << " horizon=" << horizon
     << " dt=" << dt << " m0=";
  for (int i = 0; i < m0.size(); ++i) os << (i ? "," : "") << m0(i);
  os << " r_c=" << (t_c.empty() ? 2 : static_cast<int>(t_c.size()))
     << " r_o=" << (t_o.empty() ? 2 : static_cast<int>(t_o.size()));
  return os.str();
}

void validate_scheme(const PerturbationScheme& scheme, int n, int v) {
  if (!(scheme.horizon > 0)) throw ConfigError("scheme horizon must be > 0");
  if (!(scheme.dt > 0)) throw ConfigError("scheme dt must be > 0");
  if (scheme.m0.size() == 0) throw ConfigError("scheme magnitude set is empty");
  for (int i = 0; i < scheme.m0.size(); ++i)
    if (!(scheme.m0(i) > 0)) throw ConfigError("scheme magnitudes must be positive");
  auto check_dirs = [](const std::vector<MatrixXd>& dirs, int dim, const char* which) {
    for (const auto& t : dirs) {
      if (t.rows() != dim || t.cols() != dim)
        throw ConfigError(std::string("direction matrix in ") + which + " has wrong dimension");
      const double dev = (t.transpose() * t - MatrixXd::Identity(dim, dim)).cwiseAbs().maxCoeff();
      if (dev > 1e-12)
        throw ConfigError(std::string("direction matrix in ") + which + " is not orthonormal");
    }
  };
  check_dirs(scheme.t_c, v, "T_c");
  check_dirs(scheme.t_o, n, "T_o");
  if (scheme.ku_entry.size() != 0 && scheme.ku_entry.size() != v)
    throw ConfigError("ku_entry length does not match the input count");
  if (scheme.kx_entry.size() != 0 && scheme.kx_entry.size() != n)
    throw ConfigError("kx_entry length does not match the state count");
  for (int i = 0; i < scheme.ku_entry.size(); ++i)
    if (!(scheme.ku_entry(i) > 0)) throw ConfigError("ku factors must be positive");
  for (int i = 0; i < scheme.kx_entry.size(); ++i)
    if (!(scheme.kx_entry(i) > 0)) throw ConfigError("kx factors must be positive");
}

void check_covariance(const MatrixXd& w, const std::string& name) {
  const double asym = (w - w.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10) throw NumericalError(name + " is not symmetric; deviation " + std::to_string(asym));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(w);
  const double lmax = eig.eigenvalues().maxCoeff();
  const double lmin = eig.eigenvalues().minCoeff();
  if (lmin < -1e-8 * std::max(lmax, 0.0))
    throw NumericalError(name + " is not positive semidefinite; min eigenvalue " +
                         std::to_string(lmin));
}

namespace {

std::vector<MatrixXd> default_directions(int dim) {
  return {MatrixXd::Identity(dim, dim), -MatrixXd::Identity(dim, dim)};
}

// States at 0:dt:t_end under piecewise-constant inputs; segment boundaries
// must lie on the grid.
MatrixXd run_piecewise(const DynamicalSystem& sys, const VectorXd& x_init,
                       const std::vector<std::pair<double, VectorXd>>& segments, double t_end,
                       double dt, double tol) {
  const int k_total = static_cast<int>(std::llround(t_end / dt));
  MatrixXd states(k_total + 1, sys.n);
  states.row(0) = x_init.transpose();

  StepControl ctrl;
  ctrl.dt_pre = dt;
  ctrl.dt_post = dt;
  ctrl.tolerance = tol;

  VectorXd x = x_init;
  int row = 1;
  for (size_t s = 0; s < segments.size(); ++s) {
    const double seg_start = segments[s].first;
    const double seg_end = (s + 1 < segments.size()) ? segments[s + 1].first : t_end;
    if (seg_end <= seg_start) continue;
    const VectorXd u = segments[s].second;
    const StagedRhs f = [&sys, &u](double, const VectorXd& xx, int) { return sys.f(xx, u); };
    const Trajectory tr = integrate(f, x, seg_start, seg_end, ctrl, std::nullopt);
    for (size_t k = 1; k < tr.times.size(); ++k) {
      if (row > k_total) throw NumericalError("piecewise run overflowed the sample grid");
      states.row(row++) = tr.states.row(k);
    }
    x = tr.back();
  }
  if (row != k_total + 1) throw NumericalError("piecewise run did not fill the sample grid");
  return states;
}

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::clamp(jobs, 1, 64);
  if (jobs == 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex err_mtx;
  for (int w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int i = w; i < count; i += jobs) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

MatrixXd controllability_covariance(const ScaledSystem& ss, const PerturbationScheme& scheme) {
  const int n = ss.sys.n, v = ss.sys.v;
  validate_scheme(scheme, n, v);
  if (v == 0) return MatrixXd::Zero(n, n);

  const std::vector<MatrixXd> dirs = scheme.t_c.empty() ? default_directions(v) : scheme.t_c;
  const VectorXd ku = scheme.ku_entry.size() ? scheme.ku_entry : VectorXd::Ones(v);
  const int r = static_cast<int>(dirs.size());
  const int s = static_cast<int>(scheme.m0.size());
  const int k_total = static_cast<int>(std::llround(scheme.horizon / scheme.dt));

  struct Exp {
    int i, l, m;
  };
  std::vector<Exp> exps;
  for (int i = 0; i < v; ++i)
    for (int l = 0; l < r; ++l)
      for (int m = 0; m < s; ++m) exps.push_back({i, l, m});

  std::vector<MatrixXd> contrib(exps.size());
  std::vector<std::string> failures(exps.size());
  parallel_for(static_cast<int>(exps.size()), scheme.jobs, [&](int e) {
    const auto [i, l, m] = exps[e];
    const double c = ku(i) * scheme.m0(m);
    const VectorXd dir = dirs[l].col(i);
    std::vector<std::pair<double, VectorXd>> segments;
    if (scheme.shape == InputShape::Step) {
      segments = {{0.0, ss.u0_scaled + c * dir}};
    } else {
      // One-sample rectangular pulse of area c.
      segments = {{0.0, ss.u0_scaled + (c / scheme.dt) * dir}, {scheme.dt, ss.u0_scaled}};
    }
    MatrixXd x;
    try {
      x = run_piecewise(ss.sys, ss.x0_scaled, segments, scheme.horizon, scheme.dt, scheme.ode_tol);
    } catch (const std::exception& ex) {
      failures[e] = ex.what();
      return;
    }
    MatrixXd w = MatrixXd::Zero(n, n);
    for (int k = 0; k < k_total; ++k) {
      const VectorXd d = x.row(k).transpose() - ss.x0_scaled;
      w.noalias() += d * d.transpose();
    }
    contrib[e] = w * (scheme.dt / (static_cast<double>(r) * s * c * c));
  });

  MatrixXd w_c = MatrixXd::Zero(n, n);
  for (size_t e = 0; e < exps.size(); ++e) {
    if (!failures[e].empty())
      throw NumericalError("controllability experiment (i=" + std::to_string(exps[e].i) +
                           ", l=" + std::to_string(exps[e].l) + ", m=" + std::to_string(exps[e].m) +
                           ") failed: " + failures[e]);
    w_c += contrib[e];
  }
  return 0.5 * (w_c + w_c.transpose());
}

MatrixXd observability_covariance(const ScaledSystem& ss, const PerturbationScheme& scheme) {
  const int n = ss.sys.n, p = ss.sys.p;
  validate_scheme(scheme, n, ss.sys.v);
  if (p == 0) return MatrixXd::Zero(n, n);

  const std::vector<MatrixXd> dirs = scheme.t_o.empty() ? default_directions(n) : scheme.t_o;
  const VectorXd kx = scheme.kx_entry.size() ? scheme.kx_entry : VectorXd::Ones(n);
  const int r = static_cast<int>(dirs.size());
  const int s = static_cast<int>(scheme.m0.size());
  const int k_total = static_cast<int>(std::llround(scheme.horizon / scheme.dt));
  const VectorXd y0 = ss.sys.h(ss.x0_scaled, ss.u0_scaled);

  struct Exp {
    int i, l, m;
  };
  std::vector<Exp> exps;
  for (int l = 0; l < r; ++l)
    for (int m = 0; m < s; ++m)
      for (int i = 0; i < n; ++i) exps.push_back({i, l, m});

  // Output deviations per experiment, already divided by the magnitude.
  std::vector<MatrixXd> ydev(exps.size());
  std::vector<std::string> failures(exps.size());
  parallel_for(static_cast<int>(exps.size()), scheme.jobs, [&](int e) {
    const auto [i, l, m] = exps[e];
    const double c = kx(i) * scheme.m0(m);
    const VectorXd x_init = ss.x0_scaled + c * dirs[l].col(i);
    MatrixXd x;
    try {
      x = run_piecewise(ss.sys, x_init, {{0.0, ss.u0_scaled}}, scheme.horizon, scheme.dt,
                        scheme.ode_tol);
      MatrixXd dy(k_total + 1, p);
      for (int k = 0; k <= k_total; ++k)
        dy.row(k) = (ss.sys.h(x.row(k).transpose(), ss.u0_scaled) - y0).transpose() / c;
      ydev[e] = dy;
    } catch (const std::exception& ex) {
      failures[e] = ex.what();
    }
  });
  for (size_t e = 0; e < exps.size(); ++e)
    if (!failures[e].empty())
      throw NumericalError("observability experiment (state=" + std::to_string(exps[e].i) +
                           ", l=" + std::to_string(exps[e].l) + ", m=" + std::to_string(exps[e].m) +
                           ") failed: " + failures[e]);

  MatrixXd w_o = MatrixXd::Zero(n, n);
  int e = 0;
  for (int l = 0; l < r; ++l)
    for (int m = 0; m < s; ++m) {
      MatrixXd psi = MatrixXd::Zero(n, n);
      // Psi(i, j) accumulated as D_k^T D_k with D_k columns the normalized
      // output deviations at sample k.
      for (int k = 0; k < k_total; ++k) {
        MatrixXd d(p, n);
        for (int i = 0; i < n; ++i) d.col(i) = ydev[e + i].row(k).transpose();
        psi.noalias() += d.transpose() * d;
      }
      w_o.noalias() += dirs[l] * psi * dirs[l].transpose() * (scheme.dt / (static_cast<double>(r) * s));
      e += n;
    }
  return 0.5 * (w_o + w_o.transpose());
}

CovariancePair covariance_pair(const ScaledSystem& ss, const PerturbationScheme& scheme) {
  CovariancePair pair;
  pair.w_c = controllability_covariance(ss, scheme);
  pair.w_o = observability_covariance(ss, scheme);
  pair.tx = ss.tx;
  pair.tu = ss.tu;
  pair.x0_scaled = ss.x0_scaled;
  pair.u0_scaled = ss.u0_scaled;
  pair.scheme_summary = scheme.summary();
  check_covariance(pair.w_c, "controllability covariance");
  check_covariance(pair.w_o, "observability covariance");
  return pair;
}

MagnitudeProfile reference_profile() {
  MagnitudeProfile p;
  p.k_v = 0.054;
  p.k_th = 1.24;
  p.k_delta = 0.90;
  p.k_omega = 0.0050;
  p.k_eqp = 0.024;
  p.k_edp = 0.27;
  return p;
}

SchemeProfile parse_profile(const std::string& name) {
  SchemeProfile p;
  std::string base = name;
  if (name == "LS" || name == "GS") {
    base = name;
  } else if (name.size() > 3) {
    const std::string suffix = name.substr(2);
    base = name.substr(0, 2);
    if (suffix == "-Half")
      p.k_scale = 0.5;
    else if (suffix == "-Double")
      p.k_scale = 2.0;
    else
      throw ConfigError("unknown magnitude profile '" + name + "'");
  } else {
    throw ConfigError("unknown magnitude profile '" + name + "'");
  }
  if (base == "LS")
    p.geometric = false;
  else if (base == "GS")
    p.geometric = true;
  else
    throw ConfigError("unknown magnitude profile '" + name + "'");
  return p;
}

VectorXd profile_m0(const SchemeProfile& p) {
  VectorXd m0(4);
  if (p.geometric)
    m0 << 0.125, 0.25, 0.5, 1.0;
  else
    m0 << 0.25, 0.5, 0.75, 1.0;
  return m0;
}

VectorXd ku_for_inputs(const MagnitudeProfile& prof, int p) {
  VectorXd ku(2 * p);
  for (int i = 0; i < p; ++i) {
    ku(i) = prof.k_v;
    ku(p + i) = prof.k_th;
  }
  return ku;
}

VectorXd kx_for_states(const MagnitudeProfile& prof, const StateLayout& layout) {
  VectorXd kx(layout.dim());
  for (int i = 0; i < layout.dim(); ++i) {
    switch (layout.block_of(i)) {
      case Block::Delta: kx(i) = prof.k_delta; break;
      case Block::Omega: kx(i) = prof.k_omega; break;
      case Block::EqPrime: kx(i) = prof.k_eqp; break;
      case Block::EdPrime: kx(i) = prof.k_edp; break;
      default: kx(i) = prof.k_eqp; break;  // exciter states are never perturbed here
    }
  }
  return kx;
}

CalibrationResult calibrate_magnitudes(const PowerCase& c, int n_f, double alpha_u, double alpha_x,
                                       std::uint64_t seed, double ode_tol) {
  if (n_f < 1) throw ConfigError("calibration needs n_f >= 1");
  const AreaView whole = whole_view(c);
  const AreaDynamics dyn(whole);
  const int p = static_cast<int>(c.partition.tie_lines.size());
  if (p == 0) throw ConfigError("calibration needs a partitioned case with tie-lines");

  // External machines and their state entries in the whole-system layout.
  std::vector<int> ext_machines;
  {
    std::set<int> ext_buses(c.partition.external_buses.begin(), c.partition.external_buses.end());
    for (int m = 0; m < whole.n_machines(); ++m) {
      const int case_bus = whole.case_bus_ids[whole.machines[m].bus];
      if (ext_buses.count(case_bus)) ext_machines.push_back(m);
    }
  }

  const VectorXd x0 = dyn.x0();
  const VectorXd u_empty(0);
  NcCache cache0 = dyn.make_cache();
  const NetworkMatrices mats0 = build_matrices(whole);
  const VectorXd y0 = dyn.outputs(mats0, x0, u_empty, &cache0);
  const int nb_out = static_cast<int>(whole.output_buses.size());  // 2p

  Rng rng(seed);
  CalibrationResult res;
  res.n_f = n_f;
  res.alpha_u = alpha_u;
  res.alpha_x = alpha_x;

  // Per-entry |relative change|, maximum over the fault ensemble.
  VectorXd du_max = VectorXd::Zero(2 * p);
  std::map<std::pair<int, int>, double> dx_max;  // (machine, block) -> max |rel change|

  const StepControl ctrl{0.01, 0.01, ode_tol};
  int ok_count = 0;
  for (int j = 0; j < n_f; ++j) {
    const Branch& br = c.branches[rng.uniform_int(static_cast<int>(c.branches.size()))];
    const int end_bus = rng.uniform() < 0.5 ? br.from : br.to;
    FaultSpec fault{br.id, end_bus};
    try {
      NetworkMatrices m_on = build_matrices(whole, stage_config(whole, fault, FaultStage::On));
      NetworkMatrices m_nc =
          build_matrices(whole, stage_config(whole, fault, FaultStage::NearCleared));
      NetworkMatrices m_post = build_matrices(whole, stage_config(whole, fault, FaultStage::Post));

      NcCache cache = dyn.make_cache();
      auto run = [&](const NetworkMatrices& mm, const VectorXd& xs, double t0, double t1) {
        const StagedRhs f = [&](double, const VectorXd& xx, int) {
          return dyn.rhs(mm, xx, u_empty, &cache);
        };
        return integrate_interval(f, xs, t0, t1, 0, ctrl.tolerance);
      };
      VectorXd x = run(m_on, x0, 0.0, 0.05);
      x = run(m_nc, x, 0.05, 0.10);
      x = run(m_post, x, 0.10, 0.60);  // post-fault sample 0.5 s after remote clearing

      const VectorXd yf = dyn.outputs(m_post, x, u_empty, &cache);
      // Whole-view outputs are ordered [V(B_s,bound), V(B_e,bound),
      // theta(B_s,bound), theta(B_e,bound)]; the external area's inputs are
      // the study-side pair.
      for (int i = 0; i < p; ++i) {
        const double v0 = y0(i), vf = yf(i);
        const double th0 = y0(nb_out + i), thf = yf(nb_out + i);
        if (std::abs(v0) > 1e-9) du_max(i) = std::max(du_max(i), std::abs((vf - v0) / v0));
        if (std::abs(th0) > 1e-9)
          du_max(p + i) = std::max(du_max(p + i), std::abs((thf - th0) / th0));
      }
      for (int m : ext_machines) {
        const int order = whole.machines[m].model_order;
        const std::vector<Block> blocks = order >= 4
                                              ? std::vector<Block>{Block::Delta, Block::Omega,
                                                                   Block::EqPrime, Block::EdPrime}
                                              : std::vector<Block>{Block::Delta, Block::Omega};
        for (Block b : blocks) {
          const int idx = dyn.layout().idx(b, m);
          if (std::abs(x0(idx)) < 1e-9) continue;
          const double rel = std::abs((x(idx) - x0(idx)) / x0(idx));
          auto key = std::make_pair(m, static_cast<int>(b));
          dx_max[key] = std::max(dx_max.count(key) ? dx_max[key] : 0.0, rel);
        }
      }
      ++ok_count;
    } catch (const std::exception&) {
      ++res.failed_faults;
    }
  }
  if (ok_count == 0) throw NumericalError("all calibration faults failed to simulate");

  res.k_v = alpha_u * du_max.head(p).mean();
  res.k_th = alpha_u * du_max.tail(p).mean();

  auto type_mean = [&](Block b) {
    double sum = 0.0;
    int count = 0;
    for (const auto& [key, val] : dx_max)
      if (key.second == static_cast<int>(b)) {
        sum += val;
        ++count;
      }
    return count ? sum / count : 0.0;
  };
  res.k_delta = alpha_x * type_mean(Block::Delta);
  res.k_omega = alpha_x * type_mean(Block::Omega);
  res.k_eqp = alpha_x * type_mean(Block::EqPrime);
  res.k_edp = alpha_x * type_mean(Block::EdPrime);
  return res;
}

MatrixXd solve_lyapunov(const MatrixXd& a, const MatrixXd& q) {
  const int n = static_cast<int>(a.rows());
  if (a.cols() != n || q.rows() != n || q.cols() != n)
    throw ConfigError("solve_lyapunov: dimension mismatch");

  Eigen::ComplexSchur<MatrixXd> schur(a);
  if (schur.info() != Eigen::Success) throw NumericalError("Schur decomposition failed");
  const MatrixXcd u = schur.matrixU();
  const MatrixXcd t = schur.matrixT();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (std::abs(t(i, i) + t(j, j)) < 1e-12)
        throw NumericalError("Lyapunov equation is singular: eigenvalue pair sums to zero");

  // T Y + Y T^T = -U^H Q conj(U), solved column by column from the right.
  const MatrixXcd qt = u.adjoint() * q.cast<Complex>() * u.conjugate();
  MatrixXcd y = MatrixXcd::Zero(n, n);
  for (int k = n - 1; k >= 0; --k) {
    VectorXcd rhs = -qt.col(k);
    for (int j = k + 1; j < n; ++j) rhs -= t(k, j) * y.col(j);
    MatrixXcd lhs = t;
    lhs.diagonal().array() += t(k, k);
    y.col(k) = lhs.triangularView<Eigen::Upper>().solve(rhs);
  }
  const MatrixXcd x = u * y * u.transpose();
  MatrixXd xr = x.real();
  xr = 0.5 * (xr + xr.transpose());

  const double resid = (a * xr + xr * a.transpose() + q).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  if (resid > 1e-7 * scale)
    throw NumericalError("Lyapunov solve residual too large: " + std::to_string(resid));
  return xr;
}

LinearizedSystem linearize(const DynamicalSystem& sys, const VectorXd& x0, const VectorXd& u0) {
  LinearizedSystem lin;
  lin.a.resize(sys.n, sys.n);
  lin.b.resize(sys.n, sys.v);
  lin.c.resize(sys.p, sys.n);
  VectorXd xp = x0, xm = x0, up = u0, um = u0;
  for (int j = 0; j < sys.n; ++j) {
    const double eps = 1e-6 * std::max(1.0, std::abs(x0(j)));
    xp(j) += eps;
    xm(j) -= eps;
    lin.a.col(j) = (sys.f(xp, u0) - sys.f(xm, u0)) / (2 * eps);
    lin.c.col(j) = (sys.h(xp, u0) - sys.h(xm, u0)) / (2 * eps);
    xp(j) = x0(j);
    xm(j) = x0(j);
  }
  for (int j = 0; j < sys.v; ++j) {
    const double eps = 1e-6 * std::max(1.0, std::abs(u0(j)));
    up(j) += eps;
    um(j) -= eps;
    lin.b.col(j) = (sys.f(x0, up) - sys.f(x0, um)) / (2 * eps);
    up(j) = u0(j);
    um(j) = u0(j);
  }
  return lin;
}

CovariancePair linearized_covariance_pair(const ScaledSystem& ss, const std::vector<bool>& frozen) {
  const int n = ss.sys.n;
  if (static_cast<int>(frozen.size()) != n)
    throw ConfigError("frozen mask length does not match the state count");
  std::vector<int> dyn_idx;
  for (int i = 0; i < n; ++i)
    if (!frozen[i]) dyn_idx.push_back(i);
  const int nd = static_cast<int>(dyn_idx.size());
  if (nd == 0) throw ConfigError("linearized gramians need at least one dynamic state");

  const LinearizedSystem lin = linearize(ss.sys, ss.x0_scaled, ss.u0_scaled);
  MatrixXd a(nd, nd), b(nd, ss.sys.v), c(ss.sys.p, nd);
  for (int i = 0; i < nd; ++i) {
    for (int j = 0; j < nd; ++j) a(i, j) = lin.a(dyn_idx[i], dyn_idx[j]);
    b.row(i) = lin.b.row(dyn_idx[i]);
    c.col(i) = lin.c.col(dyn_idx[i]);
  }
  const Eigen::VectorXcd eigs = a.eigenvalues();
  for (int i = 0; i < nd; ++i)
    if (eigs(i).real() >= 0.0)
      throw NumericalError("linearized external system is not asymptotically stable (Re lambda = " +
                           std::to_string(eigs(i).real()) + ")");

  const MatrixXd wc_d = solve_lyapunov(a, b * b.transpose());
  const MatrixXd wo_d = solve_lyapunov(a.transpose(), c.transpose() * c);

  CovariancePair pair;
  pair.w_c = MatrixXd::Zero(n, n);
  pair.w_o = MatrixXd::Zero(n, n);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nd; ++j) {
      pair.w_c(dyn_idx[i], dyn_idx[j]) = wc_d(i, j);
      pair.w_o(dyn_idx[i], dyn_idx[j]) = wo_d(i, j);
    }
  pair.tx = ss.tx;
  pair.tu = ss.tu;
  pair.x0_scaled = ss.x0_scaled;
  pair.u0_scaled = ss.u0_scaled;
  pair.scheme_summary = "linearized-model Lyapunov gramians";
  check_covariance(pair.w_c, "linearized controllability gramian");
  check_covariance(pair.w_o, "linearized observability gramian");
  return pair;
}

}  // namespace gridred
