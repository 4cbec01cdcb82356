#include "gridred/dynamics.hpp"

#include <algorithm>
#include <cmath>

namespace gridred {

StateLayout StateLayout::for_area(const AreaView& area) {
  StateLayout l;
  l.n_machines = area.n_machines();
  int max_order = 2;
  for (const auto& m : area.machines) {
    l.model_order.push_back(m.model_order);
    max_order = std::max(max_order, m.model_order);
  }
  l.n_blocks = max_order;  // 2, 4, or 7 blocks by construction
  return l;
}

AreaDynamics::AreaDynamics(const AreaView& view) : view_(&view) {
  layout_ = StateLayout::for_area(view);
  const int ng = view.n_machines();
  const int p = view.n_pseudo();

  kappa_.resize(ng);
  for (int m = 0; m < ng; ++m) kappa_(m) = view.base_mva / view.machines[m].s_n;

  // Operating-point currents from the full bus admittance with loads folded.
  const MatrixXcd y_bus = assemble_bus_y(view);
  VectorXcd v0(view.n_buses());
  for (int i = 0; i < view.n_buses(); ++i) v0(i) = view.buses[i].v0;
  VectorXcd inj = y_bus * v0;
  vnc0_.resize(view.n_zip());
  for (int i = 0; i < view.n_zip(); ++i) vnc0_(i) = view.zip_loads[i].v_nc0;
  const VectorXcd zip_inj = zip_injection_current(view.zip_loads, vnc0_);
  for (int i = 0; i < view.n_zip(); ++i) inj(view.zip_loads[i].bus) -= zip_inj(i);

  x0_ = VectorXd::Zero(layout_.dim());
  frozen_params_ = MatrixXd::Zero(ng, 7);
  t_m_eq_ = VectorXd::Zero(ng);
  exc3_eq_ = VectorXd::Zero(ng);

  for (int m = 0; m < ng; ++m) {
    const Machine& mc = view.machines[m];
    const Complex vt = v0(mc.bus);
    const Complex i_sys = inj(mc.bus);
    const Complex i_mach = kappa_(m) * i_sys;

    double delta, eqp, edp, efd = 0.0;
    if (mc.model_order >= 4) {
      // Rotor angle placing the as-modeled d-axis equation at equilibrium.
      const double x_eq = mc.x_q - mc.xp_q + mc.xp_d;
      delta = std::arg(vt + Complex(0.0, x_eq) * i_mach);
    } else {
      delta = std::arg(vt + Complex(0.0, mc.xp_d) * i_mach);
    }
    const Complex psi = vt + Complex(0.0, mc.xp_d) * i_mach;
    const Complex rot = std::polar(1.0, -delta);
    eqp = (psi * rot).real();
    edp = -(psi * rot).imag();
    if (mc.model_order == 2) {
      // Classical machine: constant EMF magnitude on the q axis.
      delta = std::arg(psi);
      eqp = std::abs(psi);
      edp = 0.0;
    }
    const Complex irot = i_mach * std::polar(1.0, -delta);
    const double iq = irot.real();
    const double id = -irot.imag();
    if (mc.model_order >= 4) efd = eqp + (mc.x_d - mc.xp_d) * id;

    const double eq_t = eqp - mc.xp_d * id;
    const double ed_t = edp + mc.xp_q * iq;
    const double te = kappa_(m) * (eq_t * iq + ed_t * id);
    t_m_eq_(m) = te;

    x0_(layout_.idx(Block::Delta, m)) = delta;
    x0_(layout_.idx(Block::Omega, m)) = kOmegaSync;
    frozen_params_(m, static_cast<int>(Block::EqPrime)) = eqp;
    frozen_params_(m, static_cast<int>(Block::EdPrime)) = edp;
    frozen_params_(m, static_cast<int>(Block::Efd)) = efd;
    if (layout_.has(Block::EqPrime)) {
      x0_(layout_.idx(Block::EqPrime, m)) = eqp;
      x0_(layout_.idx(Block::EdPrime, m)) = edp;
    }
    if (layout_.has(Block::Efd)) x0_(layout_.idx(Block::Efd, m)) = efd;

    if (mc.model_order == 7) {
      const Exciter& ex = *view.exciters[m];
      const double se = ex.exc1 * std::exp(ex.exc2 * std::abs(efd)) * sgn(efd);
      const double vr = ex.k_e * efd + se;
      const double vtr = std::sqrt(eq_t * eq_t + ed_t * ed_t);
      exc3_eq_(m) = vr / ex.k_a + vtr;
      x0_(layout_.idx(Block::Vr, m)) = vr;
      x0_(layout_.idx(Block::Rf, m)) = efd;
      frozen_params_(m, static_cast<int>(Block::Vr)) = vr;
      frozen_params_(m, static_cast<int>(Block::Rf)) = efd;
    }
  }

  u0_.resize(2 * p);
  for (int i = 0; i < p; ++i) {
    const Complex vb = v0(view.pseudo[i].local_bus);
    u0_(i) = std::abs(vb);
    u0_(p + i) = std::arg(vb);
  }
}

double AreaDynamics::state_or_param(Block b, int m, const VectorXd& x) const {
  return layout_.has(b) ? x(layout_.idx(b, m)) : frozen_params_(m, static_cast<int>(b));
}

VectorXcd AreaDynamics::psi_state(const VectorXd& x) const {
  const int ng = view_->n_machines();
  VectorXcd psi(ng);
  for (int m = 0; m < ng; ++m) {
    const double delta = x(layout_.idx(Block::Delta, m));
    const double eqp = state_or_param(Block::EqPrime, m, x);
    const double edp = state_or_param(Block::EdPrime, m, x);
    psi(m) = Complex(edp * std::sin(delta) + eqp * std::cos(delta),
                     eqp * std::sin(delta) - edp * std::cos(delta));
  }
  return psi;
}

VectorXcd AreaDynamics::solve_vnc(const NetworkMatrices& mats, const VectorXcd& psi,
                                  NcCache* cache) const {
  if (view_->n_zip() == 0) return VectorXcd(0);
  const VectorXcd guess = (cache && cache->vnc.size() == view_->n_zip()) ? cache->vnc : vnc0_;
  NcSolveReport rep;
  const VectorXcd v = solve_nc_voltages(mats, psi, view_->zip_loads, guess, 1e-10, 50, &rep);
  if (cache) {
    cache->vnc = v;
    cache->max_residual = std::max(cache->max_residual, rep.residual);
    ++cache->solves;
  }
  return v;
}

MachineAlgebra AreaDynamics::algebra(const NetworkMatrices& mats, const VectorXd& x,
                                     const VectorXd& u, NcCache* cache) const {
  const int ng = view_->n_machines();
  const int p = view_->n_pseudo();
  MachineAlgebra a;
  a.psi_state = psi_state(x);
  if (!a.psi_state.allFinite()) throw NumericalError("non-finite machine voltage source");

  VectorXcd psi(ng + p);
  psi.head(ng) = a.psi_state;
  for (int i = 0; i < p; ++i) psi(ng + i) = std::polar(u(i), u(p + i));

  a.v_nc = solve_vnc(mats, psi, cache);
  const VectorXcd i_t = mats.y_g * psi + mats.y_gnc * a.v_nc;
  if (!i_t.allFinite()) throw NumericalError("non-finite generator terminal current");

  a.i_q.resize(ng);
  a.i_d.resize(ng);
  a.e_q.resize(ng);
  a.e_d.resize(ng);
  a.t_e.resize(ng);
  a.v_tr.resize(ng);
  for (int m = 0; m < ng; ++m) {
    const Machine& mc = view_->machines[m];
    const double delta = x(layout_.idx(Block::Delta, m));
    const double s = std::sin(delta), c = std::cos(delta);
    const double ir = i_t(m).real(), ii = i_t(m).imag();
    a.i_q(m) = kappa_(m) * (ii * s + ir * c);
    a.i_d(m) = kappa_(m) * (ir * s - ii * c);
    a.e_q(m) = state_or_param(Block::EqPrime, m, x) - mc.xp_d * a.i_d(m);
    a.e_d(m) = state_or_param(Block::EdPrime, m, x) + mc.xp_q * a.i_q(m);
    a.t_e(m) = kappa_(m) * (a.e_q(m) * a.i_q(m) + a.e_d(m) * a.i_d(m));
    a.v_tr(m) = std::sqrt(a.e_q(m) * a.e_q(m) + a.e_d(m) * a.e_d(m));
    if (!std::isfinite(a.t_e(m)))
      throw NumericalError("non-finite electrical torque for machine " +
                           std::to_string(mc.id));
  }
  return a;
}

VectorXd AreaDynamics::rhs(const NetworkMatrices& mats, const VectorXd& x, const VectorXd& u,
                           NcCache* cache) const {
  if (!x.allFinite()) throw NumericalError("non-finite state passed to rhs");
  const MachineAlgebra a = algebra(mats, x, u, cache);
  const int ng = view_->n_machines();
  VectorXd dx = VectorXd::Zero(layout_.dim());

  for (int m = 0; m < ng; ++m) {
    const Machine& mc = view_->machines[m];
    const double omega = x(layout_.idx(Block::Omega, m));
    dx(layout_.idx(Block::Delta, m)) = omega - kOmegaSync;
    dx(layout_.idx(Block::Omega, m)) =
        kOmegaSync / (2.0 * mc.h) *
        (mc.t_m - a.t_e(m) - mc.k_d / kOmegaSync * (omega - kOmegaSync));

    if (mc.model_order >= 4) {
      const double eqp = x(layout_.idx(Block::EqPrime, m));
      const double edp = x(layout_.idx(Block::EdPrime, m));
      const double efd = state_or_param(Block::Efd, m, x);
      dx(layout_.idx(Block::EqPrime, m)) =
          (efd - eqp - (mc.x_d - mc.xp_d) * a.i_d(m)) / mc.tp_d0;
      dx(layout_.idx(Block::EdPrime, m)) = (-edp + (mc.x_q - mc.xp_q) * a.i_q(m)) / mc.tp_q0;
    }
    if (mc.model_order == 7) {
      const Exciter& ex = *view_->exciters[m];
      const double vr = x(layout_.idx(Block::Vr, m));
      const double efd = x(layout_.idx(Block::Efd, m));
      const double rf = x(layout_.idx(Block::Rf, m));
      const double v_fb = ex.k_f / ex.t_f * (efd - rf);
      const double v_a = -v_fb + ex.exc3 - a.v_tr(m);
      const double s_e = ex.exc1 * std::exp(ex.exc2 * std::abs(efd)) * sgn(efd);
      if (!std::isfinite(v_a) || !std::isfinite(s_e))
        throw NumericalError("non-finite exciter chain for machine " + std::to_string(mc.id));
      dx(layout_.idx(Block::Vr, m)) = (-vr + ex.k_a * v_a) / ex.t_a;
      dx(layout_.idx(Block::Efd, m)) = (vr - ex.k_e * efd - s_e) / ex.t_e;
      dx(layout_.idx(Block::Rf, m)) = (-rf + efd) / ex.t_f;
    }
  }
  return dx;
}

VectorXd AreaDynamics::outputs(const NetworkMatrices& mats, const VectorXd& x, const VectorXd& u,
                               NcCache* cache) const {
  const int ng = view_->n_machines();
  const int p = view_->n_pseudo();
  const VectorXcd psi_s = psi_state(x);
  VectorXcd psi(ng + p);
  psi.head(ng) = psi_s;
  VectorXcd psi_in(p);
  for (int i = 0; i < p; ++i) psi_in(i) = std::polar(u(i), u(p + i));
  psi.tail(p) = psi_in;

  const VectorXcd v_nc = solve_vnc(mats, psi, cache);
  const VectorXcd v = reconstruct_voltages(mats, psi_s, psi_in, v_nc);

  const int nout = static_cast<int>(view_->output_buses.size());
  VectorXd y(2 * nout);
  for (int i = 0; i < nout; ++i) {
    const Complex vb = v(view_->output_buses[i]);
    y(i) = std::abs(vb);
    y(nout + i) = std::arg(vb);
  }
  return y;
}

}  // namespace gridred
