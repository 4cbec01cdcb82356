#include "gridred/demo_case.hpp"

#include <cmath>

#include "gridred/dynamics.hpp"

namespace gridred {

namespace {

Bus make_bus(int id, BusType type, double vm, double va) {
  Bus b;
  b.id = id;
  b.type = type;
  b.v0 = std::polar(vm, va);
  return b;
}

Branch make_branch(int id, int from, int to, double r, double x, double b_sh, bool tie = false) {
  Branch b;
  b.id = id;
  b.from = from;
  b.to = to;
  b.z = Complex(r, x);
  b.b_shunt = b_sh;
  b.tie_line = tie;
  return b;
}

Machine make_machine(int id, int bus, int order, double h, double kd, double xd, double xq,
                     double xpd, double xpq, double tpd0, double tpq0) {
  Machine m;
  m.id = id;
  m.bus = bus;
  m.model_order = order;
  m.s_n = 100.0;
  m.h = h;
  m.k_d = kd;
  m.x_d = xd;
  m.x_q = xq;
  m.xp_d = xpd;
  m.xp_q = xpq;
  m.tp_d0 = tpd0;
  m.tp_q0 = tpq0;
  m.t_m = 0.0;  // filled from the equilibrium below
  return m;
}

Exciter make_exciter(int machine) {
  Exciter e;
  e.machine = machine;
  e.k_a = 20.0;
  e.t_a = 0.1;
  e.k_e = 1.0;
  e.t_e = 0.4;
  e.k_f = 0.06;
  e.t_f = 1.0;
  e.exc1 = 0.0039;
  e.exc2 = 1.555;
  e.exc3 = 0.0;  // filled from the equilibrium below
  return e;
}

}  // namespace

PowerCase make_twoarea_case(int ties) {
  if (ties != 2 && ties != 3) throw ConfigError("demo case supports 2 or 3 tie-lines");

  PowerCase c;
  c.base_mva = 100.0;

  // Study area: buses 1-5, machines on 1-3, ZIP load on 5.
  c.buses.push_back(make_bus(1, BusType::Slack, 1.03, 0.10));
  c.buses.push_back(make_bus(2, BusType::Gen, 1.02, 0.05));
  c.buses.push_back(make_bus(3, BusType::Gen, 1.03, 0.12));
  c.buses.push_back(make_bus(4, BusType::Load, 1.00, -0.04));
  c.buses.push_back(make_bus(5, BusType::Load, 0.99, -0.08));
  // External area: buses 11-15, machines on 11-14.
  c.buses.push_back(make_bus(11, BusType::Gen, 1.03, 0.18));
  c.buses.push_back(make_bus(12, BusType::Gen, 1.01, 0.09));
  c.buses.push_back(make_bus(13, BusType::Gen, 1.02, 0.14));
  c.buses.push_back(make_bus(14, BusType::Gen, 1.03, 0.20));
  c.buses.push_back(make_bus(15, BusType::Load, 0.99, 0.03));

  c.branches.push_back(make_branch(1, 1, 2, 0.010, 0.080, 0.020));
  c.branches.push_back(make_branch(2, 2, 3, 0.012, 0.090, 0.020));
  c.branches.push_back(make_branch(3, 1, 4, 0.008, 0.060, 0.015));
  c.branches.push_back(make_branch(4, 2, 4, 0.010, 0.070, 0.020));
  c.branches.push_back(make_branch(5, 4, 5, 0.006, 0.050, 0.010));
  c.branches.push_back(make_branch(6, 3, 5, 0.010, 0.080, 0.020));
  c.branches.push_back(make_branch(7, 11, 12, 0.010, 0.080, 0.020));
  c.branches.push_back(make_branch(8, 12, 13, 0.012, 0.100, 0.020));
  c.branches.push_back(make_branch(9, 13, 15, 0.008, 0.070, 0.015));
  c.branches.push_back(make_branch(10, 14, 15, 0.010, 0.080, 0.020));
  c.branches.push_back(make_branch(11, 11, 15, 0.009, 0.075, 0.020));
  c.branches.push_back(make_branch(12, 12, 14, 0.015, 0.110, 0.020));
  c.branches.push_back(make_branch(21, 3, 11, 0.020, 0.150, 0.030, true));
  c.branches.push_back(make_branch(22, 4, 12, 0.018, 0.140, 0.030, true));
  if (ties == 3) c.branches.push_back(make_branch(23, 2, 13, 0.022, 0.160, 0.030, true));

  c.machines.push_back(make_machine(1, 1, 7, 5.0, 2.0, 1.80, 1.70, 0.30, 0.55, 8.0, 0.80));
  c.machines.push_back(make_machine(2, 2, 7, 4.0, 2.0, 1.75, 1.65, 0.28, 0.50, 7.0, 0.70));
  c.machines.push_back(make_machine(3, 3, 7, 4.5, 2.0, 1.85, 1.75, 0.32, 0.58, 7.5, 0.75));
  c.machines.push_back(make_machine(4, 11, 4, 3.5, 2.0, 1.70, 1.60, 0.27, 0.47, 6.5, 0.60));
  c.machines.push_back(make_machine(5, 12, 2, 3.0, 2.0, 0.30, 0.30, 0.30, 0.30, 0.0, 0.0));
  c.machines.push_back(make_machine(6, 13, 2, 3.2, 2.0, 0.28, 0.28, 0.28, 0.28, 0.0, 0.0));
  c.machines.push_back(make_machine(7, 14, 2, 2.8, 2.0, 0.32, 0.32, 0.32, 0.32, 0.0, 0.0));

  c.exciters.push_back(make_exciter(1));
  c.exciters.push_back(make_exciter(2));
  c.exciters.push_back(make_exciter(3));

  c.partition.study_buses = {1, 2, 3, 4, 5};
  c.partition.external_buses = {11, 12, 13, 14, 15};
  for (const auto& b : c.branches) {
    if (!b.tie_line) continue;
    c.partition.tie_lines.push_back(b.id);
    c.partition.b_s_bound.push_back(b.from);
    c.partition.b_e_bound.push_back(b.to);
  }

  // Back-compute loads from the chosen voltage profile: whatever current the
  // branch network demands at a load bus is served by its load.
  {
    AreaView whole = whole_view(c);
    const MatrixXcd y_net = assemble_bus_y(whole);  // no loads set yet
    VectorXcd v(whole.n_buses());
    for (int i = 0; i < whole.n_buses(); ++i) v(i) = whole.buses[i].v0;
    const VectorXcd inj = y_net * v;

    auto set_load = [&](int bus_id) {
      const int local = whole.local_bus(bus_id);
      const Complex s_load = -v(local) * std::conj(inj(local));
      for (auto& b : c.buses)
        if (b.id == bus_id) {
          b.p_load = s_load.real();
          b.q_load = s_load.imag();
        }
    };
    set_load(4);
    set_load(15);

    const int z_local = whole.local_bus(5);
    const Complex s_zip = -v(z_local) * std::conj(inj(z_local));
    ZipLoad z;
    z.bus = 5;
    z.p0 = s_zip.real();
    z.q0 = s_zip.imag();
    z.p1 = 0.2;
    z.p2 = 0.3;
    z.p3 = 0.5;
    z.q1 = 0.2;
    z.q2 = 0.3;
    z.q3 = 0.5;
    z.v_nc0 = v(z_local);
    c.zip_loads.push_back(z);
  }

  // Machine torques and exciter references that hold this operating point.
  {
    const AreaView whole = whole_view(c);
    const AreaDynamics dyn(whole);
    for (int m = 0; m < whole.n_machines(); ++m) {
      const int id = whole.machines[m].id;
      for (auto& mc : c.machines)
        if (mc.id == id) mc.t_m = dyn.equilibrium_t_m()(m);
      for (auto& ex : c.exciters)
        if (ex.machine == id) ex.exc3 = dyn.equilibrium_exc3()(m);
    }
  }

  validate_case(c);
  return c;
}

EventSchedule demo_events() {
  EventSchedule ev;
  ev.fault_on = 0.1;
  ev.clear_near = 0.15;
  ev.clear_remote = 0.2;
  ev.faulted_branch = 4;
  ev.faulted_end = 4;
  return ev;
}

FaultSpec demo_fault() { return FaultSpec{4, 4}; }

}  // namespace gridred
