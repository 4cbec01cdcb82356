#include "gridred/cosim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <limits>
#include <set>

namespace gridred {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<NetworkMatrices> stage_matrices(const AreaView& area,
                                            const std::optional<EventSchedule>& events) {
  std::vector<NetworkMatrices> mats;
  if (!events) {
    mats.push_back(build_matrices(area));
    return mats;
  }
  const FaultSpec fault{events->faulted_branch, events->faulted_end};
  for (int s = 0; s < 4; ++s)
    mats.push_back(build_matrices(area, stage_config(area, fault, static_cast<FaultStage>(s))));
  return mats;
}

std::vector<int> machine_ids(const AreaView& area) {
  std::vector<int> ids;
  for (const auto& m : area.machines) ids.push_back(m.id);
  return ids;
}

// Copy per-machine blocks of a whole-system trajectory into an area layout.
MatrixXd extract_area_states(const MatrixXd& whole_states, const StateLayout& whole_layout,
                             const std::vector<int>& whole_machine_idx,
                             const StateLayout& area_layout) {
  MatrixXd out(whole_states.rows(), area_layout.dim());
  for (int m = 0; m < area_layout.n_machines; ++m) {
    for (int b = 0; b < area_layout.n_blocks; ++b) {
      const Block blk = static_cast<Block>(b);
      out.col(area_layout.idx(blk, m)) =
          whole_states.col(whole_layout.idx(blk, whole_machine_idx[m]));
    }
  }
  return out;
}

CosimRun run_unpartitioned(const PowerCase& c, const CosimOptions& opts) {
  const AreaView whole = whole_view(c);
  const AreaDynamics dyn(whole);
  const std::vector<NetworkMatrices> mats = stage_matrices(whole, opts.events);
  const int p = static_cast<int>(c.partition.tie_lines.size());

  CosimRun run;
  run.method = Method::UnPartitioned;
  run.grid = output_grid(0.0, opts.t_end, opts.control, opts.events);

  NcCache cache = dyn.make_cache();
  const VectorXd u_empty(0);
  const StagedRhs f = [&](double, const VectorXd& x, int stage) {
    return dyn.rhs(mats[stage], x, u_empty, &cache);
  };

  const auto t0 = Clock::now();
  const Trajectory traj = integrate(f, dyn.x0(), 0.0, opts.t_end, opts.control, opts.events);
  const double t_int = seconds_since(t0);

  // Split the monolithic trajectory into per-area views.
  auto [study, external] = partition(c);
  run.layout_s = StateLayout::for_area(study);
  run.layout_e = StateLayout::for_area(external);
  run.machine_ids_s = machine_ids(study);
  run.machine_ids_e = machine_ids(external);
  auto whole_index_of = [&](int id) {
    for (int i = 0; i < whole.n_machines(); ++i)
      if (whole.machines[i].id == id) return i;
    throw ConfigError("machine id not found in whole view");
  };
  std::vector<int> idx_s, idx_e;
  for (int id : run.machine_ids_s) idx_s.push_back(whole_index_of(id));
  for (int id : run.machine_ids_e) idx_e.push_back(whole_index_of(id));
  run.x_s = extract_area_states(traj.states, dyn.layout(), idx_s, run.layout_s);
  run.x_e = extract_area_states(traj.states, dyn.layout(), idx_e, run.layout_e);

  // Boundary history from the output map at each grid point; angles unwrapped
  // along the trajectory.
  run.boundary.resize(traj.states.rows(), 4 * p);
  for (int k = 0; k < traj.states.rows(); ++k) {
    const int stage = stage_at(opts.events, traj.times[k]);
    const VectorXd y = dyn.outputs(mats[stage], traj.at(k), u_empty, &cache);
    for (int i = 0; i < p; ++i) {
      run.boundary(k, i) = y(i);                    // V_s
      run.boundary(k, 2 * p + i) = y(p + i);        // V_e
      double ths = y(2 * p + i);
      double the = y(3 * p + i);
      if (k > 0) {
        ths = unwrap_near(ths, run.boundary(k - 1, p + i));
        the = unwrap_near(the, run.boundary(k - 1, 3 * p + i));
      }
      run.boundary(k, p + i) = ths;
      run.boundary(k, 3 * p + i) = the;
    }
  }
  run.boundary_bus_ids_s = c.partition.b_s_bound;
  run.boundary_bus_ids_e = c.partition.b_e_bound;

  run.timings.t_s = t_int;
  run.timings.t_total = t_int;
  run.timings.t_parallel = t_int;  // max(t_s, 0) + 0
  run.max_nc_residual = cache.max_residual;
  return run;
}

}  // namespace

const char* method_name(Method m) {
  switch (m) {
    case Method::UnPartitioned: return "UnPartitioned";
    case Method::PartitionedUnreduced: return "Partitioned-Unreduced";
    case Method::PartitionedReducedNM: return "Partitioned-Reduced-NM";
    default: return "Partitioned-Reduced-LM";
  }
}

Method parse_method(const std::string& name) {
  std::string n = name;
  std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return std::tolower(c); });
  if (n == "unpartitioned") return Method::UnPartitioned;
  if (n == "partitioned" || n == "partitioned-unreduced") return Method::PartitionedUnreduced;
  if (n == "reduced-nm" || n == "partitioned-reduced-nm") return Method::PartitionedReducedNM;
  if (n == "reduced-lm" || n == "partitioned-reduced-lm") return Method::PartitionedReducedLM;
  throw ConfigError("unknown method '" + name + "'");
}

CosimRun run_cosim(const PowerCase& c, Method method, const BalancedReduction* bal,
                   const CosimOptions& opts) {
  if (opts.events) opts.events->validate();
  if (method == Method::UnPartitioned) return run_unpartitioned(c, opts);

  const bool reduced =
      method == Method::PartitionedReducedNM || method == Method::PartitionedReducedLM;
  if (reduced && (bal == nullptr || bal->n_red < 0))
    throw ConfigError("reduced co-simulation requires a truncated reduction");

  auto [study, external] = partition(c);
  const AreaDynamics dyn_s(study);
  const AreaDynamics dyn_e(external);
  const std::vector<NetworkMatrices> mats_s = stage_matrices(study, opts.events);
  const std::vector<NetworkMatrices> mats_e = stage_matrices(external, opts.events);
  const int p = static_cast<int>(c.partition.tie_lines.size());

  // Scaled external systems per stage, sharing the reduction's scaling.
  std::vector<ScaledSystem> scaled_e;
  if (reduced) {
    if (bal->n() != dyn_e.n_states())
      throw ConfigError("reduction dimension does not match the external area");
    for (const auto& m : mats_e)
      scaled_e.push_back(scale_system(area_system(dyn_e, m), dyn_e.x0(), dyn_e.u0()));
    if ((bal->tx - scaled_e[0].tx).cwiseAbs().maxCoeff() > 1e-9)
      throw ConfigError("reduction scaling does not match the case operating point");
  }

  CosimRun run;
  run.method = method;
  run.grid = output_grid(0.0, opts.t_end, opts.control, opts.events);
  const int nk = static_cast<int>(run.grid.size());
  run.layout_s = dyn_s.layout();
  run.layout_e = dyn_e.layout();
  run.machine_ids_s = machine_ids(study);
  run.machine_ids_e = machine_ids(external);
  run.boundary_bus_ids_s = c.partition.b_s_bound;
  run.boundary_bus_ids_e = c.partition.b_e_bound;
  run.x_s.resize(nk, dyn_s.n_states());
  run.x_e.resize(nk, dyn_e.n_states());
  run.boundary.resize(nk, 4 * p);

  VectorXd x_s = dyn_s.x0();
  VectorXd x_e = dyn_e.x0();
  VectorXd xbar1;
  if (reduced) xbar1 = project_initial(*bal, scaled_e[0].x0_scaled);

  // Initial boundary state from the case operating point.
  BoundaryState bstate = BoundaryState::zero(p);
  {
    const VectorXd us0 = dyn_s.u0();  // external boundary V, theta
    const VectorXd ue0 = dyn_e.u0();  // study boundary V, theta
    for (int i = 0; i < p; ++i) {
      bstate.v_e(i) = us0(i);
      bstate.th_e(i) = us0(p + i);
      bstate.v_s(i) = ue0(i);
      bstate.th_s(i) = ue0(p + i);
    }
  }
  VectorXd u_s = dyn_s.u0();
  VectorXd u_e = dyn_e.u0();

  auto record = [&](int k) {
    run.x_s.row(k) = x_s.transpose();
    run.x_e.row(k) = x_e.transpose();
    for (int i = 0; i < p; ++i) {
      run.boundary(k, i) = bstate.v_s(i);
      run.boundary(k, p + i) = bstate.th_s(i);
      run.boundary(k, 2 * p + i) = bstate.v_e(i);
      run.boundary(k, 3 * p + i) = bstate.th_e(i);
    }
  };
  record(0);

  NcCache cache_s = dyn_s.make_cache();
  NcCache cache_e = dyn_e.make_cache();
  VectorXcd vnc_guess_s = dyn_s.vnc0();
  VectorXcd vnc_guess_e = dyn_e.vnc0();

  for (int k = 0; k + 1 < nk; ++k) {
    const double ta = run.grid[k];
    const double tb = run.grid[k + 1];
    const int stage = stage_at(opts.events, ta);
    const int stage_next = stage_at(opts.events, tb);

    auto study_step = [&]() -> std::pair<VectorXd, double> {
      const auto t0 = Clock::now();
      const StagedRhs f = [&](double, const VectorXd& x, int) {
        return dyn_s.rhs(mats_s[stage], x, u_s, &cache_s);
      };
      VectorXd out = integrate_interval(f, x_s, ta, tb, stage, opts.control.tolerance);
      return {std::move(out), seconds_since(t0)};
    };
    auto external_step = [&]() -> std::pair<VectorXd, double> {
      const auto t0 = Clock::now();
      VectorXd out;
      if (reduced) {
        const VectorXd u_scaled = u_e.cwiseQuotient(bal->tu);
        const StagedRhs f = [&](double, const VectorXd& xb, int) {
          return reduced_rhs(*bal, scaled_e[stage], xb, u_scaled);
        };
        out = integrate_interval(f, xbar1, ta, tb, stage, opts.control.tolerance);
      } else {
        const StagedRhs f = [&](double, const VectorXd& x, int) {
          return dyn_e.rhs(mats_e[stage], x, u_e, &cache_e);
        };
        out = integrate_interval(f, x_e, ta, tb, stage, opts.control.tolerance);
      }
      return {std::move(out), seconds_since(t0)};
    };

    std::pair<VectorXd, double> rs, re;
    if (opts.jobs >= 2) {
      auto fut = std::async(std::launch::async, external_step);
      rs = study_step();
      re = fut.get();
    } else {
      rs = study_step();
      re = external_step();
    }
    x_s = rs.first;
    run.timings.t_s += rs.second;
    if (reduced) {
      xbar1 = re.first;
      x_e = reduced_to_full(*bal, xbar1);
    } else {
      x_e = re.first;
    }
    run.timings.t_e += re.second;

    // Boundary update at t_{k+1} with the network configuration active there.
    const auto tb0 = Clock::now();
    AreaAlgebraic alg_s;
    alg_s.mats = &mats_s[stage_next];
    alg_s.zips = &study.zip_loads;
    alg_s.psi_state = dyn_s.psi_state(x_s);
    alg_s.boundary_buses = study.boundary_buses;
    alg_s.vnc_guess = vnc_guess_s;
    AreaAlgebraic alg_e;
    alg_e.mats = &mats_e[stage_next];
    alg_e.zips = &external.zip_loads;
    alg_e.psi_state = dyn_e.psi_state(x_e);
    alg_e.boundary_buses = external.boundary_buses;
    alg_e.vnc_guess = vnc_guess_e;

    BoundaryUpdateReport brep;
    try {
      bstate = update_boundary(alg_s, alg_e, bstate, 1e-9, 30, &brep);
    } catch (const NumericalError& err) {
      throw NumericalError("boundary update failed at step " + std::to_string(k + 1) + " (t = " +
                           std::to_string(tb) + "): " + err.what());
    }
    if (brep.vnc_s.size()) vnc_guess_s = brep.vnc_s;
    if (brep.vnc_e.size()) vnc_guess_e = brep.vnc_e;
    run.max_boundary_residual = std::max(run.max_boundary_residual, brep.residual);
    run.timings.t_b += seconds_since(tb0);

    for (int i = 0; i < p; ++i) {
      u_s(i) = bstate.v_e(i);
      u_s(p + i) = bstate.th_e(i);
      u_e(i) = bstate.v_s(i);
      u_e(p + i) = bstate.th_s(i);
    }
    record(k + 1);
  }

  run.timings.t_total = run.timings.t_s + run.timings.t_e + run.timings.t_b;
  run.timings.t_parallel = std::max(run.timings.t_s, run.timings.t_e) + run.timings.t_b;
  run.max_nc_residual = std::max(cache_s.max_residual, cache_e.max_residual);
  return run;
}

const char* var_kind_name(VarKind k) {
  switch (k) {
    case VarKind::Delta: return "delta";
    case VarKind::Omega: return "omega";
    case VarKind::EqPrime: return "eqp";
    case VarKind::EdPrime: return "edp";
    case VarKind::Vr: return "vr";
    case VarKind::Efd: return "efd";
    case VarKind::Rf: return "rf";
    case VarKind::Vs: return "v_s";
    case VarKind::Ve: return "v_e";
    case VarKind::ThetaS: return "theta_s";
    default: return "theta_e";
  }
}

namespace {

bool is_state_kind(VarKind k) {
  return k == VarKind::Delta || k == VarKind::Omega || k == VarKind::EqPrime ||
         k == VarKind::EdPrime || k == VarKind::Vr || k == VarKind::Efd || k == VarKind::Rf;
}

Block block_of_kind(VarKind k) {
  switch (k) {
    case VarKind::Delta: return Block::Delta;
    case VarKind::Omega: return Block::Omega;
    case VarKind::EqPrime: return Block::EqPrime;
    case VarKind::EdPrime: return Block::EdPrime;
    case VarKind::Vr: return Block::Vr;
    case VarKind::Efd: return Block::Efd;
    default: return Block::Rf;
  }
}

// Columns of the trajectory matrix carrying one variable kind, paired with a
// flag for angle-type columns (reference subtraction applies).
MatrixXd kind_trajectories(const CosimRun& run, VarKind kind) {
  if (is_state_kind(kind)) {
    const Block b = block_of_kind(kind);
    if (!run.layout_s.has(b)) throw ConfigError("study layout lacks this variable kind");
    MatrixXd m(run.x_s.rows(), run.layout_s.n_machines);
    for (int i = 0; i < run.layout_s.n_machines; ++i) m.col(i) = run.x_s.col(run.layout_s.idx(b, i));
    return m;
  }
  const int p = static_cast<int>(run.boundary_bus_ids_s.size());
  int offset = 0;
  if (kind == VarKind::Vs) offset = 0;
  if (kind == VarKind::ThetaS) offset = p;
  if (kind == VarKind::Ve) offset = 2 * p;
  if (kind == VarKind::ThetaE) offset = 3 * p;
  return run.boundary.middleCols(offset, p);
}

bool is_angle_kind(VarKind k) {
  return k == VarKind::Delta || k == VarKind::ThetaS || k == VarKind::ThetaE;
}

VectorXd reference_delta(const CosimRun& run, int machine_id) {
  for (int i = 0; i < run.layout_s.n_machines; ++i)
    if (run.machine_ids_s[i] == machine_id)
      return run.x_s.col(run.layout_s.idx(Block::Delta, i));
  throw ConfigError("reference machine " + std::to_string(machine_id) + " is not in the study area");
}

}  // namespace

double accuracy(const CosimRun& a, const CosimRun& b, VarKind kind,
                std::optional<int> reference_machine) {
  if (a.grid.size() != b.grid.size())
    throw ConfigError("accuracy: runs have different grids");
  for (size_t k = 0; k < a.grid.size(); ++k)
    if (std::abs(a.grid[k] - b.grid[k]) > 1e-12)
      throw ConfigError("accuracy: runs have different grids");

  MatrixXd ta = kind_trajectories(a, kind);
  MatrixXd tb = kind_trajectories(b, kind);
  if (ta.cols() != tb.cols()) throw ConfigError("accuracy: trajectory sets differ in width");

  if (reference_machine && is_angle_kind(kind)) {
    const VectorXd ra = reference_delta(a, *reference_machine);
    const VectorXd rb = reference_delta(b, *reference_machine);
    ta.colwise() -= ra;
    tb.colwise() -= rb;
  }
  const double n = static_cast<double>(ta.rows()) * ta.cols();
  return std::sqrt((ta - tb).squaredNorm() / n);
}

const MethodOutcome* CompareReport::find(Method m) const {
  for (const auto& o : outcomes)
    if (o.method == m) return &o;
  return nullptr;
}

CompareReport compare_methods(const PowerCase& c, const BalancedReduction* bal_nm,
                              const BalancedReduction* bal_lm, const CosimOptions& opts,
                              std::optional<int> reference_machine,
                              std::vector<std::string> extra_notes) {
  CompareReport report;
  report.notes = std::move(extra_notes);

  const std::vector<std::pair<Method, const BalancedReduction*>> plan = {
      {Method::UnPartitioned, nullptr},
      {Method::PartitionedUnreduced, nullptr},
      {Method::PartitionedReducedNM, bal_nm},
      {Method::PartitionedReducedLM, bal_lm},
  };
  for (const auto& [m, bal] : plan) {
    MethodOutcome out;
    out.method = m;
    try {
      if ((m == Method::PartitionedReducedNM || m == Method::PartitionedReducedLM) && bal == nullptr)
        throw ConfigError("no reduction supplied");
      out.run = run_cosim(c, m, bal, opts);
      out.ok = true;
    } catch (const std::exception& ex) {
      out.error = ex.what();
      report.notes.push_back(std::string(method_name(m)) + " failed: " + out.error);
    }
    report.outcomes.push_back(std::move(out));
  }

  const MethodOutcome* unpart = report.find(Method::UnPartitioned);
  const MethodOutcome* part = report.find(Method::PartitionedUnreduced);
  const MethodOutcome* nm = report.find(Method::PartitionedReducedNM);
  const MethodOutcome* lm = report.find(Method::PartitionedReducedLM);

  auto eps_or_nan = [&](const MethodOutcome* red, const MethodOutcome* ref, VarKind kind) {
    if (!red || !red->ok || !ref || !ref->ok) return std::numeric_limits<double>::quiet_NaN();
    return accuracy(red->run, ref->run, kind, reference_machine);
  };
  const std::vector<VarKind> state_kinds = {VarKind::Delta, VarKind::Omega,  VarKind::EqPrime,
                                            VarKind::EdPrime, VarKind::Vr,   VarKind::Efd,
                                            VarKind::Rf};
  for (VarKind k : state_kinds) {
    CompareRow row;
    row.kind = var_kind_name(k);
    row.nm_eps1 = eps_or_nan(nm, unpart, k);
    row.lm_eps1 = eps_or_nan(lm, unpart, k);
    row.nm_eps2 = eps_or_nan(nm, part, k);
    row.lm_eps2 = eps_or_nan(lm, part, k);
    report.state_rows.push_back(row);
    if (k == VarKind::Omega) {
      CompareRow pu = row;
      pu.kind = "omega_pu";
      pu.nm_eps1 /= kOmegaSync;
      pu.lm_eps1 /= kOmegaSync;
      pu.nm_eps2 /= kOmegaSync;
      pu.lm_eps2 /= kOmegaSync;
      report.state_rows.push_back(pu);
    }
  }
  const std::vector<VarKind> boundary_kinds = {VarKind::Vs, VarKind::Ve, VarKind::ThetaS,
                                               VarKind::ThetaE};
  for (VarKind k : boundary_kinds) {
    CompareRow row;
    row.kind = var_kind_name(k);
    row.nm_eps1 = eps_or_nan(nm, unpart, k);
    row.lm_eps1 = eps_or_nan(lm, unpart, k);
    row.nm_eps2 = eps_or_nan(nm, part, k);
    row.lm_eps2 = eps_or_nan(lm, part, k);
    report.boundary_rows.push_back(row);
  }
  return report;
}

namespace {

std::ofstream open_csv(const std::string& dir, const std::string& name,
                       const std::vector<std::string>& header) {
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/" + name;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (const auto& h : header) out << "# " << h << "\n";
  return out;
}

void write_kind_csv(const CosimRun& run, const std::string& dir, const std::string& name, Block b,
                    const StateLayout& layout, const MatrixXd& states,
                    const std::vector<int>& ids, const std::vector<std::string>& header) {
  if (!layout.has(b)) return;
  auto out = open_csv(dir, name, header);
  out << "t";
  for (int m = 0; m < layout.n_machines; ++m) out << ",m" << ids[m];
  out << "\n";
  for (size_t k = 0; k < run.grid.size(); ++k) {
    out << run.grid[k];
    for (int m = 0; m < layout.n_machines; ++m) out << "," << states(k, layout.idx(b, m));
    out << "\n";
  }
}

}  // namespace

void write_run_csvs(const CosimRun& run, const std::string& dir,
                    const std::vector<std::string>& header) {
  const std::vector<std::pair<std::string, Block>> kinds = {
      {"delta", Block::Delta}, {"omega", Block::Omega}, {"eqp", Block::EqPrime},
      {"edp", Block::EdPrime}, {"vr", Block::Vr},       {"efd", Block::Efd},
      {"rf", Block::Rf}};
  for (const auto& [name, b] : kinds) {
    write_kind_csv(run, dir, "study_" + name + ".csv", b, run.layout_s, run.x_s,
                   run.machine_ids_s, header);
    write_kind_csv(run, dir, "external_" + name + ".csv", b, run.layout_e, run.x_e,
                   run.machine_ids_e, header);
  }

  const int p = static_cast<int>(run.boundary_bus_ids_s.size());
  {
    auto out = open_csv(dir, "boundary.csv", header);
    out << "t";
    for (int i = 0; i < p; ++i) out << ",v_s_b" << run.boundary_bus_ids_s[i];
    for (int i = 0; i < p; ++i) out << ",theta_s_b" << run.boundary_bus_ids_s[i];
    for (int i = 0; i < p; ++i) out << ",v_e_b" << run.boundary_bus_ids_e[i];
    for (int i = 0; i < p; ++i) out << ",theta_e_b" << run.boundary_bus_ids_e[i];
    out << "\n";
    for (size_t k = 0; k < run.grid.size(); ++k) {
      out << run.grid[k];
      for (int j = 0; j < 4 * p; ++j) out << "," << run.boundary(k, j);
      out << "\n";
    }
  }
  {
    auto out = open_csv(dir, "timing.csv", header);
    out << "method,t_s,t_e,t_b,t_total,t_parallel\n";
    const auto& t = run.timings;
    out << method_name(run.method) << "," << t.t_s << "," << t.t_e << "," << t.t_b << ","
        << t.t_total << "," << t.t_parallel << "\n";
  }
}

void write_compare_csvs(const CompareReport& report, const std::string& dir,
                        const std::vector<std::string>& header) {
  auto write_rows = [&](const std::string& name, const std::vector<CompareRow>& rows) {
    auto out = open_csv(dir, name, header);
    for (const auto& n : report.notes) out << "# note: " << n << "\n";
    out << "kind,nm_eps1,lm_eps1,nm_eps2,lm_eps2\n";
    for (const auto& r : rows)
      out << r.kind << "," << r.nm_eps1 << "," << r.lm_eps1 << "," << r.nm_eps2 << ","
          << r.lm_eps2 << "\n";
  };
  write_rows("accuracy_states.csv", report.state_rows);
  write_rows("accuracy_boundary.csv", report.boundary_rows);

  auto out = open_csv(dir, "timing.csv", header);
  out << "method,ok,t_s,t_e,t_b,t_total,t_parallel\n";
  for (const auto& o : report.outcomes) {
    const auto& t = o.run.timings;
    out << method_name(o.method) << "," << (o.ok ? 1 : 0) << "," << t.t_s << "," << t.t_e << ","
        << t.t_b << "," << t.t_total << "," << t.t_parallel << "\n";
  }
}

}  // namespace gridred
