// Pipeline driver: calibrate -> gramians -> balance -> cosim -> compare.
// Stages exchange plain-text artifact files so the expensive steps run once.

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "gridred/balancing.hpp"
#include "gridred/cosim.hpp"
#include "gridred/demo_case.hpp"
#include "gridred/gramians.hpp"
#include "gridred/matrixio.hpp"

namespace {

using namespace gridred;

std::string timestamp_now() {
  const std::time_t t = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  return buf;
}

std::vector<std::string> file_header(const std::string& config) {
  return {std::string(kToolName) + " " + kToolVersion,
          "config-hash " + std::to_string(fnv1a64(config)),
          "generated " + timestamp_now()};
}

struct FaultFlags {
  int branch = -1;
  int bus = -1;
  double t_on = 0.1;
  double clear_near = 0.15;
  double clear_remote = 0.2;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--fault-branch", branch, "faulted branch id (omit for no fault)");
    cmd->add_option("--fault-bus", bus, "near-end bus of the faulted branch");
    cmd->add_option("--fault-on", t_on, "fault application time, s")->capture_default_str();
    cmd->add_option("--clear-near", clear_near, "near-end clearing time, s")->capture_default_str();
    cmd->add_option("--clear-remote", clear_remote, "remote-end clearing time, s")
        ->capture_default_str();
  }

  std::optional<EventSchedule> events() const {
    if (branch < 0) return std::nullopt;
    if (bus < 0) throw ConfigError("--fault-branch needs --fault-bus");
    EventSchedule ev;
    ev.fault_on = t_on;
    ev.clear_near = clear_near;
    ev.clear_remote = clear_remote;
    ev.faulted_branch = branch;
    ev.faulted_end = bus;
    ev.validate();
    return ev;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "fault=" << branch << ":" << bus << "@" << t_on << "/" << clear_near << "/"
       << clear_remote;
    return os.str();
  }
};

MagnitudeProfile load_profile(const std::string& calibration_path) {
  if (calibration_path.empty()) return reference_profile();
  const TextDocument doc = load_document(calibration_path);
  const VectorXd k = doc.vector("k");
  if (k.size() != 6) throw ConfigError("calibration file: vector k must have 6 entries");
  MagnitudeProfile p;
  p.k_v = k(0);
  p.k_th = k(1);
  p.k_delta = k(2);
  p.k_omega = k(3);
  p.k_eqp = k(4);
  p.k_edp = k(5);
  return p;
}

int cmd_calibrate(const std::string& case_path, const std::string& out_dir, int n_faults,
                  double alpha_u, double alpha_x, std::uint64_t seed) {
  const PowerCase c = load_case(case_path);
  const CalibrationResult res = calibrate_magnitudes(c, n_faults, alpha_u, alpha_x, seed);

  TextDocument doc;
  doc.meta["kind"] = "calibration";
  doc.meta["n_f"] = std::to_string(res.n_f);
  doc.meta["failed_faults"] = std::to_string(res.failed_faults);
  doc.meta["alpha_u"] = std::to_string(res.alpha_u);
  doc.meta["alpha_x"] = std::to_string(res.alpha_x);
  doc.meta["k_order"] = "k_v k_theta k_delta k_omega k_eqp k_edp";
  VectorXd k(6);
  k << res.k_v, res.k_th, res.k_delta, res.k_omega, res.k_eqp, res.k_edp;
  doc.vectors["k"] = k;

  std::filesystem::create_directories(out_dir);
  const std::string cfg = "calibrate;case=" + case_path + ";n_f=" + std::to_string(n_faults) +
                          ";seed=" + std::to_string(seed);
  save_document(out_dir + "/calibration.txt", doc, file_header(cfg));
  std::cout << "calibration written to " << out_dir << "/calibration.txt (" << res.failed_faults
            << " of " << n_faults << " faults skipped)\n";
  return 0;
}

int cmd_gramians(const std::string& case_path, const std::string& out_dir,
                 const std::string& profile_name, const std::string& calibration_path,
                 double horizon, double dt, int jobs, std::uint64_t seed) {
  const PowerCase c = load_case(case_path);
  auto [study, external] = partition(c);
  const AreaDynamics dyn(external);
  const NetworkMatrices mats = build_matrices(external);

  const SchemeProfile prof = parse_profile(profile_name);
  MagnitudeProfile mags = load_profile(calibration_path);
  mags.k_v *= prof.k_scale;
  mags.k_th *= prof.k_scale;
  mags.k_delta *= prof.k_scale;
  mags.k_omega *= prof.k_scale;
  mags.k_eqp *= prof.k_scale;
  mags.k_edp *= prof.k_scale;

  PerturbationScheme scheme;
  scheme.m0 = profile_m0(prof);
  scheme.horizon = horizon;
  scheme.dt = dt;
  scheme.jobs = jobs;
  scheme.ku_entry = ku_for_inputs(mags, external.n_pseudo());
  scheme.kx_entry = kx_for_states(mags, dyn.layout());

  const ScaledSystem ss = scale_system(area_system(dyn, mats), dyn.x0(), dyn.u0());
  for (int i : ss.substituted_states)
    std::cerr << "warning: zero steady-state component in state " << i
              << "; unit scale substituted\n";
  for (int i : ss.substituted_inputs)
    std::cerr << "warning: zero steady-state component in input " << i
              << "; unit scale substituted\n";

  const CovariancePair pair = covariance_pair(ss, scheme);

  std::filesystem::create_directories(out_dir);
  std::ostringstream cfg;
  cfg << "gramians;case=" << case_path << ";profile=" << profile_name << ";horizon=" << horizon
      << ";dt=" << dt << ";calibration=" << calibration_path << ";seed=" << seed;
  save_document(out_dir + "/covariances.txt", covariance_to_document(pair),
                file_header(cfg.str()));
  std::cout << "covariances (" << pair.w_c.rows() << "x" << pair.w_c.cols() << ") written to "
            << out_dir << "/covariances.txt\n";
  return 0;
}

int cmd_balance(const std::string& covariance_path, const std::string& case_path,
                const std::string& method, double cutoff, int n_red_explicit,
                const std::string& out_dir) {
  CovariancePair pair;
  if (method == "lm") {
    if (case_path.empty()) throw ConfigError("balance --method lm needs --case");
    const PowerCase c = load_case(case_path);
    auto [study, external] = partition(c);
    const AreaDynamics dyn(external);
    const NetworkMatrices mats = build_matrices(external);
    const ScaledSystem ss = scale_system(area_system(dyn, mats), dyn.x0(), dyn.u0());
    std::vector<bool> frozen(dyn.n_states());
    for (int i = 0; i < dyn.n_states(); ++i) frozen[i] = dyn.layout().frozen(i);
    pair = linearized_covariance_pair(ss, frozen);
  } else {
    if (covariance_path.empty()) throw ConfigError("balance needs --covariances");
    pair = covariance_from_document(load_document(covariance_path));
  }

  BalancedReduction bal = (method == "laub") ? balance_laub(pair) : balance(pair);
  if (method == "lm") bal.method = "lm";
  bal = (n_red_explicit > 0) ? truncate_to(std::move(bal), n_red_explicit)
                             : truncate(std::move(bal), cutoff);

  std::filesystem::create_directories(out_dir);
  std::ostringstream cfg;
  cfg << "balance;covariances=" << covariance_path << ";case=" << case_path
      << ";method=" << method << ";cutoff=" << cutoff << ";n_red=" << n_red_explicit;
  const std::string name = "reduction_" + method + ".txt";
  save_document(out_dir + "/" + name, reduction_to_document(bal), file_header(cfg.str()));
  std::cout << name << ": n = " << bal.n() << ", n_red = " << bal.n_red << ", hankel head =";
  for (int i = 0; i < std::min<int>(5, bal.hankel.size()); ++i) std::cout << " " << bal.hankel(i);
  std::cout << "\n";
  return 0;
}

std::optional<BalancedReduction> maybe_reduction(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return reduction_from_document(load_document(path));
}

int cmd_cosim(const std::string& case_path, const std::string& out_dir,
              const std::string& methods_csv, const std::string& red_nm_path,
              const std::string& red_lm_path, const FaultFlags& fault, double t_end, int jobs,
              double tolerance) {
  const PowerCase c = load_case(case_path);
  const auto red_nm = maybe_reduction(red_nm_path);
  const auto red_lm = maybe_reduction(red_lm_path);

  CosimOptions opts;
  opts.t_end = t_end;
  opts.jobs = jobs;
  opts.events = fault.events();
  opts.control.tolerance = tolerance;

  std::vector<Method> methods;
  std::stringstream ss(methods_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) methods.push_back(parse_method(tok));
  if (methods.empty()) throw ConfigError("--methods is empty");

  std::ostringstream cfg;
  cfg << "cosim;case=" << case_path << ";methods=" << methods_csv << ";" << fault.summary()
      << ";t_end=" << t_end << ";tol=" << tolerance;

  for (Method m : methods) {
    const BalancedReduction* bal = nullptr;
    if (m == Method::PartitionedReducedNM) {
      if (!red_nm) throw ConfigError("method reduced-nm needs --reduction-nm");
      bal = &*red_nm;
    } else if (m == Method::PartitionedReducedLM) {
      if (!red_lm) throw ConfigError("method reduced-lm needs --reduction-lm");
      bal = &*red_lm;
    }
    const CosimRun run = run_cosim(c, m, bal, opts);
    const std::string dir = out_dir + "/" + method_name(m);
    write_run_csvs(run, dir, file_header(cfg.str()));
    std::cout << method_name(m) << ": " << run.grid.size() << " grid points, t_total = "
              << run.timings.t_total << " s, t_parallel = " << run.timings.t_parallel
              << " s, max boundary residual = " << run.max_boundary_residual << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& case_path, const std::string& out_dir,
                const std::string& red_nm_path, const std::string& red_lm_path,
                const std::string& covariance_path, const FaultFlags& fault, double t_end,
                int jobs, double tolerance, int ref_machine) {
  const PowerCase c = load_case(case_path);
  const auto red_nm = maybe_reduction(red_nm_path);
  const auto red_lm = maybe_reduction(red_lm_path);

  CosimOptions opts;
  opts.t_end = t_end;
  opts.jobs = jobs;
  opts.events = fault.events();
  opts.control.tolerance = tolerance;

  std::vector<std::string> notes;
  if (!covariance_path.empty()) {
    // Square-root balancing on the same covariances, reported as a diagnostic.
    try {
      const CovariancePair pair = covariance_from_document(load_document(covariance_path));
      balance_laub(pair);
      notes.push_back("square-root (Laub) balancing succeeded on the supplied covariances");
    } catch (const std::exception& ex) {
      notes.push_back(std::string("square-root (Laub) balancing: non-minimal failure: ") +
                      ex.what());
    }
  }

  const std::optional<int> ref =
      ref_machine >= 0 ? std::optional<int>(ref_machine) : std::nullopt;
  const CompareReport report = compare_methods(c, red_nm ? &*red_nm : nullptr,
                                               red_lm ? &*red_lm : nullptr, opts, ref, notes);

  std::ostringstream cfg;
  cfg << "compare;case=" << case_path << ";" << fault.summary() << ";t_end=" << t_end
      << ";tol=" << tolerance << ";ref=" << ref_machine;
  write_compare_csvs(report, out_dir, file_header(cfg.str()));

  for (const auto& o : report.outcomes)
    std::cout << method_name(o.method) << ": " << (o.ok ? "ok" : o.error) << "\n";
  for (const auto& n : report.notes) std::cout << "note: " << n << "\n";
  std::cout << "accuracy tables written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gridred: empirical-covariance model reduction and partitioned grid simulation"};
  app.require_subcommand(1);

  std::string case_path, out_dir = "out";
  std::string profile = "LS";
  std::string calibration_path, covariance_path, red_nm_path, red_lm_path;
  std::string methods = "unpartitioned,partitioned";
  std::string balance_method = "nm";
  double horizon = 5.0, dt = 0.01, cutoff = kDefaultHankelCutoff, t_end = 15.0, tolerance = 1e-6;
  double alpha_u = 2.0, alpha_x = 2.0;
  int n_faults = 100, jobs = 1, n_red = -1, ref_machine = -1;
  std::uint64_t seed = 1;
  FaultFlags fault;

  auto* cal = app.add_subcommand("calibrate", "determine perturbation magnitude factors");
  cal->add_option("--case", case_path, "case file")->required();
  cal->add_option("--out", out_dir, "output directory")->capture_default_str();
  cal->add_option("--n-faults", n_faults, "fault ensemble size")->capture_default_str();
  cal->add_option("--alpha-u", alpha_u, "input safety factor")->capture_default_str();
  cal->add_option("--alpha-x", alpha_x, "state safety factor")->capture_default_str();
  cal->add_option("--seed", seed, "fault sampling seed")->capture_default_str();

  auto* gr = app.add_subcommand("gramians", "empirical covariances of the external area");
  gr->add_option("--case", case_path, "case file")->required();
  gr->add_option("--out", out_dir, "output directory")->capture_default_str();
  gr->add_option("--profile", profile, "magnitude profile: LS, LS-Half, LS-Double, GS, GS-Half, GS-Double")
      ->capture_default_str();
  gr->add_option("--calibration", calibration_path, "calibration file (default: built-in profile)");
  gr->add_option("--horizon", horizon, "experiment horizon, s")->capture_default_str();
  gr->add_option("--dt", dt, "sampling interval, s")->capture_default_str();
  gr->add_option("--jobs", jobs, "worker threads")->capture_default_str();
  gr->add_option("--seed", seed, "recorded in the config hash")->capture_default_str();

  auto* ba = app.add_subcommand("balance", "balance covariances and truncate");
  ba->add_option("--covariances", covariance_path, "covariance file from the gramians stage");
  ba->add_option("--case", case_path, "case file (needed for --method lm)");
  ba->add_option("--method", balance_method, "nm, laub, or lm")->capture_default_str();
  ba->add_option("--cutoff", cutoff, "retain states with Hankel value above this")
      ->capture_default_str();
  ba->add_option("--n-red", n_red, "explicit retained order (overrides --cutoff)");
  ba->add_option("--out", out_dir, "output directory")->capture_default_str();

  auto* co = app.add_subcommand("cosim", "run co-simulations and write trajectories");
  co->add_option("--case", case_path, "case file")->required();
  co->add_option("--out", out_dir, "output directory")->capture_default_str();
  co->add_option("--methods", methods, "comma-separated method list")->capture_default_str();
  co->add_option("--reduction-nm", red_nm_path, "reduction file for reduced-nm");
  co->add_option("--reduction-lm", red_lm_path, "reduction file for reduced-lm");
  co->add_option("--t-end", t_end, "simulation horizon, s")->capture_default_str();
  co->add_option("--jobs", jobs, "2 runs the areas concurrently")->capture_default_str();
  co->add_option("--tolerance", tolerance, "integrator relative tolerance")->capture_default_str();
  fault.add_to(co);

  auto* cp = app.add_subcommand("compare", "run all four methods and tabulate accuracy");
  cp->add_option("--case", case_path, "case file")->required();
  cp->add_option("--out", out_dir, "output directory")->capture_default_str();
  cp->add_option("--reduction-nm", red_nm_path, "reduction file for reduced-nm");
  cp->add_option("--reduction-lm", red_lm_path, "reduction file for reduced-lm");
  cp->add_option("--covariances", covariance_path,
                 "covariance file; a square-root balancing attempt is reported on it");
  cp->add_option("--ref-machine", ref_machine, "reference machine id for angle comparisons");
  cp->add_option("--t-end", t_end, "simulation horizon, s")->capture_default_str();
  cp->add_option("--jobs", jobs, "2 runs the areas concurrently")->capture_default_str();
  cp->add_option("--tolerance", tolerance, "integrator relative tolerance")->capture_default_str();
  fault.add_to(cp);

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    if (cal->parsed())
      return cmd_calibrate(case_path, out_dir, n_faults, alpha_u, alpha_x, seed);
    if (gr->parsed())
      return cmd_gramians(case_path, out_dir, profile, calibration_path, horizon, dt, jobs, seed);
    if (ba->parsed())
      return cmd_balance(covariance_path, case_path, balance_method, cutoff, n_red, out_dir);
    if (co->parsed())
      return cmd_cosim(case_path, out_dir, methods, red_nm_path, red_lm_path, fault, t_end, jobs,
                       tolerance);
    if (cp->parsed())
      return cmd_compare(case_path, out_dir, red_nm_path, red_lm_path, covariance_path, fault,
                         t_end, jobs, tolerance, ref_machine);
  } catch (const gridred::ConfigError& ex) {
    std::cerr << "stage " << stage << ": " << ex.what() << "\n";
    return 2;
  } catch (const gridred::NumericalError& ex) {
    std::cerr << "stage " << stage << ": numerical failure: " << ex.what() << "\n";
    return 3;
  } catch (const std::exception& ex) {
    std::cerr << "stage " << stage << ": " << ex.what() << "\n";
    return 3;
  }
  return 0;
}
