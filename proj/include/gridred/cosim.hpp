#ifndef GRIDRED_COSIM_HPP
#define GRIDRED_COSIM_HPP

#include <optional>
#include <string>
#include <vector>

#include "gridred/balancing.hpp"
#include "gridred/case_model.hpp"
#include "gridred/dynamics.hpp"
#include "gridred/integrator.hpp"
#include "gridred/network.hpp"

namespace gridred {

enum class Method { UnPartitioned, PartitionedUnreduced, PartitionedReducedNM, PartitionedReducedLM };

const char* method_name(Method m);
Method parse_method(const std::string& name);

struct CosimTimings {
  double t_s = 0.0;       // study-area (or whole-system) integration, s
  double t_e = 0.0;       // external-area integration, s
  double t_b = 0.0;       // boundary updates, s
  double t_total = 0.0;   // t_s + t_e + t_b
  double t_parallel = 0.0;  // max(t_s, t_e) + t_b
};

struct CosimRun {
  Method method = Method::UnPartitioned;
  std::vector<double> grid;
  MatrixXd x_s;  // row per grid point, study-area layout
  MatrixXd x_e;  // row per grid point, external-area layout, original coordinates
  StateLayout layout_s, layout_e;
  std::vector<int> machine_ids_s, machine_ids_e;
  MatrixXd boundary;  // columns [V_s(p), th_s(p), V_e(p), th_e(p)]
  std::vector<int> boundary_bus_ids_s, boundary_bus_ids_e;
  CosimTimings timings;
  double max_boundary_residual = 0.0;
  double max_nc_residual = 0.0;
};

struct CosimOptions {
  double t_end = 15.0;
  StepControl control;
  std::optional<EventSchedule> events;
  int jobs = 1;
};

/// Three-step partitioned loop (study integration, external integration,
/// boundary Newton update) or the monolithic reference run. Reduced methods
/// require a truncated BalancedReduction for the external area.
CosimRun run_cosim(const PowerCase& c, Method method, const BalancedReduction* bal,
                   const CosimOptions& opts);

enum class VarKind { Delta, Omega, EqPrime, EdPrime, Vr, Efd, Rf, Vs, Ve, ThetaS, ThetaE };
const char* var_kind_name(VarKind k);

/// RMS trajectory deviation between two runs on identical grids. Rotor and
/// boundary angles are compared after subtracting the reference machine's
/// rotor angle when one is given.
double accuracy(const CosimRun& a, const CosimRun& b, VarKind kind,
                std::optional<int> reference_machine = std::nullopt);

struct MethodOutcome {
  Method method = Method::UnPartitioned;
  bool ok = false;
  std::string error;
  CosimRun run;
};

struct CompareRow {
  std::string kind;
  double nm_eps1 = 0.0, lm_eps1 = 0.0;  // vs UnPartitioned
  double nm_eps2 = 0.0, lm_eps2 = 0.0;  // vs Partitioned-Unreduced
};

struct CompareReport {
  std::vector<MethodOutcome> outcomes;
  std::vector<CompareRow> state_rows;
  std::vector<CompareRow> boundary_rows;
  std::vector<std::string> notes;

  const MethodOutcome* find(Method m) const;
};

/// Run all four methods (failures recorded per method, not fatal) and
/// assemble the accuracy and timing tables.
CompareReport compare_methods(const PowerCase& c, const BalancedReduction* bal_nm,
                              const BalancedReduction* bal_lm, const CosimOptions& opts,
                              std::optional<int> reference_machine,
                              std::vector<std::string> extra_notes = {});

/// CSV artifacts. Every file starts with '#' metadata lines (tool version,
/// config hash, timestamp); bodies are deterministic for a fixed config.
void write_run_csvs(const CosimRun& run, const std::string& dir,
                    const std::vector<std::string>& header);
void write_compare_csvs(const CompareReport& report, const std::string& dir,
                        const std::vector<std::string>& header);

}  // namespace gridred

#endif  // GRIDRED_COSIM_HPP
