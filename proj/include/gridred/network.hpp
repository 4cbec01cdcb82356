#ifndef GRIDRED_NETWORK_HPP
#define GRIDRED_NETWORK_HPP

#include <utility>
#include <vector>

#include "gridred/case_model.hpp"
#include "gridred/types.hpp"

namespace gridred {

/// Three-phase fault on one branch: applied as a large shunt at the near-end
/// bus, then cleared in two stages (near breaker, remote breaker).
struct FaultSpec {
  int branch_id = 0;
  int bus_id = 0;  // near end; must be an endpoint of the branch
};

enum class FaultStage { Pre = 0, On = 1, NearCleared = 2, Post = 3 };

inline constexpr double kFaultShunt = 1e7;  // pu

/// Topology edits for one network configuration.
struct NetworkConfig {
  std::vector<int> removed_branches;                 // branch ids
  std::vector<std::pair<int, Complex>> extra_shunts;  // (local bus, admittance)
};

/// Edits the given area sees for a fault stage. Areas not containing the
/// faulted branch are unaffected.
NetworkConfig stage_config(const AreaView& area, const FaultSpec& fault, FaultStage stage);

/// Reduced admittance and reconstruction matrices for one area and one
/// network configuration. Retained nodes are the machine internal nodes, the
/// pseudo-source buses, and the non-conforming (ZIP) buses; everything else
/// is eliminated exactly.
struct NetworkMatrices {
  MatrixXcd y_g;    // generator currents from internal voltages
  MatrixXcd y_gnc;  // generator currents from non-conforming voltages
  MatrixXcd y_ncg;  // non-conforming currents from internal voltages
  MatrixXcd y_nc;   // non-conforming bus self/mutual admittance
  MatrixXcd r_g;    // bus voltages from internal voltages
  MatrixXcd r_nc;   // bus voltages from non-conforming voltages

  int n_machines = 0;
  int n_pseudo = 0;
  int n_zip = 0;
  int n_buses = 0;
  std::vector<int> row_of_bus;  // local bus -> reconstruction row, -1 for ZIP buses
  std::vector<int> zip_of_bus;  // local bus -> ZIP index, -1 otherwise

  int n_sources() const { return n_machines + n_pseudo; }
};

/// Bus admittance matrix of the area (no machine internal nodes), with all
/// constant-impedance loads and the ZIP constant-impedance portions folded in.
MatrixXcd assemble_bus_y(const AreaView& area, const NetworkConfig& config = {});

NetworkMatrices build_matrices(const AreaView& area, const NetworkConfig& config = {});

/// Current injected into the network by the constant-current and
/// constant-power portions of the ZIP loads, as a function of the bus
/// voltages. The injection law switches to a linearized branch for
/// |V| <= 0.5 pu.
VectorXcd zip_injection_current(const std::vector<ZipLoad>& zips, const VectorXcd& v_nc);

/// Residual of the non-conforming-load equation for a candidate solution.
VectorXcd nc_residual(const NetworkMatrices& mats, const std::vector<ZipLoad>& zips,
                      const VectorXcd& psi, const VectorXcd& v_nc);

struct NcSolveReport {
  int iterations = 0;
  double residual = 0.0;  // recomputed after convergence
};

/// Newton solve of the non-conforming-load equation with analytic Jacobian.
/// `guess` seeds the iteration; returns the complex ZIP bus voltages.
VectorXcd solve_nc_voltages(const NetworkMatrices& mats, const VectorXcd& psi,
                            const std::vector<ZipLoad>& zips, const VectorXcd& guess,
                            double tol = 1e-10, int max_iter = 50,
                            NcSolveReport* report = nullptr);

/// Complex voltages for all area buses given internal sources and solved
/// non-conforming voltages; ZIP buses pass through verbatim.
VectorXcd reconstruct_voltages(const NetworkMatrices& mats, const VectorXcd& psi_state,
                               const VectorXcd& psi_input, const VectorXcd& v_nc);

/// Boundary-bus voltage magnitudes (pu) and angles (rad), each of length p.
struct BoundaryState {
  VectorXd v_s, th_s, v_e, th_e;

  int p() const { return static_cast<int>(v_s.size()); }
  static BoundaryState zero(int p);
};

/// Everything needed to evaluate one area's algebraic boundary outputs at a
/// fixed machine state: internal sources, reduced matrices, ZIP data, and the
/// rows where the area's own boundary buses live.
struct AreaAlgebraic {
  const NetworkMatrices* mats = nullptr;
  const std::vector<ZipLoad>* zips = nullptr;
  VectorXcd psi_state;             // machine sources at step k+1
  std::vector<int> boundary_buses; // local bus per tie, own side
  VectorXcd vnc_guess;
};

struct BoundaryUpdateReport {
  int iterations = 0;
  double residual = 0.0;  // recomputed after convergence
  VectorXcd vnc_s, vnc_e; // converged inner solutions, for warm starting
};

/// Newton solve of the boundary-bus coupling equations; `previous` provides
/// the initial guess and the reference for angle unwrapping.
BoundaryState update_boundary(const AreaAlgebraic& study, const AreaAlgebraic& external,
                              const BoundaryState& previous, double tol = 1e-9,
                              int max_iter = 30, BoundaryUpdateReport* report = nullptr);

}  // namespace gridred

#endif  // GRIDRED_NETWORK_HPP
