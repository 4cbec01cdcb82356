#ifndef GRIDRED_DYNAMICS_HPP
#define GRIDRED_DYNAMICS_HPP

#include <vector>

#include "gridred/case_model.hpp"
#include "gridred/network.hpp"
#include "gridred/types.hpp"

namespace gridred {

/// State blocks in layout order. An area's state vector is variable-type
/// major: all rotor angles, then all speeds, and so on.
enum class Block { Delta = 0, Omega, EqPrime, EdPrime, Vr, Efd, Rf };

inline const char* block_name(Block b) {
  switch (b) {
    case Block::Delta: return "delta";
    case Block::Omega: return "omega";
    case Block::EqPrime: return "eqp";
    case Block::EdPrime: return "edp";
    case Block::Vr: return "vr";
    case Block::Efd: return "efd";
    default: return "rf";
  }
}

/// Index map between (block, machine) pairs and flat vector positions.
/// Machines whose model order does not reach a block keep a frozen entry
/// there: present in the vector, derivative identically zero.
struct StateLayout {
  int n_machines = 0;
  int n_blocks = 0;  // 2, 4, or 7
  std::vector<int> model_order;

  int dim() const { return n_machines * n_blocks; }
  bool has(Block b) const { return static_cast<int>(b) < n_blocks; }
  int idx(Block b, int machine) const { return static_cast<int>(b) * n_machines + machine; }
  Block block_of(int flat) const { return static_cast<Block>(flat / n_machines); }
  int machine_of(int flat) const { return flat % n_machines; }

  bool frozen(int flat) const {
    const Block b = block_of(flat);
    const int order = model_order[machine_of(flat)];
    if (b == Block::Delta || b == Block::Omega) return false;
    if (b == Block::EqPrime || b == Block::EdPrime) return order < 4;
    return order < 7;
  }

  static StateLayout for_area(const AreaView& area);
};

/// Per-machine intermediate quantities of the algebraic chain, mostly for
/// diagnostics and oracle tests.
struct MachineAlgebra {
  VectorXd i_q, i_d;   // machine-base dq currents
  VectorXd e_q, e_d;   // terminal-voltage dq components used by the chain
  VectorXd t_e;        // electrical torque
  VectorXd v_tr;       // |terminal voltage| as seen by the exciter
  VectorXcd psi_state; // internal voltage sources
  VectorXcd v_nc;      // solved non-conforming voltages
};

/// Warm-start and audit state threaded through repeated solves. One cache per
/// integration context; the dynamics themselves are pure.
struct NcCache {
  VectorXcd vnc;
  double max_residual = 0.0;
  long solves = 0;
};

/// Right-hand side and output map for one area: two-axis machines with DC1
/// exciters (7th order), transient machines (4th), classical machines (2nd),
/// plus frozen pseudo-sources carrying the boundary inputs.
class AreaDynamics {
 public:
  explicit AreaDynamics(const AreaView& view);

  const AreaView& view() const { return *view_; }
  const StateLayout& layout() const { return layout_; }

  int n_states() const { return layout_.dim(); }
  int n_inputs() const { return view_->n_inputs(); }
  int n_outputs() const { return view_->n_outputs(); }

  const VectorXd& x0() const { return x0_; }
  const VectorXd& u0() const { return u0_; }
  const VectorXcd& vnc0() const { return vnc0_; }

  /// Mechanical torques and exciter references that make x0 an exact
  /// equilibrium of this model; case authoring aids.
  const VectorXd& equilibrium_t_m() const { return t_m_eq_; }
  const VectorXd& equilibrium_exc3() const { return exc3_eq_; }

  /// Internal voltage sources of the area machines for a given state.
  VectorXcd psi_state(const VectorXd& x) const;

  VectorXd rhs(const NetworkMatrices& mats, const VectorXd& x, const VectorXd& u,
               NcCache* cache = nullptr) const;

  /// Own-boundary (V, theta) via voltage reconstruction, ordered [V; theta].
  VectorXd outputs(const NetworkMatrices& mats, const VectorXd& x, const VectorXd& u,
                   NcCache* cache = nullptr) const;

  /// Full algebraic chain at one point, for tests and diagnostics.
  MachineAlgebra algebra(const NetworkMatrices& mats, const VectorXd& x, const VectorXd& u,
                         NcCache* cache = nullptr) const;

  NcCache make_cache() const { return NcCache{vnc0_, 0.0, 0}; }

 private:
  double state_or_param(Block b, int m, const VectorXd& x) const;
  VectorXcd solve_vnc(const NetworkMatrices& mats, const VectorXcd& psi, NcCache* cache) const;

  const AreaView* view_;
  StateLayout layout_;
  MatrixXd frozen_params_;  // n_machines x 7, values for blocks the layout lacks
  VectorXd kappa_;          // S_B / S_N per machine
  VectorXd x0_, u0_;
  VectorXcd vnc0_;
  VectorXd t_m_eq_, exc3_eq_;
};

}  // namespace gridred

#endif  // GRIDRED_DYNAMICS_HPP
