#ifndef GRIDRED_CASE_MODEL_HPP
#define GRIDRED_CASE_MODEL_HPP

#include <optional>
#include <string>
#include <vector>

#include "gridred/types.hpp"

namespace gridred {

enum class BusType { Slack, Gen, Load };

struct Bus {
  int id = 0;
  BusType type = BusType::Load;
  Complex v0;        // initial complex voltage, pu
  double p_load = 0.0;  // constant-impedance load at v0, system base
  double q_load = 0.0;
};

struct Branch {
  int id = 0;
  int from = 0;
  int to = 0;
  Complex z;         // series impedance, pu
  double b_shunt = 0.0;  // total line charging susceptance, pu
  bool tie_line = false;
};

struct Machine {
  int id = 0;
  int bus = 0;
  int model_order = 7;  // 2, 4, or 7
  double s_n = 100.0;   // machine base, MVA
  double h = 0.0;       // inertia, s (machine base)
  double k_d = 0.0;     // damping, pu
  double x_d = 0.0, x_q = 0.0;    // synchronous reactances, machine-base pu
  double xp_d = 0.0, xp_q = 0.0;  // transient reactances, machine-base pu
  double tp_d0 = 0.0, tp_q0 = 0.0;  // open-circuit time constants, s
  double t_m = 0.0;     // mechanical torque, pu
};

struct Exciter {
  int machine = 0;  // keyed by machine id
  double k_a = 0.0, t_a = 0.0;
  double k_e = 0.0, t_e = 0.0;
  double k_f = 0.0, t_f = 0.0;
  double exc1 = 0.0, exc2 = 0.0, exc3 = 0.0;
};

struct ZipLoad {
  int bus = 0;
  double p0 = 0.0, q0 = 0.0;  // initial powers, system base pu
  double p1 = 0.0, p2 = 0.0, p3 = 0.0;
  double q1 = 0.0, q2 = 0.0, q3 = 0.0;
  Complex v_nc0;  // initial complex voltage
};

struct AreaPartition {
  std::vector<int> study_buses;
  std::vector<int> external_buses;
  std::vector<int> tie_lines;  // branch ids
  // Ordered consistently with tie_lines: entry i is the endpoint of tie i
  // on the named side.
  std::vector<int> b_s_bound;
  std::vector<int> b_e_bound;
};

struct PowerCase {
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Machine> machines;
  std::vector<Exciter> exciters;
  std::vector<ZipLoad> zip_loads;
  AreaPartition partition;

  const Bus* find_bus(int id) const;
  const Branch* find_branch(int id) const;
  const Exciter* find_exciter(int machine_id) const;
};

/// Pseudo-generator: the opposite area's boundary bus seen as a frozen
/// classical machine. Its (V, theta) input pair maps onto (e'_q, delta).
struct PseudoSource {
  int local_bus = 0;   // local bus index inside the AreaView
  int tie_index = 0;   // which tie-line / input slot it belongs to
  int case_bus = 0;    // original bus id
};

/// One side of the partition with locally re-based indices. Immutable after
/// construction; safe to share across workers.
struct AreaView {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;           // own buses followed by opposite boundary buses
  std::vector<Branch> branches;     // own branches plus tie-lines, endpoints re-based
  std::vector<Machine> machines;    // own machines, terminal bus re-based
  std::vector<std::optional<Exciter>> exciters;  // per machine
  std::vector<ZipLoad> zip_loads;   // bus field re-based
  std::vector<PseudoSource> pseudo; // one per tie-line
  std::vector<int> boundary_buses;  // own boundary buses, local indices, tie order
  std::vector<int> output_buses;    // buses whose (V, theta) form the output vector
  std::vector<int> case_bus_ids;    // local index -> original bus id

  int n_buses() const { return static_cast<int>(buses.size()); }
  int n_machines() const { return static_cast<int>(machines.size()); }
  int n_pseudo() const { return static_cast<int>(pseudo.size()); }
  int n_zip() const { return static_cast<int>(zip_loads.size()); }
  int n_inputs() const { return 2 * n_pseudo(); }
  int n_outputs() const { return 2 * static_cast<int>(output_buses.size()); }
  int local_bus(int case_bus_id) const;  // -1 when absent
};

/// Parse and validate a case file. Throws ConfigError with line/field context
/// on parse failures and names the offending record on invariant violations.
PowerCase load_case(const std::string& path);
PowerCase parse_case(std::istream& in, const std::string& origin);

void save_case(const PowerCase& c, const std::string& path);
void write_case(const PowerCase& c, std::ostream& out);

/// Check all structural invariants; throws ConfigError naming the record.
void validate_case(const PowerCase& c);

/// Split into study and external views, each gaining p pseudo-generators for
/// the opposite boundary buses.
std::pair<AreaView, AreaView> partition(const PowerCase& c);

/// Monolithic view of the whole system: no pseudo-generators, empty input;
/// outputs cover the boundary buses of both areas (study side first).
AreaView whole_view(const PowerCase& c);

bool case_equal(const PowerCase& a, const PowerCase& b);

}  // namespace gridred

#endif  // GRIDRED_CASE_MODEL_HPP
