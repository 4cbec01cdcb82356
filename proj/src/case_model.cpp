#include "gridred/case_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace gridred {

namespace {

std::string bus_type_token(BusType t) {
  switch (t) {
    case BusType::Slack: return "slack";
    case BusType::Gen: return "gen";
    default: return "load";
  }
}

BusType parse_bus_type(const std::string& tok, const std::string& where) {
  if (tok == "slack") return BusType::Slack;
  if (tok == "gen") return BusType::Gen;
  if (tok == "load") return BusType::Load;
  throw ConfigError(where + ": unknown bus type '" + tok + "'");
}

struct Tokenizer {
  std::istringstream ss;
  std::string origin;
  int line_no;
  std::string keyword;
  int field = 0;

  Tokenizer(const std::string& line, std::string orig, int ln, std::string kw)
      : ss(line), origin(std::move(orig)), line_no(ln), keyword(std::move(kw)) {
    std::string skip;
    ss >> skip;  // consume the keyword
  }

  std::string where() const {
    return origin + ":" + std::to_string(line_no) + " (" + keyword + " field " +
           std::to_string(field) + ")";
  }

  double num() {
    ++field;
    double v;
    if (!(ss >> v)) throw ConfigError(where() + ": expected a number");
    if (!std::isfinite(v)) throw ConfigError(where() + ": non-finite value");
    return v;
  }

  int integer() {
    ++field;
    int v;
    if (!(ss >> v)) throw ConfigError(where() + ": expected an integer");
    return v;
  }

  std::string word() {
    ++field;
    std::string v;
    if (!(ss >> v)) throw ConfigError(where() + ": expected a token");
    return v;
  }

  std::optional<std::string> maybe_word() {
    std::string v;
    if (ss >> v) {
      ++field;
      return v;
    }
    return std::nullopt;
  }

  double as_num(const std::string& s) {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where() + ": expected a number, got '" + s + "'");
    }
  }

  int as_int(const std::string& s) {
    try {
      size_t pos = 0;
      const int v = std::stoi(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ConfigError(where() + ": expected an integer, got '" + s + "'");
    }
  }
};

}  // namespace

const Bus* PowerCase::find_bus(int id) const {
  for (const auto& b : buses)
    if (b.id == id) return &b;
  return nullptr;
}

const Branch* PowerCase::find_branch(int id) const {
  for (const auto& b : branches)
    if (b.id == id) return &b;
  return nullptr;
}

const Exciter* PowerCase::find_exciter(int machine_id) const {
  for (const auto& e : exciters)
    if (e.machine == machine_id) return &e;
  return nullptr;
}

int AreaView::local_bus(int case_bus_id) const {
  for (int i = 0; i < static_cast<int>(case_bus_ids.size()); ++i)
    if (case_bus_ids[i] == case_bus_id) return i;
  return -1;
}

PowerCase parse_case(std::istream& in, const std::string& origin) {
  PowerCase c;
  double angle_scale = 1.0;  // radians unless an ANGLES DEG tag appears
  std::string line;
  int line_no = 0;
  bool saw_system = false;

  auto make_complex = [&](double mag, double ang) {
    return std::polar(mag, ang * angle_scale);
  };

  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;

    std::istringstream head(line);
    std::string kw;
    head >> kw;
    Tokenizer tok(line, origin, line_no, kw);

    if (kw == "SYSTEM") {
      c.base_mva = tok.num();
      saw_system = true;
    } else if (kw == "ANGLES") {
      const std::string unit = tok.word();
      if (unit == "DEG")
        angle_scale = kPi / 180.0;
      else if (unit == "RAD")
        angle_scale = 1.0;
      else
        throw ConfigError(tok.where() + ": angle unit must be DEG or RAD");
    } else if (kw == "BUS") {
      Bus b;
      b.id = tok.integer();
      b.type = parse_bus_type(tok.word(), tok.where());
      const double vm = tok.num();
      const double va = tok.num();
      b.v0 = make_complex(vm, va);
      if (auto p = tok.maybe_word()) {
        b.p_load = tok.as_num(*p);
        b.q_load = tok.num();
      }
      c.buses.push_back(b);
    } else if (kw == "BRANCH") {
      Branch b;
      b.id = tok.integer();
      b.from = tok.integer();
      b.to = tok.integer();
      const double r = tok.num();
      const double x = tok.num();
      b.z = Complex(r, x);
      b.b_shunt = tok.num();
      if (auto t = tok.maybe_word()) {
        if (*t != "TIE") throw ConfigError(tok.where() + ": unexpected trailing token '" + *t + "'");
        b.tie_line = true;
      }
      c.branches.push_back(b);
    } else if (kw == "MACHINE") {
      Machine m;
      m.id = tok.integer();
      m.bus = tok.integer();
      m.model_order = tok.integer();
      m.s_n = tok.num();
      m.h = tok.num();
      m.k_d = tok.num();
      m.x_d = tok.num();
      m.x_q = tok.num();
      m.xp_d = tok.num();
      m.xp_q = tok.num();
      m.tp_d0 = tok.num();
      m.tp_q0 = tok.num();
      m.t_m = tok.num();
      c.machines.push_back(m);
    } else if (kw == "EXCITER") {
      Exciter e;
      e.machine = tok.integer();
      e.k_a = tok.num();
      e.t_a = tok.num();
      e.k_e = tok.num();
      e.t_e = tok.num();
      e.k_f = tok.num();
      e.t_f = tok.num();
      e.exc1 = tok.num();
      e.exc2 = tok.num();
      e.exc3 = tok.num();
      c.exciters.push_back(e);
    } else if (kw == "ZIP") {
      ZipLoad z;
      z.bus = tok.integer();
      z.p0 = tok.num();
      z.q0 = tok.num();
      z.p1 = tok.num();
      z.p2 = tok.num();
      z.p3 = tok.num();
      z.q1 = tok.num();
      z.q2 = tok.num();
      z.q3 = tok.num();
      const double vm = tok.num();
      const double va = tok.num();
      z.v_nc0 = make_complex(vm, va);
      c.zip_loads.push_back(z);
    } else if (kw == "AREA") {
      const std::string which = tok.word();
      auto* dest = &c.partition.study_buses;
      if (which == "EXTERNAL")
        dest = &c.partition.external_buses;
      else if (which != "STUDY")
        throw ConfigError(tok.where() + ": area must be STUDY or EXTERNAL");
      while (auto w = tok.maybe_word()) dest->push_back(tok.as_int(*w));
    } else {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": unknown keyword '" + kw + "'");
    }
  }
  if (!saw_system) throw ConfigError(origin + ": missing SYSTEM line");

  // Derive the tie-line and boundary-bus bookkeeping from TIE tags.
  std::set<int> study(c.partition.study_buses.begin(), c.partition.study_buses.end());
  std::set<int> external(c.partition.external_buses.begin(), c.partition.external_buses.end());
  for (const auto& b : c.branches) {
    if (!b.tie_line) continue;
    c.partition.tie_lines.push_back(b.id);
    const bool from_study = study.count(b.from) > 0;
    const bool from_ext = external.count(b.from) > 0;
    const bool to_study = study.count(b.to) > 0;
    const bool to_ext = external.count(b.to) > 0;
    if (from_study && to_ext) {
      c.partition.b_s_bound.push_back(b.from);
      c.partition.b_e_bound.push_back(b.to);
    } else if (from_ext && to_study) {
      c.partition.b_s_bound.push_back(b.to);
      c.partition.b_e_bound.push_back(b.from);
    } else {
      throw ConfigError("tie-line branch " + std::to_string(b.id) +
                        ": endpoints are not labeled study/external");
    }
  }

  validate_case(c);
  return c;
}

PowerCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open case file '" + path + "'");
  return parse_case(in, path);
}

void write_case(const PowerCase& c, std::ostream& out) {
  out << std::setprecision(17);
  out << "# " << kToolName << " case file\n";
  out << "SYSTEM " << c.base_mva << "\n";
  out << "ANGLES RAD\n";
  for (const auto& b : c.buses) {
    out << "BUS " << b.id << " " << bus_type_token(b.type) << " " << std::abs(b.v0) << " "
        << std::arg(b.v0);
    if (b.p_load != 0.0 || b.q_load != 0.0) out << " " << b.p_load << " " << b.q_load;
    out << "\n";
  }
  for (const auto& b : c.branches) {
    out << "BRANCH " << b.id << " " << b.from << " " << b.to << " " << b.z.real() << " "
        << b.z.imag() << " " << b.b_shunt;
    if (b.tie_line) out << " TIE";
    out << "\n";
  }
  for (const auto& m : c.machines) {
    out << "MACHINE " << m.id << " " << m.bus << " " << m.model_order << " " << m.s_n << " " << m.h
        << " " << m.k_d << " " << m.x_d << " " << m.x_q << " " << m.xp_d << " " << m.xp_q << " "
        << m.tp_d0 << " " << m.tp_q0 << " " << m.t_m << "\n";
  }
  for (const auto& e : c.exciters) {
    out << "EXCITER " << e.machine << " " << e.k_a << " " << e.t_a << " " << e.k_e << " " << e.t_e
        << " " << e.k_f << " " << e.t_f << " " << e.exc1 << " " << e.exc2 << " " << e.exc3 << "\n";
  }
  for (const auto& z : c.zip_loads) {
    out << "ZIP " << z.bus << " " << z.p0 << " " << z.q0 << " " << z.p1 << " " << z.p2 << " "
        << z.p3 << " " << z.q1 << " " << z.q2 << " " << z.q3 << " " << std::abs(z.v_nc0) << " "
        << std::arg(z.v_nc0) << "\n";
  }
  auto area_line = [&](const char* tag, const std::vector<int>& ids) {
    if (ids.empty()) return;
    out << "AREA " << tag;
    for (int id : ids) out << " " << id;
    out << "\n";
  };
  area_line("STUDY", c.partition.study_buses);
  area_line("EXTERNAL", c.partition.external_buses);
}

void save_case(const PowerCase& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write case file '" + path + "'");
  write_case(c, out);
}

void validate_case(const PowerCase& c) {
  std::set<int> bus_ids;
  for (const auto& b : c.buses) {
    if (!bus_ids.insert(b.id).second)
      throw ConfigError("bus " + std::to_string(b.id) + ": duplicate id");
    if (!(std::abs(b.v0) > 0.0))
      throw ConfigError("bus " + std::to_string(b.id) + ": initial voltage magnitude must be > 0");
  }
  std::set<int> branch_ids;
  for (const auto& b : c.branches) {
    const std::string tag = "branch " + std::to_string(b.id);
    if (!branch_ids.insert(b.id).second) throw ConfigError(tag + ": duplicate id");
    if (b.from == b.to) throw ConfigError(tag + ": endpoints must be two distinct buses");
    if (!bus_ids.count(b.from) || !bus_ids.count(b.to))
      throw ConfigError(tag + ": references a bus that does not exist");
    if (std::abs(b.z) == 0.0) throw ConfigError(tag + ": zero series impedance");
  }
  std::set<int> machine_ids;
  std::set<int> machine_buses;
  for (const auto& m : c.machines) {
    const std::string tag = "machine " + std::to_string(m.id);
    if (!machine_ids.insert(m.id).second) throw ConfigError(tag + ": duplicate id");
    if (!bus_ids.count(m.bus)) throw ConfigError(tag + ": references a bus that does not exist");
    if (!machine_buses.insert(m.bus).second)
      throw ConfigError(tag + ": more than one machine on bus " + std::to_string(m.bus));
    if (m.model_order != 2 && m.model_order != 4 && m.model_order != 7)
      throw ConfigError(tag + ": model order must be 2, 4, or 7");
    if (!(m.h > 0.0)) throw ConfigError(tag + ": H must be > 0");
    if (!(m.xp_d > 0.0) || m.x_d < m.xp_d)
      throw ConfigError(tag + ": reactances must satisfy x_d >= x'_d > 0");
    if (m.model_order >= 4 && (!(m.tp_d0 > 0.0) || !(m.tp_q0 > 0.0)))
      throw ConfigError(tag + ": T'_d0 and T'_q0 must be > 0 for model order >= 4");
    if (!(m.s_n > 0.0)) throw ConfigError(tag + ": S_N must be > 0");
  }
  for (const auto& m : c.machines) {
    const bool has_exc = c.find_exciter(m.id) != nullptr;
    if (m.model_order == 7 && !has_exc)
      throw ConfigError("machine " + std::to_string(m.id) + ": 7th-order model requires an exciter");
    if (m.model_order != 7 && has_exc)
      throw ConfigError("machine " + std::to_string(m.id) +
                        ": exciter given but model order is not 7");
  }
  for (const auto& e : c.exciters) {
    const std::string tag = "exciter for machine " + std::to_string(e.machine);
    if (!machine_ids.count(e.machine))
      throw ConfigError(tag + ": references a machine that does not exist");
    if (!(e.t_a > 0.0) || !(e.t_e > 0.0) || !(e.t_f > 0.0))
      throw ConfigError(tag + ": T_A, T_E, T_F must be > 0");
  }
  std::set<int> zip_buses;
  for (const auto& z : c.zip_loads) {
    const std::string tag = "ZIP load at bus " + std::to_string(z.bus);
    if (!bus_ids.count(z.bus)) throw ConfigError(tag + ": references a bus that does not exist");
    if (!zip_buses.insert(z.bus).second) throw ConfigError(tag + ": duplicate ZIP record");
    if (std::abs(z.p1 + z.p2 + z.p3 - 1.0) > 1e-12)
      throw ConfigError(tag + ": p1+p2+p3 must equal 1");
    if (std::abs(z.q1 + z.q2 + z.q3 - 1.0) > 1e-12)
      throw ConfigError(tag + ": q1+q2+q3 must equal 1");
    if (!std::isfinite(z.p0) || !std::isfinite(z.q0))
      throw ConfigError(tag + ": P0 and Q0 must be finite");
    if (!(std::abs(z.v_nc0) > 0.0)) throw ConfigError(tag + ": V_nc0 magnitude must be > 0");
  }

  // Partition bookkeeping.
  const auto& p = c.partition;
  std::set<int> study(p.study_buses.begin(), p.study_buses.end());
  std::set<int> external(p.external_buses.begin(), p.external_buses.end());
  for (int id : study)
    if (external.count(id))
      throw ConfigError("bus " + std::to_string(id) + ": labeled both study and external");
  if (!study.empty() || !external.empty()) {
    for (const auto& b : c.buses)
      if (!study.count(b.id) && !external.count(b.id))
        throw ConfigError("bus " + std::to_string(b.id) + ": missing area label");
    for (int id : p.study_buses)
      if (!bus_ids.count(id)) throw ConfigError("area label references unknown bus " + std::to_string(id));
    for (int id : p.external_buses)
      if (!bus_ids.count(id)) throw ConfigError("area label references unknown bus " + std::to_string(id));
    for (const auto& b : c.branches) {
      const bool cross = (study.count(b.from) > 0) != (study.count(b.to) > 0);
      if (cross && !b.tie_line)
        throw ConfigError("branch " + std::to_string(b.id) +
                          ": crosses the partition but is not tagged TIE");
      if (!cross && b.tie_line)
        throw ConfigError("branch " + std::to_string(b.id) +
                          ": tagged TIE but does not cross the partition");
    }
  } else if (!p.tie_lines.empty()) {
    throw ConfigError("tie-lines present but no area labels given");
  }
  if (p.b_s_bound.size() != p.tie_lines.size() || p.b_e_bound.size() != p.tie_lines.size())
    throw ConfigError("boundary bus lists inconsistent with tie-line list");
}

namespace {

AreaView build_area(const PowerCase& c, const std::vector<int>& own_bus_ids,
                    const std::vector<int>& opp_bound_ids, const std::vector<int>& own_bound_ids,
                    const std::string& name) {
  AreaView v;
  v.name = name;
  v.base_mva = c.base_mva;

  std::map<int, int> local;  // case bus id -> local index
  for (int id : own_bus_ids) {
    local[id] = static_cast<int>(v.case_bus_ids.size());
    v.case_bus_ids.push_back(id);
    v.buses.push_back(*c.find_bus(id));
  }
  for (int k = 0; k < static_cast<int>(opp_bound_ids.size()); ++k) {
    const int id = opp_bound_ids[k];
    local[id] = static_cast<int>(v.case_bus_ids.size());
    v.case_bus_ids.push_back(id);
    v.buses.push_back(*c.find_bus(id));
    // The opposite boundary bus is a pure voltage source here; its local load
    // is served by its own area.
    v.buses.back().p_load = 0.0;
    v.buses.back().q_load = 0.0;
    PseudoSource ps;
    ps.local_bus = local[id];
    ps.tie_index = k;
    ps.case_bus = id;
    v.pseudo.push_back(ps);
  }

  for (const auto& b : c.branches) {
    const bool from_in = local.count(b.from) > 0;
    const bool to_in = local.count(b.to) > 0;
    if (b.tie_line || (from_in && to_in)) {
      if (!from_in || !to_in)
        throw ConfigError("branch " + std::to_string(b.id) + ": dangling boundary bus");
      Branch bb = b;
      bb.from = local[b.from];
      bb.to = local[b.to];
      v.branches.push_back(bb);
    }
  }

  std::set<int> own(own_bus_ids.begin(), own_bus_ids.end());
  for (const auto& m : c.machines) {
    if (!own.count(m.bus)) continue;
    Machine mm = m;
    mm.bus = local[m.bus];
    v.machines.push_back(mm);
    const Exciter* e = c.find_exciter(m.id);
    v.exciters.push_back(e ? std::optional<Exciter>(*e) : std::nullopt);
  }
  for (const auto& z : c.zip_loads) {
    if (!own.count(z.bus)) continue;
    ZipLoad zz = z;
    zz.bus = local[z.bus];
    v.zip_loads.push_back(zz);
  }
  for (int id : own_bound_ids) v.boundary_buses.push_back(local.at(id));
  v.output_buses = v.boundary_buses;
  return v;
}

}  // namespace

std::pair<AreaView, AreaView> partition(const PowerCase& c) {
  const auto& p = c.partition;
  if (p.study_buses.empty() && p.external_buses.empty())
    throw ConfigError("case has no partition labels");
  AreaView study = build_area(c, p.study_buses, p.b_e_bound, p.b_s_bound, "study");
  AreaView external = build_area(c, p.external_buses, p.b_s_bound, p.b_e_bound, "external");
  return {std::move(study), std::move(external)};
}

AreaView whole_view(const PowerCase& c) {
  std::vector<int> all_ids;
  for (const auto& b : c.buses) all_ids.push_back(b.id);
  AreaView v = build_area(c, all_ids, {}, {}, "whole");
  for (int id : c.partition.b_s_bound) v.output_buses.push_back(v.local_bus(id));
  for (int id : c.partition.b_e_bound) v.output_buses.push_back(v.local_bus(id));
  v.boundary_buses = v.output_buses;
  return v;
}

bool case_equal(const PowerCase& a, const PowerCase& b) {
  auto eq = [](double x, double y) { return x == y; };
  if (!eq(a.base_mva, b.base_mva)) return false;
  if (a.buses.size() != b.buses.size() || a.branches.size() != b.branches.size() ||
      a.machines.size() != b.machines.size() || a.exciters.size() != b.exciters.size() ||
      a.zip_loads.size() != b.zip_loads.size())
    return false;
  for (size_t i = 0; i < a.buses.size(); ++i) {
    const auto &x = a.buses[i], &y = b.buses[i];
    if (x.id != y.id || x.type != y.type || x.v0 != y.v0 || !eq(x.p_load, y.p_load) ||
        !eq(x.q_load, y.q_load))
      return false;
  }
  for (size_t i = 0; i < a.branches.size(); ++i) {
    const auto &x = a.branches[i], &y = b.branches[i];
    if (x.id != y.id || x.from != y.from || x.to != y.to || x.z != y.z ||
        !eq(x.b_shunt, y.b_shunt) || x.tie_line != y.tie_line)
      return false;
  }
  for (size_t i = 0; i < a.machines.size(); ++i) {
    const auto &x = a.machines[i], &y = b.machines[i];
    if (x.id != y.id || x.bus != y.bus || x.model_order != y.model_order || !eq(x.s_n, y.s_n) ||
        !eq(x.h, y.h) || !eq(x.k_d, y.k_d) || !eq(x.x_d, y.x_d) || !eq(x.x_q, y.x_q) ||
        !eq(x.xp_d, y.xp_d) || !eq(x.xp_q, y.xp_q) || !eq(x.tp_d0, y.tp_d0) ||
        !eq(x.tp_q0, y.tp_q0) || !eq(x.t_m, y.t_m))
      return false;
  }
  for (size_t i = 0; i < a.exciters.size(); ++i) {
    const auto &x = a.exciters[i], &y = b.exciters[i];
    if (x.machine != y.machine || !eq(x.k_a, y.k_a) || !eq(x.t_a, y.t_a) || !eq(x.k_e, y.k_e) ||
        !eq(x.t_e, y.t_e) || !eq(x.k_f, y.k_f) || !eq(x.t_f, y.t_f) || !eq(x.exc1, y.exc1) ||
        !eq(x.exc2, y.exc2) || !eq(x.exc3, y.exc3))
      return false;
  }
  for (size_t i = 0; i < a.zip_loads.size(); ++i) {
    const auto &x = a.zip_loads[i], &y = b.zip_loads[i];
    if (x.bus != y.bus || !eq(x.p0, y.p0) || !eq(x.q0, y.q0) || !eq(x.p1, y.p1) ||
        !eq(x.p2, y.p2) || !eq(x.p3, y.p3) || !eq(x.q1, y.q1) || !eq(x.q2, y.q2) ||
        !eq(x.q3, y.q3) || x.v_nc0 != y.v_nc0)
      return false;
  }
  return a.partition.study_buses == b.partition.study_buses &&
         a.partition.external_buses == b.partition.external_buses &&
         a.partition.tie_lines == b.partition.tie_lines &&
         a.partition.b_s_bound == b.partition.b_s_bound &&
         a.partition.b_e_bound == b.partition.b_e_bound;
}

}  // namespace gridred
