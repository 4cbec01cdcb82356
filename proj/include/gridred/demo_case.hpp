#ifndef GRIDRED_DEMO_CASE_HPP
#define GRIDRED_DEMO_CASE_HPP

#include "gridred/case_model.hpp"
#include "gridred/integrator.hpp"
#include "gridred/network.hpp"

namespace gridred {

/// Synthetic two-area case at a solved operating point: a 3-machine study
/// area (7th-order models, one ZIP bus) and a 4-machine external area (one
/// 4th-order, three 2nd-order machines), joined by 2 or 3 tie-lines. Loads
/// and machine setpoints are back-computed from the chosen voltage profile,
/// so the shipped operating point is an exact equilibrium.
PowerCase make_twoarea_case(int ties = 2);

/// Canonical disturbance for the demo case: a three-phase fault near the
/// study-side boundary, two-stage clearing 0.05 s and 0.1 s after
/// application.
EventSchedule demo_events();
FaultSpec demo_fault();

}  // namespace gridred

#endif  // GRIDRED_DEMO_CASE_HPP
