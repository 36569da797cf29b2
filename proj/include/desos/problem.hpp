#pragma once

#include <string>
#include <vector>

#include "desos/conic.hpp"
#include "desos/distflow.hpp"
#include "desos/feeder.hpp"
#include "desos/types.hpp"

namespace desos::opt {

// Column assignment for the named decision quantities, bijective between
// (entity, period) pairs and column indices. Auxiliary columns introduced by
// the conic formulation (cone-local copies, fixed cone heads) are counted in
// num_cols but carry no named index.
struct VariableMap {
    int horizon = 1;
    int num_named = 0;
    int num_cols = 0;
    std::vector<std::vector<int>> branch_p, branch_q, branch_l;  // [branch][t]
    std::vector<std::vector<int>> bus_v;                         // [bus][t]
    std::vector<std::vector<int>> bus_u;                         // [bus][t], F3 only
    std::vector<std::vector<int>> des_p, des_q, des_loss;        // [des][t]
    std::vector<int> grid_p, grid_q;                             // [t]
};

struct BuiltProblem {
    conic::Problem problem;
    VariableMap vars;
    ObjectiveKind objective = ObjectiveKind::f2;
    RelaxKind relax = RelaxKind::ch;
    bool snapshot = false;
};

// Assembles the scheduling problem over the requested relaxation. snapshot
// collapses the horizon to the first period and drops the stored-energy
// window.
BuiltProblem build_problem(const Feeder& feeder, ObjectiveKind objective, RelaxKind relax,
                           bool snapshot = false);

// Linear objective for the given kind over an existing variable map.
std::vector<double> objective_vector(const Feeder& feeder, ObjectiveKind objective,
                                     const VariableMap& vars);

// Maps solver columns back to named network quantities. Throws Error(solver)
// when the solution status carries no usable point.
NetworkState extract_state(const conic::Solution& solution, const VariableMap& vars,
                           const Feeder& feeder);

// Text serialization of the standard-form cone program, and its reader.
// Bit-exact round trip (floats are written with full precision).
std::string dump_problem(const conic::Problem& problem);
conic::Problem parse_problem(const std::string& text);

}  // namespace desos::opt
