#pragma once

#include <optional>
#include <vector>

#include "desos/feeder.hpp"
#include "desos/types.hpp"

namespace desos {

// The 4-vector of one branch: flows, squared current, sending-bus squared
// voltage.
struct BranchFlowPoint {
    double p = 0.0;
    double q = 0.0;
    double l = 0.0;
    double v = 1.0;
};

struct NetworkState {
    int horizon = 1;
    // [branch][t]
    std::vector<std::vector<double>> branch_p, branch_q, branch_l;
    // [bus][t]
    std::vector<std::vector<double>> v;
    std::vector<std::vector<double>> p_inj, q_inj;  // net bus injections
    // [t]
    std::vector<double> p_grid, q_grid;
    // [des][t]
    std::vector<std::vector<double>> p_des, q_des, p_loss;

    static NetworkState zeros(const Feeder& feeder);

    // Assembles the (P, Q, l, v) vector for branch e at period t.
    BranchFlowPoint point(const Feeder& feeder, int e, int t) const;
};

// Residuals of the four branch-flow equation families, one value per
// bus/branch and period. Exact power flow <=> everything is zero.
struct ResidualReport {
    std::vector<std::vector<double>> balance_p;  // [bus][t]
    std::vector<std::vector<double>> balance_q;  // [bus][t]
    std::vector<std::vector<double>> voltage;    // [branch][t]
    std::vector<std::vector<double>> quad;       // [branch][t], v*l - p^2 - q^2

    double max_abs() const;
    double max_abs_quad() const;
};

namespace distflow {

ResidualReport eval_residuals(const Feeder& feeder, const NetworkState& state);

struct SweepSettings {
    double tol = 1e-10;   // on v updates
    int max_iter = 200;
    double damping = 1.0;  // fraction of the v update applied
};

// Nonlinear power flow by backward/forward sweep with fixed bus injections
// (per [bus][t], excluding the substation slack and the transformer term,
// which are resolved internally). Throws Error(solver) on non-convergence or
// voltage collapse.
NetworkState sweep_solve(const Feeder& feeder, const std::vector<std::vector<double>>& inj_p,
                         const std::vector<std::vector<double>>& inj_q, double v_root,
                         const SweepSettings& settings = {});

// Maximum error of the quadratic branch equation over branches and periods
// (signed; nonnegative on cone-feasible relaxation solutions).
double me_branch(const Feeder& feeder, const NetworkState& state);

// Maximum error of the storage loss equation; empty when the feeder has no
// storage ("not applicable").
std::optional<double> me_des(const Feeder& feeder, const NetworkState& state);

double evaluate_objective(const Feeder& feeder, const NetworkState& state, ObjectiveKind objective);

struct Recovery {
    NetworkState state;
    double objective = 0.0;
    double gap = 0.0;                  // objective - reference value
    double max_bound_violation = 0.0;  // worst violation of (2) at the recovered point
    double max_residual = 0.0;         // worst power-flow residual
};

// Fixes the storage dispatch from a relaxed solution, re-solves the exact
// power flow per period and reports the objective gap against the
// relaxation's optimal value.
Recovery recover_feasible(const Feeder& feeder, const NetworkState& relaxed,
                          ObjectiveKind objective, double relaxation_oov);

}  // namespace distflow
}  // namespace desos
