#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "desos/errors.hpp"

namespace desos::conic {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class ConeKind { soc, rsoc };

// A cone over problem columns. soc: cols[0] >= ||cols[1..]||.
// rsoc: cols[0]*cols[1] >= sum of squares of cols[2..], cols[0], cols[1] >= 0.
struct ConeBlock {
    ConeKind kind = ConeKind::soc;
    std::vector<int> cols;
};

struct LinearTerm {
    int col = 0;
    double coef = 0.0;
};

struct LinearRow {
    std::vector<LinearTerm> terms;
    double rhs = 0.0;
};

// Standard-form cone program: minimize objective over equality rows,
// inequality rows (lhs <= rhs), cone blocks on columns and variable bounds.
// Every column may appear in at most one cone block.
struct Problem {
    int num_cols = 0;
    std::vector<double> objective;
    std::vector<LinearRow> eq_rows;
    std::vector<LinearRow> ineq_rows;
    std::vector<ConeBlock> cones;
    std::vector<double> lower, upper;  // +-inf when absent
    std::vector<std::string> col_names;  // optional, for dumps

    int add_col(const std::string& name = "", double lo = -kInf, double hi = kInf,
                double obj = 0.0) {
        objective.push_back(obj);
        lower.push_back(lo);
        upper.push_back(hi);
        col_names.push_back(name);
        return num_cols++;
    }
};

// Checks the Problem invariants; throws Error(validation) on violation.
void validate_problem(const Problem& problem);

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit, numerical_error };

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::iteration_limit: return "iteration-limit";
        case SolveStatus::numerical_error: return "numerical-error";
    }
    return "?";
}

struct Solution {
    SolveStatus status = SolveStatus::numerical_error;
    std::vector<double> x;
    double objective = std::numeric_limits<double>::quiet_NaN();

    // Duals mapped back to the original problem:
    //   c + A_eq' y + A_in' lam - sum_j E_j' zeta_j + (mu_up - mu_lo) = 0
    // with lam, mu_up, mu_lo >= 0 and zeta_j in the dual cone of block j.
    std::vector<double> eq_dual;
    std::vector<double> ineq_dual;
    std::vector<double> bound_dual_lower, bound_dual_upper;
    std::vector<std::vector<double>> cone_dual;

    int iterations = 0;
    double solve_seconds = 0.0;
    // Residuals recomputed by the solver on the unscaled data.
    double primal_res = 0.0, dual_res = 0.0, gap_res = 0.0;
};

struct Settings {
    double tol = 1e-8;         // relative primal/dual/gap target
    int max_iter = 200;
    int refine_iters = 3;      // iterative refinement per KKT solve
    double static_reg = 7e-8;  // static KKT regularization
    int equil_iters = 3;       // Ruiz equilibration sweeps
    bool verbose = false;
};

// Internal standard form: min c'x  s.t.  A x = b,  G x + s = h,
// s in (nonnegative orthant) x (second-order cones of dims soc_dims).
// Bounds and inequalities are folded into the LP part of G; rotated cones
// are rewritten as plain second-order cones by an orthogonal map.
struct CanonicalForm {
    Eigen::SparseMatrix<double> A, G;
    Eigen::VectorXd b, h, c;
    int n_lp = 0;
    std::vector<int> soc_dims;

    // Row maps for pulling duals back to the original problem.
    std::vector<int> eq_row;                  // original eq row -> A row
    std::vector<int> ineq_row;                // original ineq row -> G row
    std::vector<int> upper_row, lower_row;    // per column, -1 when absent
    std::vector<int> fixed_eq_row;            // per column, -1 unless lb == ub
    std::vector<int> cone_row_start;          // per cone block -> first G row
};

CanonicalForm canonicalize(const Problem& problem);

Solution solve(const Problem& problem, const Settings& settings = {});

// Independent KKT recheck on the original problem form (does not reuse any
// solver internals). All three values are relative norms.
struct KktResiduals {
    double primal = 0.0;
    double dual = 0.0;
    double gap = 0.0;
};

KktResiduals kkt_residuals(const Problem& problem, const Solution& solution);

}  // namespace desos::conic
