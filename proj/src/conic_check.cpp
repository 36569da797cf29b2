#include <algorithm>
#include <cmath>

#include "desos/conic.hpp"

// Independent KKT recheck. Works directly on the Problem container (not the
// canonical internal form) so it also catches canonicalization bugs.

namespace desos::conic {

namespace {

double row_value(const LinearRow& row, const std::vector<double>& x) {
    double v = 0.0;
    for (const LinearTerm& t : row.terms) v += t.coef * x[static_cast<size_t>(t.col)];
    return v;
}

}  // namespace

KktResiduals kkt_residuals(const Problem& problem, const Solution& solution) {
    const int n = problem.num_cols;
    if (static_cast<int>(solution.x.size()) != n ||
        solution.eq_dual.size() != problem.eq_rows.size() ||
        solution.ineq_dual.size() != problem.ineq_rows.size() ||
        static_cast<int>(solution.bound_dual_lower.size()) != n ||
        static_cast<int>(solution.bound_dual_upper.size()) != n ||
        solution.cone_dual.size() != problem.cones.size()) {
        fail(ErrorKind::dimension, "kkt_residuals: solution does not match problem dimensions");
    }
    const std::vector<double>& x = solution.x;

    KktResiduals res;

    // ---- Primal feasibility ----
    double primal = 0.0;
    for (size_t i = 0; i < problem.eq_rows.size(); ++i) {
        const double rhs = problem.eq_rows[i].rhs;
        primal = std::max(primal, std::abs(row_value(problem.eq_rows[i], x) - rhs) / (1.0 + std::abs(rhs)));
    }
    for (size_t i = 0; i < problem.ineq_rows.size(); ++i) {
        const double rhs = problem.ineq_rows[i].rhs;
        primal = std::max(primal, std::max(0.0, row_value(problem.ineq_rows[i], x) - rhs) / (1.0 + std::abs(rhs)));
    }
    for (int j = 0; j < n; ++j) {
        const size_t js = static_cast<size_t>(j);
        if (std::isfinite(problem.lower[js])) {
            primal = std::max(primal, (problem.lower[js] - x[js]) / (1.0 + std::abs(problem.lower[js])));
        }
        if (std::isfinite(problem.upper[js])) {
            primal = std::max(primal, (x[js] - problem.upper[js]) / (1.0 + std::abs(problem.upper[js])));
        }
    }
    for (const ConeBlock& cone : problem.cones) {
        double scale = 1.0;
        for (int c : cone.cols) scale += x[static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
        if (cone.kind == ConeKind::soc) {
            double tail = 0.0;
            for (size_t a = 1; a < cone.cols.size(); ++a) {
                tail += x[static_cast<size_t>(cone.cols[a])] * x[static_cast<size_t>(cone.cols[a])];
            }
            primal = std::max(primal, (std::sqrt(tail) - x[static_cast<size_t>(cone.cols[0])]) / std::sqrt(scale));
        } else {
            const double u = x[static_cast<size_t>(cone.cols[0])];
            const double v = x[static_cast<size_t>(cone.cols[1])];
            double w2 = 0.0;
            for (size_t a = 2; a < cone.cols.size(); ++a) {
                w2 += x[static_cast<size_t>(cone.cols[a])] * x[static_cast<size_t>(cone.cols[a])];
            }
            primal = std::max(primal, std::max({-u, -v, (w2 - u * v) / scale}));
        }
    }
    res.primal = std::max(primal, 0.0);

    // ---- Dual feasibility (stationarity + multiplier cones) ----
    std::vector<double> stat(problem.objective.begin(), problem.objective.end());
    for (size_t i = 0; i < problem.eq_rows.size(); ++i) {
        for (const LinearTerm& t : problem.eq_rows[i].terms) {
            stat[static_cast<size_t>(t.col)] += t.coef * solution.eq_dual[i];
        }
    }
    double dual = 0.0;
    for (size_t i = 0; i < problem.ineq_rows.size(); ++i) {
        const double lam = solution.ineq_dual[i];
        dual = std::max(dual, -lam / (1.0 + std::abs(lam)));
        for (const LinearTerm& t : problem.ineq_rows[i].terms) {
            stat[static_cast<size_t>(t.col)] += t.coef * lam;
        }
    }
    for (int j = 0; j < n; ++j) {
        const size_t js = static_cast<size_t>(j);
        const double lo = solution.bound_dual_lower[js];
        const double up = solution.bound_dual_upper[js];
        dual = std::max(dual, std::max(-lo, -up) / (1.0 + std::abs(lo) + std::abs(up)));
        // A multiplier pressing against an absent bound is a dual violation.
        if (up > 0.0 && !std::isfinite(problem.upper[js])) dual = std::max(dual, up);
        if (lo > 0.0 && !std::isfinite(problem.lower[js])) dual = std::max(dual, lo);
        stat[js] += up - lo;
    }
    for (size_t k = 0; k < problem.cones.size(); ++k) {
        const ConeBlock& cone = problem.cones[k];
        const std::vector<double>& zeta = solution.cone_dual[k];
        if (zeta.size() != cone.cols.size()) {
            fail(ErrorKind::dimension, "kkt_residuals: cone dual size mismatch");
        }
        double scale = 1.0;
        for (double v : zeta) scale += v * v;
        if (cone.kind == ConeKind::soc) {
            double tail = 0.0;
            for (size_t a = 1; a < zeta.size(); ++a) tail += zeta[a] * zeta[a];
            dual = std::max(dual, (std::sqrt(tail) - zeta[0]) / std::sqrt(scale));
        } else {
            // Dual of {u v >= |w|^2} is {4 u v >= |w|^2}.
            const double u = zeta[0], v = zeta[1];
            double w2 = 0.0;
            for (size_t a = 2; a < zeta.size(); ++a) w2 += zeta[a] * zeta[a];
            dual = std::max(dual, std::max({-u, -v, (w2 - 4.0 * u * v) / scale}));
        }
        for (size_t a = 0; a < cone.cols.size(); ++a) {
            stat[static_cast<size_t>(cone.cols[a])] -= zeta[a];
        }
    }
    double cnorm = 0.0;
    for (double c : problem.objective) cnorm = std::max(cnorm, std::abs(c));
    double stat_norm = 0.0;
    for (double v : stat) stat_norm = std::max(stat_norm, std::abs(v));
    res.dual = std::max(dual, stat_norm / (1.0 + cnorm));

    // ---- Complementarity gap ----
    double pobj = 0.0;
    for (int j = 0; j < n; ++j) pobj += problem.objective[static_cast<size_t>(j)] * x[static_cast<size_t>(j)];
    double dobj = 0.0;
    for (size_t i = 0; i < problem.eq_rows.size(); ++i) dobj -= problem.eq_rows[i].rhs * solution.eq_dual[i];
    for (size_t i = 0; i < problem.ineq_rows.size(); ++i) dobj -= problem.ineq_rows[i].rhs * solution.ineq_dual[i];
    for (int j = 0; j < n; ++j) {
        const size_t js = static_cast<size_t>(j);
        if (solution.bound_dual_upper[js] != 0.0 && std::isfinite(problem.upper[js])) {
            dobj -= problem.upper[js] * solution.bound_dual_upper[js];
        }
        if (solution.bound_dual_lower[js] != 0.0 && std::isfinite(problem.lower[js])) {
            dobj += problem.lower[js] * solution.bound_dual_lower[js];
        }
    }
    res.gap = std::abs(pobj - dobj) / (1.0 + std::max(std::abs(pobj), std::abs(dobj)));
    return res;
}

}  // namespace desos::conic
