#include <algorithm>
#include <cmath>

#include "desos/conic.hpp"

namespace desos::conic {

namespace {

constexpr double kSqrtHalf = 0.70710678118654752440;

}

void validate_problem(const Problem& problem) {
    const int n = problem.num_cols;
    if (static_cast<int>(problem.objective.size()) != n ||
        static_cast<int>(problem.lower.size()) != n ||
        static_cast<int>(problem.upper.size()) != n) {
        fail(ErrorKind::dimension, "conic problem: objective/bounds sizes do not match num_cols");
    }
    auto check_rows = [&](const std::vector<LinearRow>& rows, const char* what) {
        for (const LinearRow& row : rows) {
            for (const LinearTerm& t : row.terms) {
                if (t.col < 0 || t.col >= n) {
                    fail(ErrorKind::dimension, std::string("conic problem: ") + what +
                                                   " row references column " + std::to_string(t.col));
                }
            }
        }
    };
    check_rows(problem.eq_rows, "equality");
    check_rows(problem.ineq_rows, "inequality");

    std::vector<char> in_cone(static_cast<size_t>(n), 0);
    for (const ConeBlock& cone : problem.cones) {
        const size_t min_size = cone.kind == ConeKind::soc ? 2 : 3;
        if (cone.cols.size() < min_size) {
            fail(ErrorKind::validation, "conic problem: cone block too small");
        }
        for (int c : cone.cols) {
            if (c < 0 || c >= n) {
                fail(ErrorKind::dimension, "conic problem: cone references column " + std::to_string(c));
            }
            if (in_cone[static_cast<size_t>(c)]) {
                fail(ErrorKind::validation, "conic problem: column " + std::to_string(c) +
                                                " appears in more than one cone block");
            }
            in_cone[static_cast<size_t>(c)] = 1;
        }
    }
    // lb > ub is left to the solver, which certifies primal infeasibility.
}

CanonicalForm canonicalize(const Problem& problem) {
    validate_problem(problem);
    const int n = problem.num_cols;

    CanonicalForm canon;
    canon.c = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) canon.c(j) = problem.objective[static_cast<size_t>(j)];

    using Triplet = Eigen::Triplet<double>;
    std::vector<Triplet> a_trip, g_trip;
    std::vector<double> b_vals, h_vals;

    canon.eq_row.reserve(problem.eq_rows.size());
    for (const LinearRow& row : problem.eq_rows) {
        const int r = static_cast<int>(b_vals.size());
        canon.eq_row.push_back(r);
        for (const LinearTerm& t : row.terms) a_trip.emplace_back(r, t.col, t.coef);
        b_vals.push_back(row.rhs);
    }
    // Fixed columns (lb == ub) become equality rows.
    canon.fixed_eq_row.assign(static_cast<size_t>(n), -1);
    for (int j = 0; j < n; ++j) {
        const double lo = problem.lower[static_cast<size_t>(j)];
        const double hi = problem.upper[static_cast<size_t>(j)];
        if (lo == hi) {
            const int r = static_cast<int>(b_vals.size());
            canon.fixed_eq_row[static_cast<size_t>(j)] = r;
            a_trip.emplace_back(r, j, 1.0);
            b_vals.push_back(lo);
        }
    }

    // LP cone: inequality rows, then upper bounds, then lower bounds.
    canon.ineq_row.reserve(problem.ineq_rows.size());
    for (const LinearRow& row : problem.ineq_rows) {
        const int r = static_cast<int>(h_vals.size());
        canon.ineq_row.push_back(r);
        for (const LinearTerm& t : row.terms) g_trip.emplace_back(r, t.col, t.coef);
        h_vals.push_back(row.rhs);
    }
    canon.upper_row.assign(static_cast<size_t>(n), -1);
    canon.lower_row.assign(static_cast<size_t>(n), -1);
    for (int j = 0; j < n; ++j) {
        const double lo = problem.lower[static_cast<size_t>(j)];
        const double hi = problem.upper[static_cast<size_t>(j)];
        if (lo == hi) continue;
        if (std::isfinite(hi)) {
            const int r = static_cast<int>(h_vals.size());
            canon.upper_row[static_cast<size_t>(j)] = r;
            g_trip.emplace_back(r, j, 1.0);
            h_vals.push_back(hi);
        }
        if (std::isfinite(lo)) {
            const int r = static_cast<int>(h_vals.size());
            canon.lower_row[static_cast<size_t>(j)] = r;
            g_trip.emplace_back(r, j, -1.0);
            h_vals.push_back(-lo);
        }
    }
    canon.n_lp = static_cast<int>(h_vals.size());

    // Cone blocks. A plain cone maps through unchanged: s = (head, members).
    // A rotated cone (u, v, w...) maps through the orthogonal pair
    // ((u+v)/sqrt2, (u-v)/sqrt2) with the members scaled by sqrt2, which
    // turns u*v >= |w|^2 into a plain second-order cone.
    for (const ConeBlock& cone : problem.cones) {
        const int r0 = static_cast<int>(h_vals.size());
        canon.cone_row_start.push_back(r0);
        if (cone.kind == ConeKind::soc) {
            for (size_t k = 0; k < cone.cols.size(); ++k) {
                g_trip.emplace_back(r0 + static_cast<int>(k), cone.cols[k], -1.0);
                h_vals.push_back(0.0);
            }
            canon.soc_dims.push_back(static_cast<int>(cone.cols.size()));
        } else {
            const int u = cone.cols[0];
            const int v = cone.cols[1];
            const int dim = static_cast<int>(cone.cols.size());
            // s0 = (u+v)/sqrt2
            g_trip.emplace_back(r0, u, -kSqrtHalf);
            g_trip.emplace_back(r0, v, -kSqrtHalf);
            h_vals.push_back(0.0);
            // s_k = sqrt2 * w_k
            for (int k = 2; k < dim; ++k) {
                g_trip.emplace_back(r0 + k - 1, cone.cols[static_cast<size_t>(k)], -std::sqrt(2.0));
                h_vals.push_back(0.0);
            }
            // s_last = (u-v)/sqrt2
            g_trip.emplace_back(r0 + dim - 1, u, -kSqrtHalf);
            g_trip.emplace_back(r0 + dim - 1, v, kSqrtHalf);
            h_vals.push_back(0.0);
            canon.soc_dims.push_back(dim);
        }
    }

    const int p = static_cast<int>(b_vals.size());
    const int m = static_cast<int>(h_vals.size());
    canon.A.resize(p, n);
    canon.A.setFromTriplets(a_trip.begin(), a_trip.end());
    canon.G.resize(m, n);
    canon.G.setFromTriplets(g_trip.begin(), g_trip.end());
    canon.b = Eigen::Map<const Eigen::VectorXd>(b_vals.data(), p);
    canon.h = Eigen::Map<const Eigen::VectorXd>(h_vals.data(), m);
    return canon;
}

}  // namespace desos::conic
