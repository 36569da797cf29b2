#pragma once

// Brute-force oracles used by the unit and acceptance suites. Everything in
// here is independent of the library's solve paths: vertex enumeration for
// tiny LPs and grid scans for the exact two-bus scheduling problem.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "desos/conic.hpp"
#include "desos/feeder.hpp"

namespace oracles {

// Minimum of a pure LP (no cones) with at most 3 columns by enumerating
// basic points: every combination of active constraints that pins down all
// degrees of freedom.
inline std::optional<double> lp_vertex_min(const desos::conic::Problem& prob) {
    const int n = prob.num_cols;
    if (n > 3 || !prob.cones.empty()) return std::nullopt;

    struct HalfSpace {
        Eigen::RowVector3d a = Eigen::RowVector3d::Zero();
        double rhs = 0.0;
        bool equality = false;
    };
    std::vector<HalfSpace> rows;
    auto add_row = [&](const desos::conic::LinearRow& row, bool eq) {
        HalfSpace h;
        for (const auto& t : row.terms) h.a(t.col) = t.coef;
        h.rhs = row.rhs;
        h.equality = eq;
        rows.push_back(h);
    };
    for (const auto& row : prob.eq_rows) add_row(row, true);
    for (const auto& row : prob.ineq_rows) add_row(row, false);
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(prob.upper[static_cast<size_t>(j)])) {
            HalfSpace h;
            h.a(j) = 1.0;
            h.rhs = prob.upper[static_cast<size_t>(j)];
            rows.push_back(h);
        }
        if (std::isfinite(prob.lower[static_cast<size_t>(j)])) {
            HalfSpace h;
            h.a(j) = -1.0;
            h.rhs = -prob.lower[static_cast<size_t>(j)];
            rows.push_back(h);
        }
    }

    const int m = static_cast<int>(rows.size());
    auto feasible = [&](const Eigen::Vector3d& x) {
        for (const HalfSpace& h : rows) {
            const double v = h.a.head(n) * x.head(n);
            if (h.equality ? std::abs(v - h.rhs) > 1e-7 : v - h.rhs > 1e-7) return false;
        }
        return true;
    };

    double best = std::numeric_limits<double>::infinity();
    std::vector<int> pick(static_cast<size_t>(n));
    // All ordered index combinations of size n.
    std::vector<int> idx(static_cast<size_t>(n), 0);
    const auto combos = [&](auto&& self, int depth, int start) -> void {
        if (depth == n) {
            Eigen::Matrix3d A = Eigen::Matrix3d::Identity();
            Eigen::Vector3d b = Eigen::Vector3d::Zero();
            for (int k = 0; k < n; ++k) {
                A.row(k).setZero();
                A.row(k).head(n) = rows[static_cast<size_t>(pick[static_cast<size_t>(k)])].a.head(n);
                b(k) = rows[static_cast<size_t>(pick[static_cast<size_t>(k)])].rhs;
            }
            const Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
            if (lu.rank() < 3) return;
            const Eigen::Vector3d x = lu.solve(b);
            if (!x.allFinite() || !feasible(x)) return;
            double obj = 0.0;
            for (int j = 0; j < n; ++j) obj += prob.objective[static_cast<size_t>(j)] * x(j);
            best = std::min(best, obj);
            return;
        }
        for (int i = start; i < m; ++i) {
            pick[static_cast<size_t>(depth)] = i;
            self(self, depth + 1, i + 1);
        }
    };
    combos(combos, 0, 0);
    if (!std::isfinite(best)) return std::nullopt;
    return best;
}

// Exact two-bus loss-minimization snapshot by a two-variable grid scan over
// (v1, l). The remaining quantities follow from the balance equations; grid
// points keep only near-exact solutions of the quadratic equality, and the
// scan refines around the best cell.
struct TwoBusScan {
    double objective = std::numeric_limits<double>::infinity();
    double v1 = 0.0, l = 0.0;
};

inline TwoBusScan two_bus_grid_scan(const desos::Feeder& feeder) {
    const desos::Branch& br = feeder.branches.at(0);
    const desos::Bus& sub = feeder.buses.at(static_cast<size_t>(feeder.substation));
    const desos::Bus& other = feeder.buses.at(feeder.substation == 0 ? 1 : 0);
    // The scan covers plain feeders only (no transformer draw terms).
    if (sub.k_tx != 0.0 || other.k_tx != 0.0) {
        desos::fail(desos::ErrorKind::validation, "two_bus_grid_scan: k_tx must be zero");
    }
    const double p_load = feeder.profiles.load_p.at(1).at(0) - feeder.profiles.pv.at(1).at(0);
    const double q_load = feeder.profiles.load_q.at(1).at(0);

    TwoBusScan best;
    double v_lo = sub.v_min, v_hi = sub.v_max;
    double l_lo = 0.0, l_hi = br.l_max;
    for (int pass = 0; pass < 6; ++pass) {
        const int nv = 500, nl = 500;
        const double dv = (v_hi - v_lo) / nv;
        const double dl = (l_hi - l_lo) / nl;
        // A grid cell can miss the equality manifold by the local Lipschitz
        // slack of one step in each variable.
        const double slack = 2.0 * (dv * (l_hi + 1.0) + dl * (v_hi + 1.0));
        TwoBusScan round_best;
        for (int iv = 0; iv <= nv; ++iv) {
            const double v1 = v_lo + dv * iv;
            for (int il = 0; il <= nl; ++il) {
                const double l = l_lo + dl * il;
                const double P = p_load + br.r * l;  // receive + loss
                const double Q = q_load + br.x * l;
                const double v2 =
                    v1 - 2.0 * (br.r * P + br.x * Q) + (br.r * br.r + br.x * br.x) * l;
                if (std::abs(v1 * l - P * P - Q * Q) > slack) continue;
                if (P * P + Q * Q > br.s_max * br.s_max + 1e-9) continue;
                if (v2 < other.v_min - 1e-9 || v2 > other.v_max + 1e-9) continue;
                const double obj = br.r * l;
                if (obj < round_best.objective) round_best = {obj, v1, l};
            }
        }
        if (!std::isfinite(round_best.objective)) break;
        best = round_best;
        // The next window must contain the accepted slack band around the
        // equality manifold, not just a few cells.
        const double band_l = slack / std::max(0.25, sub.v_min - 2.0 * (br.r + br.x));
        const double band_v = slack / std::max(best.l, 0.02);
        const double v_span = std::max(4.0 * dv, band_v);
        const double l_span = std::max(4.0 * dl, band_l);
        v_lo = std::max(sub.v_min, best.v1 - v_span);
        v_hi = std::min(sub.v_max, best.v1 + v_span);
        l_lo = std::max(0.0, best.l - l_span);
        l_hi = std::min(br.l_max, best.l + l_span);
    }
    return best;
}

}  // namespace oracles
