#include "desos/hull.hpp"

#include <algorithm>
#include <cmath>

#include "desos/kernels.hpp"
#include "desos/rng.hpp"

namespace desos::hull {

namespace {

constexpr double kTightTol = 1e-12;

kernels::BranchHullCoef branch_coef(const BranchHull& hull) {
    kernels::BranchHullCoef c;
    c.v_min = hull.box.v_min;
    c.v_max = hull.box.v_max;
    c.s_max2 = hull.box.s_max * hull.box.s_max;
    c.l_max = hull.box.l_max;
    c.cut_rhs = hull.cut_d;
    return c;
}

kernels::DesCutCoef des_coef(const DesHull& hull) {
    kernels::DesCutCoef c;
    c.r_eq = hull.r_eq;
    c.r_cvt = hull.r_cvt;
    c.r_batt = hull.r_batt;
    c.v_min = hull.v_min;
    c.c2_rhs = hull.c2_rhs;
    c.c3_pl = hull.c3_pl;
    c.c3_v = hull.c3_v;
    c.c3_rhs = hull.c3_rhs;
    return c;
}

}  // namespace

BranchHull make_branch_hull(const Bounds& box) {
    if (!(box.v_min > 0.0 && box.v_min <= box.v_nom && box.v_nom <= box.v_max)) {
        fail(ErrorKind::validation, "branch hull: requires 0 < v_min <= v_nom <= v_max");
    }
    if (std::abs(box.s_max * box.s_max - box.l_max * box.v_nom) > 1e-9) {
        fail(ErrorKind::validation, "branch hull: s_max^2 != l_max * v_nom");
    }
    BranchHull hull;
    hull.box = box;
    hull.cut_c = {0.0, 0.0, box.v_max, box.l_max};
    hull.cut_d = box.l_max * (box.v_max + box.v_nom);

    // The cut must be tight at both anchor loci of the facet.
    const double at_nom = box.v_max * box.l_max + box.l_max * box.v_nom;
    const double at_cap = box.v_max * (box.s_max * box.s_max / box.v_max) + box.l_max * box.v_max;
    if (std::abs(at_nom - hull.cut_d) > kTightTol * std::max(1.0, hull.cut_d) ||
        std::abs(at_cap - hull.cut_d) > kTightTol * std::max(1.0, hull.cut_d)) {
        fail(ErrorKind::validation, "branch hull: cut is not tight at its anchors");
    }
    return hull;
}

BranchHull make_branch_hull(const Branch& branch, const Bus& sending) {
    Bounds box;
    box.v_min = sending.v_min;
    box.v_max = sending.v_max;
    box.v_nom = sending.v_nom;
    box.s_max = branch.s_max;
    box.l_max = branch.l_max > 0.0 ? branch.l_max : branch.s_max * branch.s_max / sending.v_nom;
    return make_branch_hull(box);
}

DesHull make_des_hull(const DesUnit& unit, const Bus& bus) {
    if (!(unit.r_batt > 0.0) || !(unit.r_cvt > 0.0)) {
        fail(ErrorKind::validation, "des hull: requires positive resistances");
    }
    if (!(bus.v_min > 0.0)) fail(ErrorKind::validation, "des hull: requires v_min > 0");
    DesHull hull;
    hull.r_batt = unit.r_batt;
    hull.r_cvt = unit.r_cvt;
    hull.r_eq = unit.r_batt + unit.r_cvt;
    hull.s_max = unit.s_max;
    hull.v_min = bus.v_min;
    hull.v_max = bus.v_max;
    const double e = hull.r_eq * unit.s_max * unit.s_max;
    hull.c2_rhs = e;
    hull.c3_pl = bus.v_min * bus.v_max;
    hull.c3_v = e;
    hull.c3_rhs = e * (bus.v_min + bus.v_max);

    // Chord cut tight at (r_eq s^2/v_min, v_min) and (r_eq s^2/v_max, v_max).
    const double lo = hull.c3_pl * (e / bus.v_min) + hull.c3_v * bus.v_min;
    const double hi = hull.c3_pl * (e / bus.v_max) + hull.c3_v * bus.v_max;
    if (std::abs(lo - hull.c3_rhs) > kTightTol * std::max(1.0, hull.c3_rhs) ||
        std::abs(hi - hull.c3_rhs) > kTightTol * std::max(1.0, hull.c3_rhs)) {
        fail(ErrorKind::validation, "des hull: chord cut is not tight at its anchors");
    }
    return hull;
}

Membership membership(const BranchHull& hull, const BranchFlowPoint& pt, double tol) {
    Membership result;
    const double pq2 = pt.p * pt.p + pt.q * pt.q;
    auto check = [&](bool ok, const char* name) {
        if (!ok) result.violated.push_back(name);
    };
    check(pt.l >= -tol, "l >= 0");
    check(pt.l <= hull.box.l_max + tol, "l <= l_max");
    check(pt.v >= hull.box.v_min - tol, "v >= v_min");
    check(pt.v <= hull.box.v_max + tol, "v <= v_max");
    check(pq2 <= hull.box.s_max * hull.box.s_max + tol, "P^2+Q^2 <= s_max^2");
    check(pq2 <= pt.l * pt.v + tol, "cone");
    const double cut = hull.cut_c[0] * pt.p + hull.cut_c[1] * pt.q + hull.cut_c[2] * pt.l +
                       hull.cut_c[3] * pt.v;
    check(cut <= hull.cut_d + tol, "cut");
    result.inside = result.violated.empty();
    return result;
}

Membership membership(const DesHull& hull, const DesPoint& pt, double tol) {
    Membership result;
    auto check = [&](bool ok, const char* name) {
        if (!ok) result.violated.push_back(name);
    };
    check(pt.v >= hull.v_min - tol, "v >= v_min");
    check(pt.v <= hull.v_max + tol, "v <= v_max");
    check(pt.p * pt.p + pt.q * pt.q <= hull.s_max * hull.s_max + tol, "converter ball");
    check(pt.p_loss >= -tol, "p_loss >= 0");
    check(hull.r_eq * pt.p * pt.p + hull.r_cvt * pt.q * pt.q <= pt.p_loss * pt.v + tol, "C1 cone");
    check(hull.r_batt * pt.q * pt.q + hull.v_min * pt.p_loss <= hull.c2_rhs + tol, "C2 cut");
    check(hull.c3_pl * pt.p_loss + hull.c3_v * pt.v <= hull.c3_rhs + tol, "C3 cut");
    result.inside = result.violated.empty();
    return result;
}

Decomposition decompose(const BranchHull& hull, const BranchFlowPoint& pt) {
    const Bounds& box = hull.box;
    const double s2 = box.s_max * box.s_max;
    const double cut = hull.cut_c[2] * pt.l + hull.cut_c[3] * pt.v;
    if (std::abs(cut - hull.cut_d) > 1e-9 * std::max(1.0, hull.cut_d)) {
        fail(ErrorKind::validation, "decompose: point is not on the cut facet");
    }
    const double pq2 = pt.p * pt.p + pt.q * pt.q;
    if (pq2 > s2 + 1e-9) {
        fail(ErrorKind::validation, "decompose: point violates the thermal ball");
    }
    if (pt.v < box.v_min - 1e-9 || pt.v > box.v_max + 1e-9 || pt.l < -1e-9 ||
        pt.l > box.l_max + 1e-9) {
        fail(ErrorKind::validation, "decompose: point violates the box bounds");
    }

    // (l, v) lies on the segment between (l_max, v_nom) and (s2/v_max, v_max);
    // interpolate along the coordinate with the larger anchor separation.
    const double l_at_cap = s2 / box.v_max;
    double gamma13;
    if (std::abs(box.v_max - box.v_nom) >= std::abs(box.l_max - l_at_cap)) {
        gamma13 = box.v_max == box.v_nom ? 1.0 : (box.v_max - pt.v) / (box.v_max - box.v_nom);
    } else {
        gamma13 = (pt.l - l_at_cap) / (box.l_max - l_at_cap);
    }
    gamma13 = std::clamp(gamma13, 0.0, 1.0);

    // Chord through (P,Q) with (P,Q) as midpoint; endpoints on the s_max circle.
    const double pq = std::sqrt(pq2);
    double nx = 1.0, ny = 0.0;  // chord direction; any diameter works at the origin
    if (pq > 0.0) {
        nx = -pt.q / pq;
        ny = pt.p / pq;
    }
    const double t = std::sqrt(std::max(0.0, s2 - pq2));
    const double p1 = pt.p + t * nx, q1 = pt.q + t * ny;
    const double p2 = pt.p - t * nx, q2 = pt.q - t * ny;

    Decomposition dec;
    dec.gamma = {0.5 * gamma13, 0.5 * (1.0 - gamma13), 0.5 * gamma13, 0.5 * (1.0 - gamma13)};
    dec.anchors = {{{p1, q1, box.l_max, box.v_nom},
                    {p1, q1, l_at_cap, box.v_max},
                    {p2, q2, box.l_max, box.v_nom},
                    {p2, q2, l_at_cap, box.v_max}}};
    return dec;
}

ProjectionReport projection_predicates(const BranchHull& hull, const BranchFlowPoint& pt,
                                       double tol) {
    const Bounds& box = hull.box;
    const double pq2 = pt.p * pt.p + pt.q * pt.q;
    const double cut = box.v_max * pt.l + box.l_max * pt.v;
    ProjectionReport rep;
    rep.pq_l = pq2 <= box.v_max * pt.l + tol && pt.l >= -tol && pt.l <= box.l_max + tol;
    rep.pq_v = pq2 <= box.l_max * pt.v + tol && pt.v >= box.v_min - tol && pt.v <= box.v_max + tol;
    rep.p_lv = pt.p * pt.p <= pt.l * pt.v + tol && cut <= hull.cut_d + tol;
    rep.q_lv = pt.q * pt.q <= pt.l * pt.v + tol && cut <= hull.cut_d + tol;
    return rep;
}

SampleSet sample_omega0(const Bounds& box, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    SampleSet set;
    set.p.reserve(n);
    set.q.reserve(n);
    set.l.reserve(n);
    set.v.reserve(n);
    const double two_pi = 6.283185307179586476925287;
    while (set.p.size() < n) {
        // Uniform on the s_max disk, uniform v, l from the quadratic equality;
        // the rejection region is exactly the cap excluded by l <= l_max.
        const double radius = box.s_max * std::sqrt(rng.uniform());
        const double angle = two_pi * rng.uniform();
        const double v = rng.uniform(box.v_min, box.v_max);
        const double p = radius * std::cos(angle);
        const double q = radius * std::sin(angle);
        const double l = (p * p + q * q) / v;
        if (l > box.l_max) continue;
        set.p.push_back(p);
        set.q.push_back(q);
        set.l.push_back(l);
        set.v.push_back(v);
    }
    return set;
}

SampleSet support_net(const Bounds& box, std::size_t n, std::uint64_t seed) {
    if (n < 1000) return sample_omega0(box, n, seed);
    Rng rng(seed);
    SampleSet set;
    set.p.reserve(n);
    set.q.reserve(n);
    set.l.reserve(n);
    set.v.reserve(n);

    const double two_pi = 6.283185307179586476925287;
    const double inset = 1e-4;
    const double v_span = box.v_max - box.v_min;
    const double v_lo = box.v_min + inset * v_span;
    const double v_hi = box.v_max - inset * v_span;
    const double r_ball = box.s_max * (1.0 - inset);
    const auto r_max_at = [&](double v) {
        return std::min(box.s_max, std::sqrt(box.l_max * v)) * (1.0 - inset);
    };

    auto push = [&](double r, double theta, double v) {
        if (set.p.size() >= n) return;
        v = std::clamp(v, box.v_min, box.v_max);
        const double r_cap = std::sqrt(box.l_max * v);
        r = std::min(r, std::min(box.s_max, r_cap) * (1.0 - 1e-5));
        const double p = r * std::cos(theta);
        const double q = r * std::sin(theta);
        set.p.push_back(p);
        set.q.push_back(q);
        set.l.push_back((p * p + q * q) / v);
        set.v.push_back(v);
    };

    const auto quota = [&](double f) { return static_cast<size_t>(f * static_cast<double>(n)); };

    // Anchor circles: full flow at nominal voltage and at the voltage cap
    // (objectives minimized there grow quadratically along the circle).
    for (const double v : {box.v_nom, v_hi}) {
        const size_t m = quota(0.08);
        const double jitter = rng.uniform();
        for (size_t j = 0; j < m; ++j) {
            push(r_ball, two_pi * (static_cast<double>(j) + jitter) / static_cast<double>(m), v);
        }
    }
    // Edge circle of the current limit at the voltage floor.
    {
        const size_t m = quota(0.03);
        const double jitter = rng.uniform();
        for (size_t j = 0; j < m; ++j) {
            push(r_max_at(v_lo), two_pi * (static_cast<double>(j) + jitter) / static_cast<double>(m),
                 v_lo);
        }
    }
    // Zero-flow axis.
    {
        const size_t m = quota(0.02);
        for (size_t j = 0; j < m; ++j) {
            const double v = v_lo + (v_hi - v_lo) * (static_cast<double>(j) + rng.uniform()) /
                                        static_cast<double>(m);
            push(box.s_max * 1e-7 * rng.uniform(), two_pi * rng.uniform(), v);
        }
    }
    // Thermal shell (r = s_max above nominal voltage) and current shell
    // (l = l_max below it), theta x v grids.
    {
        const size_t rows = 48;
        const size_t cols = std::max<size_t>(1, quota(0.16) / (2 * rows));
        for (size_t iv = 0; iv < rows; ++iv) {
            const double f = (static_cast<double>(iv) + rng.uniform()) / static_cast<double>(rows);
            const double v_top = box.v_nom + f * (v_hi - box.v_nom);
            const double v_bot = v_lo + f * (box.v_nom - v_lo);
            const double jitter = rng.uniform();
            for (size_t j = 0; j < cols; ++j) {
                const double theta = two_pi * (static_cast<double>(j) + jitter) / static_cast<double>(cols);
                push(r_ball, theta, v_top);
                push(r_max_at(v_bot), theta, v_bot);
            }
        }
    }
    // Voltage faces: uniform-radius rings so the axis region is dense.
    for (const double v : {v_lo, v_hi}) {
        const size_t rings = 64;
        const size_t cols = std::max<size_t>(1, quota(0.06) / rings);
        const double r_max = r_max_at(v);
        for (size_t ir = 0; ir < rings; ++ir) {
            const double u = (static_cast<double>(ir) + rng.uniform()) / static_cast<double>(rings);
            const double jitter = rng.uniform();
            for (size_t j = 0; j < cols; ++j) {
                push(r_max * u, two_pi * (static_cast<double>(j) + jitter) / static_cast<double>(cols),
                     v);
            }
        }
    }
    // Jittered 3-D grid over (P, Q, v): covers every smooth interior
    // minimizer with quadratic error in the spacing.
    {
        const double budget = static_cast<double>(quota(0.28));
        const double h =
            std::cbrt(3.141592653589793 * box.s_max * box.s_max * v_span / budget);
        const int np = static_cast<int>(2.0 * box.s_max / h);
        const int nv = std::max(1, static_cast<int>(v_span / h));
        for (int iv = 0; iv < nv; ++iv) {
            const double v = v_lo + (v_hi - v_lo) * (iv + rng.uniform()) / nv;
            const double r_max = r_max_at(v);
            for (int ip = 0; ip < np; ++ip) {
                const double p = -box.s_max + 2.0 * box.s_max * (ip + rng.uniform()) / np;
                for (int iq = 0; iq < np; ++iq) {
                    const double q = -box.s_max + 2.0 * box.s_max * (iq + rng.uniform()) / np;
                    const double r = std::hypot(p, q);
                    if (r > r_max) continue;
                    push(r, std::atan2(q, p), v);
                }
            }
        }
    }
    // Uniform bulk for the remaining budget.
    while (set.p.size() < n) {
        const double radius = box.s_max * std::sqrt(rng.uniform());
        const double v = rng.uniform(box.v_min, box.v_max);
        if (radius * radius / v > box.l_max) continue;
        push(radius, two_pi * rng.uniform(), v);
    }
    return set;
}

DesSampleSet sample_des_surface(const DesHull& hull, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    DesSampleSet set;
    set.p.reserve(n);
    set.q.reserve(n);
    set.p_loss.reserve(n);
    set.v.reserve(n);
    const double two_pi = 6.283185307179586476925287;
    while (set.p.size() < n) {
        const double radius = hull.s_max * std::sqrt(rng.uniform());
        const double angle = two_pi * rng.uniform();
        const double v = rng.uniform(hull.v_min, hull.v_max);
        const double p = radius * std::cos(angle);
        const double q = radius * std::sin(angle);
        const double loss = (hull.r_eq * p * p + hull.r_cvt * q * q) / v;
        set.p.push_back(p);
        set.q.push_back(q);
        set.p_loss.push_back(loss);
        set.v.push_back(v);
    }
    return set;
}

SupportGap support_gap(const BranchHull& hull, const std::array<double, 4>& direction,
                       const SampleSet& samples) {
    if (samples.size() == 0) fail(ErrorKind::validation, "support_gap: empty sample set");

    // min d'x over the hull by conic solve.
    conic::Problem prob;
    const int P = prob.add_col("P", -conic::kInf, conic::kInf, direction[0]);
    const int Q = prob.add_col("Q", -conic::kInf, conic::kInf, direction[1]);
    const int l = prob.add_col("l", 0.0, hull.box.l_max, direction[2]);
    const int v = prob.add_col("v", hull.box.v_min, hull.box.v_max, direction[3]);
    const int pc = prob.add_col("Pc");
    const int qc = prob.add_col("Qc");
    const int shead = prob.add_col("s", hull.box.s_max, hull.box.s_max);
    prob.eq_rows.push_back({{{pc, 1.0}, {P, -1.0}}, 0.0});
    prob.eq_rows.push_back({{{qc, 1.0}, {Q, -1.0}}, 0.0});
    prob.cones.push_back({conic::ConeKind::rsoc, {l, v, P, Q}});
    prob.cones.push_back({conic::ConeKind::soc, {shead, pc, qc}});
    prob.ineq_rows.push_back(
        {{{l, hull.cut_c[2]}, {v, hull.cut_c[3]}}, hull.cut_d});

    const conic::Solution sol = conic::solve(prob);
    if (sol.status != conic::SolveStatus::optimal) {
        fail(ErrorKind::solver,
             std::string("support_gap: hull solve returned ") + conic::to_string(sol.status));
    }

    SupportGap out;
    out.hull_value = sol.objective;
    out.sample_value = kernels::active_backend().min_dot4(
        direction[0], direction[1], direction[2], direction[3], samples.p.data(), samples.q.data(),
        samples.l.data(), samples.v.data(), samples.size());
    out.gap = out.hull_value - out.sample_value;
    return out;
}

SupportGap support_gap(const DesHull& hull, const std::array<double, 4>& direction,
                       const DesSampleSet& samples) {
    if (samples.size() == 0) fail(ErrorKind::validation, "support_gap: empty sample set");

    conic::Problem prob;
    const int p = prob.add_col("p", -conic::kInf, conic::kInf, direction[0]);
    const int q = prob.add_col("q", -conic::kInf, conic::kInf, direction[1]);
    const int loss = prob.add_col("p_loss", 0.0, conic::kInf, direction[2]);
    const int v = prob.add_col("v", hull.v_min, hull.v_max, direction[3]);
    const int vcp = prob.add_col("vcp");
    const int w1 = prob.add_col("w1");
    const int w2 = prob.add_col("w2");
    const int sh = prob.add_col("sh", hull.s_max, hull.s_max);
    const int head = prob.add_col("c2h", 0.0);
    const int one = prob.add_col("one", 1.0, 1.0);
    const int qc2 = prob.add_col("qc2");
    prob.eq_rows.push_back({{{vcp, 1.0}, {v, -1.0}}, 0.0});
    prob.eq_rows.push_back({{{w1, 1.0}, {p, -std::sqrt(hull.r_eq)}}, 0.0});
    prob.eq_rows.push_back({{{w2, 1.0}, {q, -std::sqrt(hull.r_cvt)}}, 0.0});
    prob.eq_rows.push_back({{{head, hull.r_batt}, {loss, hull.v_min}}, hull.c2_rhs});
    prob.eq_rows.push_back({{{qc2, 1.0}, {q, -1.0}}, 0.0});
    prob.cones.push_back({conic::ConeKind::rsoc, {loss, vcp, w1, w2}});
    prob.cones.push_back({conic::ConeKind::soc, {sh, p, q}});
    prob.cones.push_back({conic::ConeKind::rsoc, {head, one, qc2}});
    prob.ineq_rows.push_back({{{loss, hull.c3_pl}, {v, hull.c3_v}}, hull.c3_rhs});

    const conic::Solution sol = conic::solve(prob);
    if (sol.status != conic::SolveStatus::optimal) {
        fail(ErrorKind::solver,
             std::string("support_gap: storage hull solve returned ") + conic::to_string(sol.status));
    }

    SupportGap out;
    out.hull_value = sol.objective;
    out.sample_value = kernels::active_backend().min_dot4(
        direction[0], direction[1], direction[2], direction[3], samples.p.data(), samples.q.data(),
        samples.p_loss.data(), samples.v.data(), samples.size());
    out.gap = out.hull_value - out.sample_value;
    return out;
}

double max_membership_violation(const BranchHull& hull, const SampleSet& samples) {
    const auto worst = kernels::active_backend().branch_violation(
        samples.p.data(), samples.q.data(), samples.l.data(), samples.v.data(), samples.size(),
        branch_coef(hull));
    return std::max({worst.cone, worst.cut, worst.box});
}

std::array<double, 3> max_des_cut_violation(const DesHull& hull, const DesSampleSet& samples) {
    const auto worst = kernels::active_backend().des_violation(
        samples.p.data(), samples.q.data(), samples.p_loss.data(), samples.v.data(), samples.size(),
        des_coef(hull));
    return {worst.c1, worst.c2, worst.c3};
}

}  // namespace desos::hull
