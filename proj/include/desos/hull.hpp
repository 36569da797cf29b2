#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "desos/conic.hpp"
#include "desos/distflow.hpp"
#include "desos/feeder.hpp"

namespace desos::hull {

// Box (2) for a single branch, plus the nominal voltage that couples the
// thermal and current limits (s_max^2 = l_max * v_nom).
struct Bounds {
    double v_min = 0.81;
    double v_max = 1.21;
    double v_nom = 1.0;
    double s_max = 1.0;
    double l_max = 1.0;
};

// Convex hull of { (P,Q,l,v) : v*l = P^2 + Q^2 } inside the box: the rotated
// cone v*l >= P^2 + Q^2 together with one linear cut c'x <= d.
struct BranchHull {
    Bounds box;
    std::array<double, 4> cut_c{0.0, 0.0, 0.0, 0.0};  // (P, Q, l, v) coefficients
    double cut_d = 0.0;
};

BranchHull make_branch_hull(const Bounds& box);
BranchHull make_branch_hull(const Branch& branch, const Bus& sending);

// Convex relaxation of the storage loss surface
// { (p, q, p_loss, v) : p_loss*v = r_eq*p^2 + r_cvt*q^2 } inside the
// converter ball and the voltage box:
//   C1 cone:  r_eq*p^2 + r_cvt*q^2 <= p_loss * v
//   C2 cut:   r_batt*q^2 + v_min*p_loss <= r_eq*s_max^2
//   C3 cut:   v_min*v_max*p_loss + r_eq*s_max^2*v <= r_eq*s_max^2*(v_min+v_max)
struct DesHull {
    double r_batt = 0.0, r_cvt = 0.0, r_eq = 0.0;
    double s_max = 0.0;
    double v_min = 0.81, v_max = 1.21;
    double c2_rhs = 0.0;
    double c3_pl = 0.0, c3_v = 0.0, c3_rhs = 0.0;
};

DesHull make_des_hull(const DesUnit& unit, const Bus& bus);

struct Membership {
    bool inside = false;
    std::vector<std::string> violated;  // names of violated constraints
};

Membership membership(const BranchHull& hull, const BranchFlowPoint& point, double tol = 1e-9);

struct DesPoint {
    double p = 0.0, q = 0.0, p_loss = 0.0, v = 1.0;
};

Membership membership(const DesHull& hull, const DesPoint& point, double tol = 1e-9);

// Constructive Caratheodory witness for a point on the cut facet: four
// anchors on the quadratic surface whose convex combination reproduces the
// point. The (P,Q) anchors are the endpoints of the chord through (P,Q) with
// the point as midpoint.
struct Decomposition {
    std::array<double, 4> gamma{};
    std::array<std::array<double, 4>, 4> anchors{};  // rows are (P,Q,l,v) points
};

Decomposition decompose(const BranchHull& hull, const BranchFlowPoint& facet_point);

// Membership in the four 3-dimensional projections of the hull.
struct ProjectionReport {
    bool pq_l = false;  // (P,Q,l): cone P^2+Q^2 <= v_max*l and 0 <= l <= l_max
    bool pq_v = false;  // (P,Q,v): cone P^2+Q^2 <= l_max*v and v_min <= v <= v_max
    bool p_lv = false;  // (P,l,v): cone P^2 <= l*v and the hull cut
    bool q_lv = false;  // (Q,l,v): cone Q^2 <= l*v and the hull cut
};

ProjectionReport projection_predicates(const BranchHull& hull, const BranchFlowPoint& point,
                                       double tol = 1e-9);

// Points exactly on the quadratic surface inside the box, struct-of-arrays.
struct SampleSet {
    std::vector<double> p, q, l, v;
    std::size_t size() const { return p.size(); }
};

SampleSet sample_omega0(const Bounds& box, std::size_t n, std::uint64_t seed);

// Point net for support-function scans: still exactly on the quadratic
// surface, but stratified over the boundary pieces of the set (anchor
// circles, thermal and current shells, voltage faces, zero-flow ray) plus a
// uniform bulk. Linear objectives attain their minima on those strata, so
// the sampled support value tracks the true one far better than a uniform
// draw of the same size; every stratum sits a small inset off the exact
// extreme loci so the sampled minimum stays strictly above the true one.
SampleSet support_net(const Bounds& box, std::size_t n, std::uint64_t seed);

struct DesSampleSet {
    std::vector<double> p, q, p_loss, v;
    std::size_t size() const { return p.size(); }
};

DesSampleSet sample_des_surface(const DesHull& hull, std::size_t n, std::uint64_t seed);

// Support-function comparison in one direction: the hull minimum (by conic
// solve) minus the sampled minimum. Nonpositive for a valid hull; close to
// zero from below everywhere iff the hull is tight.
struct SupportGap {
    double hull_value = 0.0;
    double sample_value = 0.0;
    double gap = 0.0;  // hull_value - sample_value
};

SupportGap support_gap(const BranchHull& hull, const std::array<double, 4>& direction,
                       const SampleSet& samples);

// Same comparison for the storage relaxation set C1, C2, C3 inside the
// converter ball and voltage box. Whether that set equals the exact convex
// hull of the loss surface is open; this quantifies any residual gap.
SupportGap support_gap(const DesHull& hull, const std::array<double, 4>& direction,
                       const DesSampleSet& samples);

// Batch checks over sample sets (kernel-backed).
double max_membership_violation(const BranchHull& hull, const SampleSet& samples);
std::array<double, 3> max_des_cut_violation(const DesHull& hull, const DesSampleSet& samples);

}  // namespace desos::hull
