#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "desos/hull.hpp"
#include "desos/kernels.hpp"
#include "desos/rng.hpp"

using namespace desos;
using namespace desos::hull;

namespace {

Bounds default_box() { return Bounds{}; }  // 0.81/1.21/1.0/1.0/1.0

BranchFlowPoint facet_point(const BranchHull& hull, double gamma13, double P, double Q) {
    const Bounds& b = hull.box;
    const double l_cap = b.s_max * b.s_max / b.v_max;
    BranchFlowPoint pt;
    pt.p = P;
    pt.q = Q;
    pt.l = gamma13 * b.l_max + (1.0 - gamma13) * l_cap;
    pt.v = gamma13 * b.v_nom + (1.0 - gamma13) * b.v_max;
    return pt;
}

}  // namespace

TEST_CASE("branch hull coefficients on the default box") {
    const BranchHull hull = make_branch_hull(default_box());
    CHECK(hull.box.l_max == doctest::Approx(1.0));
    CHECK(hull.cut_c[2] == doctest::Approx(1.21));
    CHECK(hull.cut_c[3] == doctest::Approx(1.0));
    CHECK(hull.cut_d == doctest::Approx(2.21));

    // Tight at both anchor loci.
    const double at1 = hull.cut_c[2] * 1.0 + hull.cut_c[3] * 1.0;          // (l_max, v_nom)
    const double at2 = hull.cut_c[2] * (1.0 / 1.21) + hull.cut_c[3] * 1.21;  // (s^2/v_max, v_max)
    CHECK(at1 == doctest::Approx(2.21).epsilon(1e-12));
    CHECK(at2 == doctest::Approx(2.21).epsilon(1e-12));
}

TEST_CASE("branch hull rejects inconsistent limits") {
    Bounds box = default_box();
    box.l_max = 0.8;  // breaks s_max^2 = l_max * v_nom
    CHECK_THROWS_AS(make_branch_hull(box), Error);
}

TEST_CASE("membership: interior, cut-violating and boundary points") {
    const BranchHull hull = make_branch_hull(default_box());

    CHECK(membership(hull, {0.0, 0.0, 0.0, 1.0}).inside);

    // Cone-feasible but cut-infeasible: the strict-tightening witness.
    const auto outside = membership(hull, {0.0, 0.0, 1.0, 1.21});
    CHECK(!outside.inside);
    REQUIRE(outside.violated.size() == 1);
    CHECK(outside.violated[0] == "cut");
    CHECK(1.21 * 1.0 + 1.0 * 1.21 == doctest::Approx(2.42));

    CHECK(membership(hull, {1.0, 0.0, 1.0, 1.0}).inside);  // boundary anchor
}

TEST_CASE("no surface point comes near the strict-tightening witness") {
    const BranchHull hull = make_branch_hull(default_box());
    const SampleSet set = sample_omega0(hull.box, 20000, 42);
    double min_dist2 = 1e30;
    for (size_t i = 0; i < set.size(); ++i) {
        const double d2 = set.p[i] * set.p[i] + set.q[i] * set.q[i] +
                          (set.l[i] - 1.0) * (set.l[i] - 1.0) +
                          (set.v[i] - 1.21) * (set.v[i] - 1.21);
        min_dist2 = std::min(min_dist2, d2);
    }
    CHECK(std::sqrt(min_dist2) > 0.5);
}

TEST_CASE("des hull coefficients and cut anchors") {
    DesUnit unit;
    unit.bus = 2;
    unit.s_max = 1.0;
    unit.r_batt = 0.01;
    unit.r_cvt = 0.01;
    unit.r_eq = 0.02;
    Bus bus;
    const DesHull hull = make_des_hull(unit, bus);
    CHECK(hull.c3_pl == doctest::Approx(0.9801));
    CHECK(hull.c3_v == doctest::Approx(0.02));
    CHECK(hull.c3_rhs == doctest::Approx(0.0404));

    // Cone equality point.
    CHECK(membership(hull, {1.0, 0.0, 0.02, 1.0}).inside);
    const double c1 = hull.r_eq * 1.0 - 0.02 * 1.0;
    CHECK(c1 == doctest::Approx(0.0));

    // C2 tight on the surface at q = s_max, p = 0, v = v_min.
    const double p_loss = hull.r_cvt * 1.0 / hull.v_min;
    const double lhs = hull.r_batt * 1.0 + hull.v_min * p_loss;
    CHECK(lhs == doctest::Approx(hull.c2_rhs).epsilon(1e-12));
}

TEST_CASE("des hull validity over the sampled loss surface") {
    DesUnit unit;
    unit.s_max = 0.8;
    unit.r_batt = 0.03;
    unit.r_cvt = 0.02;
    Bus bus;
    const DesHull hull = make_des_hull(unit, bus);
    const DesSampleSet set = sample_des_surface(hull, 10000, 9);
    const auto worst = max_des_cut_violation(hull, set);
    CHECK(worst[0] <= 1e-9);
    CHECK(worst[1] <= 1e-9);
    CHECK(worst[2] <= 1e-9);
    // And pointwise through the scalar membership path.
    for (size_t i = 0; i < 100; ++i) {
        CHECK(membership(hull, {set.p[i], set.q[i], set.p_loss[i], set.v[i]}).inside);
    }
}

TEST_CASE("decompose: symmetric facet midpoint") {
    const BranchHull hull = make_branch_hull(default_box());
    const BranchFlowPoint pt = facet_point(hull, 0.5, 0.0, 0.0);
    const Decomposition dec = decompose(hull, pt);
    for (double g : dec.gamma) CHECK(g == doctest::Approx(0.25).epsilon(1e-12));
    // Anchors at (+-s_max, 0).
    CHECK(dec.anchors[0][0] == doctest::Approx(1.0));
    CHECK(dec.anchors[2][0] == doctest::Approx(-1.0));
    CHECK(dec.anchors[0][1] == doctest::Approx(0.0));
}

TEST_CASE("decompose: anchor endpoint pins gamma13 to one") {
    const BranchHull hull = make_branch_hull(default_box());
    const BranchFlowPoint pt = facet_point(hull, 1.0, 0.3, -0.2);
    const Decomposition dec = decompose(hull, pt);
    CHECK(dec.gamma[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dec.gamma[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dec.gamma[2] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(dec.gamma[3] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decompose: seeded facet points reconstruct exactly") {
    const BranchHull hull = make_branch_hull(default_box());
    Rng rng(2024);
    for (int trial = 0; trial < 1000; ++trial) {
        const double gamma13 = rng.uniform();
        const double radius = hull.box.s_max * std::sqrt(rng.uniform());
        const double angle = 6.283185307179586 * rng.uniform();
        const BranchFlowPoint pt =
            facet_point(hull, gamma13, radius * std::cos(angle), radius * std::sin(angle));
        const Decomposition dec = decompose(hull, pt);

        double sum = 0.0;
        for (double g : dec.gamma) {
            CHECK(g >= 0.0);
            sum += g;
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);

        std::array<double, 4> rebuilt{};
        for (int k = 0; k < 4; ++k) {
            // Every anchor satisfies the quadratic equality exactly.
            const auto& a = dec.anchors[static_cast<size_t>(k)];
            CHECK(std::abs(a[3] * a[2] - a[0] * a[0] - a[1] * a[1]) <= 1e-12);
            for (int c = 0; c < 4; ++c) {
                rebuilt[static_cast<size_t>(c)] += dec.gamma[static_cast<size_t>(k)] * a[static_cast<size_t>(c)];
            }
        }
        const double err = std::max({std::abs(rebuilt[0] - pt.p), std::abs(rebuilt[1] - pt.q),
                                     std::abs(rebuilt[2] - pt.l), std::abs(rebuilt[3] - pt.v)});
        CHECK(err <= 1e-9);
    }
}

TEST_CASE("decompose rejects points off the facet") {
    const BranchHull hull = make_branch_hull(default_box());
    CHECK_THROWS_WITH_AS(decompose(hull, {0.0, 0.0, 0.0, 1.0}), doctest::Contains("facet"), Error);
}

TEST_CASE("projection predicates") {
    const BranchHull hull = make_branch_hull(default_box());

    // Hull members project into every sub-space hull.
    const SampleSet set = sample_omega0(hull.box, 500, 3);
    for (size_t i = 0; i < set.size(); ++i) {
        const auto rep =
            projection_predicates(hull, {set.p[i], set.q[i], set.l[i], set.v[i]});
        CHECK(rep.pq_l);
        CHECK(rep.pq_v);
        CHECK(rep.p_lv);
        CHECK(rep.q_lv);
    }

    const auto witness = projection_predicates(hull, {0.0, 0.0, 1.0, 1.21});
    CHECK(witness.pq_l);
    CHECK(witness.pq_v);
    CHECK(!witness.p_lv);  // the cut fails in the (P,l,v) projection

    const auto flat = projection_predicates(hull, {1.0, 0.0, 0.0, 1.0});
    CHECK(!flat.pq_l);  // s_max^2 > v_max * 0
}

TEST_CASE("sample_omega0: construction invariants") {
    const Bounds box = default_box();
    CHECK(sample_omega0(box, 0, 1).size() == 0);

    const SampleSet set = sample_omega0(box, 5000, 77);
    const BranchHull hull = make_branch_hull(box);
    for (size_t i = 0; i < set.size(); ++i) {
        CHECK(std::abs(set.v[i] * set.l[i] - set.p[i] * set.p[i] - set.q[i] * set.q[i]) <= 1e-15);
        CHECK(set.l[i] <= box.l_max);
        CHECK(set.v[i] >= box.v_min);
        CHECK(set.v[i] <= box.v_max);
    }
    CHECK(max_membership_violation(hull, set) <= 1e-9);

    // Deterministic under the seed.
    const SampleSet again = sample_omega0(box, 5000, 77);
    CHECK(set.p == again.p);
    CHECK(set.v == again.v);
}

TEST_CASE("support_gap: box direction attains v_min from below") {
    const BranchHull hull = make_branch_hull(default_box());
    const SampleSet set = sample_omega0(hull.box, 20000, 5);
    const auto gap = support_gap(hull, {0.0, 0.0, 0.0, 1.0}, set);
    CHECK(gap.hull_value == doctest::Approx(0.81).epsilon(1e-6));
    CHECK(gap.sample_value >= 0.81);
    CHECK(gap.gap <= 1e-9);
    CHECK(gap.gap >= -1e-3);
}

TEST_CASE("support_gap: diagonal direction is tight to sampling accuracy") {
    const BranchHull hull = make_branch_hull(default_box());
    const SampleSet set = sample_omega0(hull.box, 20000, 6);
    const auto gap = support_gap(hull, {0.0, 0.0, 0.7071067811865476, 0.7071067811865476}, set);
    CHECK(gap.gap <= 1e-9);
    CHECK(gap.gap >= -1e-2);
}

TEST_CASE("support_gap rejects an empty sample set") {
    const BranchHull hull = make_branch_hull(default_box());
    CHECK_THROWS_AS(support_gap(hull, {0, 0, 0, 1}, SampleSet{}), Error);
}

TEST_CASE("support_net points are all on the surface and inside the hull") {
    const Bounds box = default_box();
    const BranchHull hull = make_branch_hull(box);
    const SampleSet net = support_net(box, 20000, 3);
    REQUIRE(net.size() == 20000);
    std::vector<double> res(net.size());
    kernels::active_backend().quad_residual(net.p.data(), net.q.data(), net.l.data(), net.v.data(),
                                            res.data(), net.size());
    for (double r : res) CHECK(std::abs(r) <= 1e-15);
    CHECK(max_membership_violation(hull, net) <= 1e-9);

    const SampleSet again = support_net(box, 20000, 3);
    CHECK(net.p == again.p);  // deterministic under the seed
}

TEST_CASE("storage support gaps: valid everywhere, residual tightness reported") {
    DesUnit unit;
    unit.s_max = 1.0;
    unit.r_batt = 0.012;
    unit.r_cvt = 0.008;
    Bus bus;
    const DesHull hull = make_des_hull(unit, bus);
    const DesSampleSet samples = sample_des_surface(hull, 20000, 17);

    Rng rng(99);
    double min_gap = 0.0, max_gap = -1.0;
    for (int k = 0; k < 40; ++k) {
        std::array<double, 4> dir{};
        double norm = 0.0;
        for (double& c : dir) {
            c = rng.uniform(-1.0, 1.0);
            norm += c * c;
        }
        norm = std::sqrt(norm);
        for (double& c : dir) c /= norm;
        const auto gap = support_gap(hull, dir, samples);
        // Validity: the relaxation can never sit above the sampled surface.
        CHECK(gap.gap <= 1e-9);
        min_gap = std::min(min_gap, gap.gap);
        max_gap = std::max(max_gap, gap.gap);
    }
    // How close C1 ^ C2 ^ C3 comes to the exact hull is an open question;
    // the observed range is the report.
    MESSAGE("storage hull support gap range: [", min_gap, ", ", max_gap, "]");
}
