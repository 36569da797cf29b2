#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "desos/conic.hpp"
#include "desos/problem.hpp"
#include "desos/rng.hpp"
#include "oracles.hpp"
#include "solver_fixtures.hpp"

using namespace desos;
using namespace desos::conic;

TEST_CASE("canonicalize: rotated cone maps to a plain second-order cone") {
    // The orthogonal pair ((u+v)/sqrt2, (u-v)/sqrt2) with members scaled by
    // sqrt2 preserves membership: u v >= |w|^2 <=> the mapped point is in the
    // plain cone. Spot-check the map rows on random points.
    Problem p;
    const int u = p.add_col("u");
    const int v = p.add_col("v");
    const int w = p.add_col("w");
    p.cones.push_back({ConeKind::rsoc, {u, v, w}});
    const CanonicalForm canon = canonicalize(p);
    REQUIRE(canon.soc_dims.size() == 1);
    CHECK(canon.soc_dims[0] == 3);

    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::Vector3d x(rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0), rng.uniform(-2.0, 2.0));
        const Eigen::VectorXd s = -(canon.G * x);  // cone rows have h = 0
        const bool in_rsoc = x(0) * x(1) >= x(2) * x(2) - 1e-12;
        const bool in_soc = s(0) >= std::hypot(s(1), s(2)) - 1e-12;
        CHECK(in_rsoc == in_soc);
    }
    // 2ab >= c^2 corresponds to the same map with w unscaled: check the
    // characteristic identity on the head/tail pair.
    const double a = 1.3, b = 0.7;
    CHECK(std::pow((a + b) / std::sqrt(2.0), 2) - std::pow((a - b) / std::sqrt(2.0), 2) ==
          doctest::Approx(2.0 * a * b).epsilon(1e-14));
}

TEST_CASE("canonicalize: pure LP passes through with no cones") {
    Problem p;
    const int x = p.add_col("x", 0.0, 2.0, 1.0);
    p.ineq_rows.push_back({{{x, 1.0}}, 1.5});
    const CanonicalForm canon = canonicalize(p);
    CHECK(canon.soc_dims.empty());
    CHECK(canon.n_lp == 3);  // one row + two bounds
    CHECK(canon.b.size() == 0);
}

TEST_CASE("canonicalize: double-bounded column round-trips through its rows") {
    Problem p;
    const int x = p.add_col("x", -1.5, 2.5, 1.0);
    const CanonicalForm canon = canonicalize(p);
    REQUIRE(canon.upper_row[static_cast<size_t>(x)] >= 0);
    REQUIRE(canon.lower_row[static_cast<size_t>(x)] >= 0);
    CHECK(canon.h(canon.upper_row[static_cast<size_t>(x)]) == 2.5);
    CHECK(canon.h(canon.lower_row[static_cast<size_t>(x)]) == 1.5);  // -lb
    // Solving sits exactly on the lower bound.
    const Solution sol = solve(p);
    CHECK(sol.x[0] == doctest::Approx(-1.5).epsilon(1e-8));
}

TEST_CASE("validate_problem rejects shared cone columns") {
    Problem p;
    const int a = p.add_col("a");
    const int b = p.add_col("b");
    const int c = p.add_col("c");
    p.cones.push_back({ConeKind::soc, {a, b}});
    p.cones.push_back({ConeKind::soc, {c, b}});
    CHECK_THROWS_WITH_AS(validate_problem(p), doctest::Contains("more than one cone"), Error);
}

TEST_CASE("fixture set solves to the known objectives with small rechecked KKT") {
    for (const auto& fixture : fixtures::solver_fixtures()) {
        CAPTURE(fixture.name);
        const Solution sol = solve(fixture.problem);
        CHECK(sol.status == fixture.status);
        if (fixture.status != SolveStatus::optimal) continue;
        CHECK(sol.objective == doctest::Approx(fixture.objective).epsilon(1e-6).scale(1.0));
        const KktResiduals res = kkt_residuals(fixture.problem, sol);
        CHECK(res.primal <= 1e-7);
        CHECK(res.dual <= 1e-7);
        CHECK(res.gap <= 1e-7);
        // Solver-side unscaled residuals agree with the independent recheck
        // on scale.
        CHECK(sol.primal_res <= 1e-6);
        CHECK(sol.dual_res <= 1e-6);
    }
}

TEST_CASE("pure-LP fixtures match the brute-force vertex oracle") {
    int checked = 0;
    for (const auto& fixture : fixtures::solver_fixtures()) {
        if (fixture.status != SolveStatus::optimal) continue;
        const auto oracle = oracles::lp_vertex_min(fixture.problem);
        if (!oracle) continue;  // cones or too many columns
        CAPTURE(fixture.name);
        const Solution sol = solve(fixture.problem);
        CHECK(sol.objective == doctest::Approx(*oracle).epsilon(1e-6).scale(1.0));
        ++checked;
    }
    CHECK(checked >= 8);
}

TEST_CASE("kkt_residuals: hand-constructed optimal pair has zero residuals") {
    Problem p;
    p.add_col("x", 1.0, kInf, 1.0);
    Solution sol;
    sol.status = SolveStatus::optimal;
    sol.x = {1.0};
    sol.objective = 1.0;
    sol.bound_dual_lower = {1.0};  // c - mu_lo = 0
    sol.bound_dual_upper = {0.0};
    const KktResiduals res = kkt_residuals(p, sol);
    CHECK(res.primal == 0.0);
    CHECK(res.dual == 0.0);
    CHECK(res.gap == 0.0);

    // A perturbed primal point shows up at the perturbation scale.
    sol.x = {0.9};
    const KktResiduals bad = kkt_residuals(p, sol);
    CHECK(bad.primal == doctest::Approx(0.05));  // 0.1 violation over 1+|lb|
    CHECK(bad.gap > 0.01);
}

TEST_CASE("solver determinism: equal inputs give equal iterates") {
    const auto fixtures_list = fixtures::solver_fixtures();
    const Problem& p = fixtures_list[2].problem;
    const Solution a = solve(p);
    const Solution b = solve(p);
    CHECK(a.iterations == b.iterations);
    REQUIRE(a.x.size() == b.x.size());
    for (size_t i = 0; i < a.x.size(); ++i) CHECK(a.x[i] == b.x[i]);
}

TEST_CASE("iteration cap reports iteration-limit with the best iterate") {
    Problem p;
    const int t = p.add_col("t", -kInf, kInf, 1.0);
    const int a = p.add_col("a", 3.0, 3.0);
    const int b = p.add_col("b", 4.0, 4.0);
    p.cones.push_back({ConeKind::soc, {t, a, b}});
    Settings s;
    s.max_iter = 2;
    const Solution sol = solve(p, s);
    CHECK(sol.status == SolveStatus::iteration_limit);
    CHECK(sol.iterations <= 2);
}

TEST_CASE("committed regression fixtures solve to their frozen objectives") {
    struct Fixture {
        const char* file;
        double objective;
    };
    // Objectives recorded when the fixtures were dumped.
    const Fixture fixtures[] = {
        {"two_bus_ch_f2.conic", 8.017407167178e-04},
        {"two_bus_socp_f1.conic", 1.504008703760e+02},
    };
    for (const auto& fixture : fixtures) {
        CAPTURE(fixture.file);
        std::ifstream in(std::string(DESOS_SOURCE_DIR) + "/tests/fixtures/" + fixture.file);
        REQUIRE(in.good());
        std::stringstream buf;
        buf << in.rdbuf();
        const Problem problem = desos::opt::parse_problem(buf.str());
        const Solution sol = solve(problem);
        REQUIRE(sol.status == SolveStatus::optimal);
        CHECK(sol.objective == doctest::Approx(fixture.objective).epsilon(1e-7).scale(1.0));
        const KktResiduals res = kkt_residuals(problem, sol);
        CHECK(res.primal <= 1e-7);
        CHECK(res.dual <= 1e-7);
        CHECK(res.gap <= 1e-7);
    }
}

TEST_CASE("tolerance setting is honored by the recheck") {
    Problem p;
    const int x = p.add_col("x", 0.0, 5.0, 1.0);
    const int y = p.add_col("y", 0.0, 5.0, 1.0);
    p.ineq_rows.push_back({{{x, -1.0}, {y, -1.0}}, -2.0});
    Settings s;
    s.tol = 1e-10;
    const Solution sol = solve(p, s);
    REQUIRE(sol.status == SolveStatus::optimal);
    const KktResiduals res = kkt_residuals(p, sol);
    CHECK(res.primal <= 1e-9);
    CHECK(res.dual <= 1e-9);
    CHECK(res.gap <= 1e-9);
}
