#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "desos/distflow.hpp"
#include "desos/feeder.hpp"

using namespace desos;

namespace {

Feeder two_bus(double r, double x, double load_p, double load_q, double s_max = 1.0) {
    Feeder f;
    f.buses = {Bus{.id = 1, .is_substation = true}, Bus{.id = 2}};
    f.branches = {Branch{.from_bus = 1, .to_bus = 2, .r = r, .x = x, .s_max = s_max}};
    f.profiles.horizon = 1;
    f.profiles.load_p = {{0.0}, {load_p}};
    f.profiles.load_q = {{0.0}, {load_q}};
    finalize_feeder(f);
    return f;
}

std::vector<std::vector<double>> injections_from_loads(const Feeder& f) {
    std::vector<std::vector<double>> inj(static_cast<size_t>(f.num_buses()));
    for (int i = 0; i < f.num_buses(); ++i) {
        inj[static_cast<size_t>(i)].resize(static_cast<size_t>(f.horizon()));
        for (int t = 0; t < f.horizon(); ++t) {
            inj[static_cast<size_t>(i)][static_cast<size_t>(t)] =
                f.profiles.pv[static_cast<size_t>(i)][static_cast<size_t>(t)] -
                f.profiles.load_p[static_cast<size_t>(i)][static_cast<size_t>(t)];
        }
    }
    return inj;
}

std::vector<std::vector<double>> injections_q(const Feeder& f) {
    std::vector<std::vector<double>> inj(static_cast<size_t>(f.num_buses()));
    for (int i = 0; i < f.num_buses(); ++i) {
        inj[static_cast<size_t>(i)].resize(static_cast<size_t>(f.horizon()));
        for (int t = 0; t < f.horizon(); ++t) {
            inj[static_cast<size_t>(i)][static_cast<size_t>(t)] =
                -f.profiles.load_q[static_cast<size_t>(i)][static_cast<size_t>(t)];
        }
    }
    return inj;
}

// Independent two-bus fixed point: l = ((p + r l)^2 + (q + x l)^2) / v_root.
struct TwoBusOracle {
    double P, Q, l, v2;
};

TwoBusOracle two_bus_oracle(double r, double x, double p, double q, double v_root) {
    double l = 0.0;
    for (int i = 0; i < 2000; ++i) {
        const double P = p + r * l;
        const double Q = q + x * l;
        l = (P * P + Q * Q) / v_root;
    }
    TwoBusOracle out;
    out.P = p + r * l;
    out.Q = q + x * l;
    out.l = l;
    out.v2 = v_root - 2.0 * (r * out.P + x * out.Q) + (r * r + x * x) * l;
    return out;
}

}  // namespace

TEST_CASE("eval_residuals: zero state has zero residuals") {
    const Feeder f = two_bus(0.01, 0.01, 0.0, 0.0);
    const NetworkState st = NetworkState::zeros(f);
    CHECK(distflow::eval_residuals(f, st).max_abs() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("eval_residuals: quadratic equation residual arithmetic") {
    const Feeder f = two_bus(0.01, 0.01, 0.0, 0.0);
    NetworkState st = NetworkState::zeros(f);
    st.branch_p[0][0] = 1.0;
    st.branch_q[0][0] = 0.0;
    st.branch_l[0][0] = 1.0;
    st.v[0][0] = 1.0;
    CHECK(distflow::eval_residuals(f, st).quad[0][0] == doctest::Approx(0.0));
    st.branch_l[0][0] = 0.5;
    CHECK(distflow::eval_residuals(f, st).quad[0][0] == doctest::Approx(-0.5));
}

TEST_CASE("eval_residuals rejects mismatched dimensions") {
    const Feeder f = two_bus(0.01, 0.01, 0.1, 0.0);
    NetworkState st = NetworkState::zeros(f);
    st.v.pop_back();
    CHECK_THROWS_AS(distflow::eval_residuals(f, st), Error);
}

TEST_CASE("sweep_solve: single branch against the independent fixed point") {
    const Feeder f = two_bus(0.01, 0.01, 0.1, 0.0);
    const NetworkState st = distflow::sweep_solve(f, injections_from_loads(f), injections_q(f), 1.0);

    const TwoBusOracle oracle = two_bus_oracle(0.01, 0.01, 0.1, 0.0, 1.0);
    CHECK(st.branch_p[0][0] == doctest::Approx(oracle.P).epsilon(1e-9));
    CHECK(st.branch_l[0][0] == doctest::Approx(oracle.l).epsilon(1e-9));
    CHECK(st.v[1][0] == doctest::Approx(oracle.v2).epsilon(1e-9));

    // Magnitudes of the reference case.
    CHECK(st.branch_p[0][0] == doctest::Approx(0.1001).epsilon(2e-3));
    CHECK(st.v[1][0] == doctest::Approx(0.99800).epsilon(2e-4));

    CHECK(distflow::eval_residuals(f, st).max_abs() <= 1e-8);
    // Grid must cover the load plus the branch loss.
    CHECK(st.p_grid[0] == doctest::Approx(oracle.P).epsilon(1e-9));
}

TEST_CASE("sweep_solve: zero load keeps the voltage profile flat") {
    const Feeder f = two_bus(0.05, 0.02, 0.0, 0.0);
    const NetworkState st = distflow::sweep_solve(f, injections_from_loads(f), injections_q(f), 1.04);
    CHECK(st.branch_p[0][0] == 0.0);
    CHECK(st.branch_l[0][0] == 0.0);
    CHECK(st.v[0][0] == doctest::Approx(1.04));
    CHECK(st.v[1][0] == doctest::Approx(1.04));
}

TEST_CASE("sweep_solve: loadability limit matches the discriminant root") {
    // l*v = (p + r l)^2 + (x l)^2 loses its real root at
    // p* = (-r + sqrt(r^2 + x^2)) / (2 x^2).
    const double r = 0.3, x = 0.3;
    const double p_star = (-r + std::hypot(r, x)) / (2.0 * x * x);

    auto solves = [&](double p) {
        const Feeder f = two_bus(r, x, p, 0.0, 10.0);
        try {
            distflow::sweep_solve(f, injections_from_loads(f), injections_q(f), 1.0);
            return true;
        } catch (const Error&) {
            return false;
        }
    };
    double lo = 0.1, hi = 2.0;
    REQUIRE(solves(lo));
    REQUIRE(!solves(hi));
    for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (lo + hi);
        (solves(mid) ? lo : hi) = mid;
    }
    CHECK(lo == doctest::Approx(p_star).epsilon(0.05));
}

TEST_CASE("me_branch: exact flow gives zero, slack branch gives its gap") {
    const Feeder f = two_bus(0.01, 0.01, 0.1, 0.02);
    const NetworkState exact =
        distflow::sweep_solve(f, injections_from_loads(f), injections_q(f), 1.0);
    CHECK(std::abs(distflow::me_branch(f, exact)) <= 1e-9);

    NetworkState slack = NetworkState::zeros(f);
    slack.branch_l[0][0] = 1.0;  // v=1, l=1, P=Q=0
    CHECK(distflow::me_branch(f, slack) == doctest::Approx(1.0));
}

TEST_CASE("me_des: tight loss relation gives zero; no storage gives n/a") {
    Feeder f = two_bus(0.01, 0.01, 0.1, 0.0);
    CHECK(!distflow::me_des(f, NetworkState::zeros(f)).has_value());

    f.des_units = {DesUnit{.bus = 2, .s_max = 1.0, .r_batt = 0.012, .r_cvt = 0.008,
                           .e_min = 0.0, .e_max = 2.0, .e_surplus = 1.0}};
    finalize_feeder(f);
    NetworkState st = NetworkState::zeros(f);
    CHECK(distflow::me_des(f, st).value() == doctest::Approx(0.0));

    st.p_des[0][0] = 1.0;
    st.q_des[0][0] = 0.0;
    st.p_loss[0][0] = 0.02;  // r_eq * p^2 / v with v = 1
    st.v[1][0] = 1.0;
    CHECK(distflow::me_des(f, st).value() == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("recover_feasible: zero injections recover to the zero flow with zero gap") {
    const Feeder f = two_bus(0.01, 0.01, 0.0, 0.0);
    const NetworkState relaxed = NetworkState::zeros(f);
    const auto rec = distflow::recover_feasible(f, relaxed, ObjectiveKind::f2, 0.0);
    CHECK(rec.gap == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rec.max_residual <= 1e-10);
    CHECK(rec.state.branch_p[0][0] == 0.0);
}

TEST_CASE("recover_feasible: an exact state is a fixed point") {
    Feeder f = two_bus(0.01, 0.02, 0.12, 0.03);
    f.des_units = {DesUnit{.bus = 2, .s_max = 0.5, .r_batt = 0.02, .r_cvt = 0.02,
                           .e_min = 0.0, .e_max = 1.0, .e_surplus = 0.5}};
    finalize_feeder(f);

    // Build an exactly feasible state with the storage discharging.
    auto inj_p = injections_from_loads(f);
    auto inj_q = injections_q(f);
    inj_p[1][0] += 0.05;
    inj_q[1][0] += 0.01;
    NetworkState exact = distflow::sweep_solve(f, inj_p, inj_q, 1.0);
    exact.p_des[0][0] = 0.05;
    exact.q_des[0][0] = 0.01;
    const DesUnit& u = f.des_units[0];
    exact.p_loss[0][0] =
        (u.r_eq * 0.05 * 0.05 + u.r_cvt * 0.01 * 0.01) / exact.v[1][0];

    const double oov = distflow::evaluate_objective(f, exact, ObjectiveKind::f2);
    const auto rec = distflow::recover_feasible(f, exact, ObjectiveKind::f2, oov);
    CHECK(std::abs(rec.gap) <= 1e-6);
    CHECK(rec.max_residual <= 1e-8);
    for (int i = 0; i < f.num_buses(); ++i) {
        CHECK(rec.state.v[static_cast<size_t>(i)][0] ==
              doctest::Approx(exact.v[static_cast<size_t>(i)][0]).epsilon(1e-6));
    }
}

TEST_CASE("evaluate_objective: grid cost uses price, base power and period length") {
    Feeder f = two_bus(0.01, 0.01, 0.1, 0.0);
    f.profiles.price = {50.0};
    NetworkState st = NetworkState::zeros(f);
    st.p_grid[0] = 0.2;
    // 0.2 pu * 10 MVA * 1 h * 50 $/MWh
    CHECK(distflow::evaluate_objective(f, st, ObjectiveKind::f1) == doctest::Approx(100.0));
}
