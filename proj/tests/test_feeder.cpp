#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "desos/feeder.hpp"

using namespace desos;

namespace {

// Minimal 2-bus feeder text: substation and one load bus.
const char* kTwoBus = R"json({
  "base": {"mva": 10.0, "kv": 12.47},
  "sub_rating": 1.5,
  "buses": [
    {"id": 1, "is_substation": true},
    {"id": 2, "v_nom": 1.0}
  ],
  "branches": [
    {"from": 1, "to": 2, "r": 0.01, "x": 0.01, "s_max": 1.0}
  ],
  "profiles": {"horizon": 1, "dt": 1.0, "load_p": {"2": [0.1]}, "load_q": {"2": [0.02]}, "price": [50.0]}
})json";

Feeder path3() {
    Feeder f;
    f.buses = {Bus{.id = 1, .is_substation = true}, Bus{.id = 2}, Bus{.id = 3}};
    f.branches = {Branch{.from_bus = 1, .to_bus = 2, .r = 0.01, .x = 0.01, .s_max = 1.0},
                  Branch{.from_bus = 2, .to_bus = 3, .r = 0.01, .x = 0.01, .s_max = 1.0}};
    f.profiles.horizon = 1;
    return f;
}

}  // namespace

TEST_CASE("l_max derives from the thermal/current coupling") {
    const Feeder f = feeder_from_json_text(kTwoBus);
    REQUIRE(f.num_branches() == 1);
    // l_max = s_max^2 / v_nom = 1
    CHECK(f.branches[0].l_max == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(f.branches[0].s_max * f.branches[0].s_max - f.branches[0].l_max * 1.0) <= 1e-9);
    CHECK(f.substation == 0);
    CHECK(f.default_bounds_used);  // bounds omitted in the file
}

TEST_CASE("a cycle is rejected as not radial") {
    Feeder f = path3();
    f.branches.push_back(Branch{.from_bus = 3, .to_bus = 1, .r = 0.01, .x = 0.0, .s_max = 1.0});
    CHECK_THROWS_WITH_AS(finalize_feeder(f), doctest::Contains("not radial"), Error);
}

TEST_CASE("validate_radial on a path graph") {
    Feeder f = path3();
    finalize_feeder(f);
    CHECK(validate_radial(f).empty());
}

TEST_CASE("validate_radial reports disconnection") {
    Feeder f = path3();
    f.buses.push_back(Bus{.id = 4});  // nothing attaches bus 4
    const auto violations = validate_radial(f);
    REQUIRE(!violations.empty());
    bool found = false;
    for (const auto& v : violations) {
        if (v.find("disconnected: bus 4") != std::string::npos) found = true;
    }
    CHECK(found);
}

TEST_CASE("validate_radial reports child->parent orientation") {
    Feeder f = path3();
    std::swap(f.branches[1].from_bus, f.branches[1].to_bus);  // now 3 -> 2
    const auto violations = validate_radial(f);
    REQUIRE(!violations.empty());
    CHECK(violations[0].find("orientation: branch 3") != std::string::npos);
}

TEST_CASE("bus invariant violations name the entity") {
    Feeder f = path3();
    f.buses[1].v_min = 1.3;  // v_min > v_nom
    CHECK_THROWS_WITH_AS(finalize_feeder(f), doctest::Contains("bus 2"), Error);
}

TEST_CASE("inconsistent l_max is rejected") {
    Feeder f = path3();
    f.branches[0].l_max = 0.5;  // s_max^2 = 1 != 0.5 * v_nom
    CHECK_THROWS_WITH_AS(finalize_feeder(f), doctest::Contains("coupling"), Error);
}

TEST_CASE("save -> load is the identity and bytes are stable") {
    const Feeder f = feeder_from_json_text(kTwoBus);
    const std::string text1 = feeder_to_json_text(f);
    const Feeder f2 = feeder_from_json_text(text1);
    const std::string text2 = feeder_to_json_text(f2);
    CHECK(text1 == text2);
    CHECK(f2.num_buses() == f.num_buses());
    CHECK(f2.branches[0].r == f.branches[0].r);
    CHECK(f2.profiles.load_p[1][0] == f.profiles.load_p[1][0]);
    CHECK(f2.sub_rating == f.sub_rating);
}

TEST_CASE("des units parse and derive r_eq") {
    std::string text = kTwoBus;
    const std::string des =
        R"("des": [{"bus": 2, "s_max": 0.1, "r_batt": 0.05, "r_cvt": 0.03, "e_min": 0.0, "e_max": 0.2, "e_surplus": 0.1}],)";
    text.insert(text.find("\"profiles\""), des);
    const Feeder f = feeder_from_json_text(text);
    REQUIRE(f.num_des() == 1);
    CHECK(f.des_units[0].r_eq == doctest::Approx(0.08).epsilon(1e-15));
}

TEST_CASE("des energy window must hold the surplus") {
    std::string text = kTwoBus;
    const std::string des =
        R"("des": [{"bus": 2, "s_max": 0.1, "r_batt": 0.05, "r_cvt": 0.03, "e_min": 0.0, "e_max": 0.2, "e_surplus": 0.5}],)";
    text.insert(text.find("\"profiles\""), des);
    CHECK_THROWS_WITH_AS(feeder_from_json_text(text), doctest::Contains("e_min <= e_surplus"),
                         Error);
}

TEST_CASE("bundled 9-bus feeder: two storage units at reference sizes") {
    const Feeder f = load_feeder(std::string(DESOS_SOURCE_DIR) + "/data/feeder9.json");
    CHECK(f.num_buses() == 9);
    REQUIRE(f.num_des() == 2);
    // 1 MVA / 2 MWh and 0.75 MVA / 1.5 MWh on the 10 MVA base.
    CHECK(f.des_units[0].s_max == doctest::Approx(0.10));
    CHECK(f.des_units[0].e_max == doctest::Approx(0.20));
    CHECK(f.des_units[1].s_max == doctest::Approx(0.075));
    CHECK(f.des_units[1].e_max == doctest::Approx(0.15));
    CHECK(f.horizon() == 24);
    CHECK(validate_radial(f).empty());

    double pv = 0.0, load = 0.0;
    for (int i = 0; i < f.num_buses(); ++i) {
        double peak = 0.0, cap = 0.0;
        for (int t = 0; t < 24; ++t) {
            peak = std::max(peak, f.profiles.load_p[static_cast<size_t>(i)][static_cast<size_t>(t)]);
            cap = std::max(cap, f.profiles.pv[static_cast<size_t>(i)][static_cast<size_t>(t)]);
        }
        load += peak;
        pv += cap;
    }
    CHECK(pv / load == doctest::Approx(0.305).epsilon(0.02));
}

TEST_CASE("gen_instance: deterministic, radial, requested penetration") {
    InstanceSpec spec;
    spec.bus_count = 9;
    spec.pv_penetration = 0.305;
    const Feeder a = gen_instance(spec, 7);
    const Feeder b = gen_instance(spec, 7);
    CHECK(feeder_to_json_text(a) == feeder_to_json_text(b));
    CHECK(a.num_buses() == 9);
    CHECK(a.num_branches() == 8);
    CHECK(validate_radial(a).empty());

    double pv = 0.0, load = 0.0;
    for (int i = 0; i < a.num_buses(); ++i) {
        pv += a.profiles.pv[static_cast<size_t>(i)][0];
        load += a.profiles.load_p[static_cast<size_t>(i)][0];
    }
    CHECK(pv / load == doctest::Approx(0.305).epsilon(1e-6));

    const Feeder c = gen_instance(spec, 8);
    CHECK(feeder_to_json_text(a) != feeder_to_json_text(c));
}

TEST_CASE("gen_instance: trivial two-bus case without PV") {
    InstanceSpec spec;
    spec.bus_count = 2;
    spec.pv_penetration = 0.0;
    const Feeder f = gen_instance(spec, 0);
    CHECK(f.num_branches() == 1);
    for (const auto& row : f.profiles.pv) {
        for (double g : row) CHECK(g == 0.0);
    }
}

TEST_CASE("gen_instance rejects an infeasible spec") {
    InstanceSpec spec;
    spec.bus_count = 5;
    spec.pv_penetration = 1.5;
    CHECK_THROWS_WITH_AS(gen_instance(spec, 1), doctest::Contains("infeasible"), Error);
    spec.pv_penetration = 0.3;
    spec.bus_count = 1;
    CHECK_THROWS_AS(gen_instance(spec, 1), Error);
}

TEST_CASE("snapshot_feeder collapses profiles to one period") {
    InstanceSpec spec;
    spec.bus_count = 5;
    spec.horizon = 24;
    const Feeder f = gen_instance(spec, 3);
    const Feeder s = snapshot_feeder(f, 12);
    CHECK(s.horizon() == 1);
    CHECK(s.profiles.price[0] == f.profiles.price[12]);
    CHECK(s.profiles.load_p[2][0] == f.profiles.load_p[2][12]);
}
