#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "desos/report.hpp"

using namespace desos;
using namespace desos::report;

namespace {

Feeder small_instance() {
    InstanceSpec spec;
    spec.bus_count = 6;
    spec.pv_penetration = 0.3;
    spec.horizon = 1;
    return gen_instance(spec, 21);
}

}  // namespace

TEST_CASE("compare: loss objective is exact for both relaxations") {
    const Feeder f = small_instance();
    CompareOptions options;
    options.instance_label = "gen6";
    const auto table = compare(f, ObjectiveKind::f2, {RelaxKind::socp, RelaxKind::ch}, options);
    REQUIRE(table.size() == 2);
    CHECK(table[0].relax == "socp");
    CHECK(table[1].relax == "ch");
    for (const auto& row : table) {
        CAPTURE(row.relax);
        CHECK(row.status == "optimal");
        CHECK(row.me1 < kExactnessThreshold);
        if (row.me2) CHECK(*row.me2 < kExactnessThreshold);
        // The relaxed cones keep the signed maximum errors nonnegative up to
        // solver tolerance, and recovery cannot beat the relaxation bound.
        CHECK(row.me1 >= -1e-8);
        if (row.me2) CHECK(*row.me2 >= -1e-8);
        CHECK(row.recovery_gap >= -1e-6);
        CHECK(row.exact);
        CHECK(row.solve_seconds >= 0.0);
        CHECK(row.oov_order_ok);
    }
    // Containment: the cut relaxation cannot undercut the cone bound.
    CHECK(table[1].oov >= table[0].oov - 1e-6);
}

TEST_CASE("compare requires at least one relaxation") {
    CHECK_THROWS_AS(compare(small_instance(), ObjectiveKind::f2, {}), Error);
}

TEST_CASE("csv emission: single row, header line, deterministic bytes") {
    ExactnessReport row;
    row.instance = "t";
    row.objective = "f2";
    row.relax = "socp";
    row.status = "optimal";
    row.oov = 0.123456789;
    row.me1 = 1.6e-7;
    row.me2 = 3.0e-9;
    row.exact = true;
    row.solve_seconds = 0.126;
    row.recovery_gap = 1e-8;
    const std::vector<ExactnessReport> table{row};

    const std::string csv = to_csv(table);
    const auto newlines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(newlines == 2);  // header + one row
    CHECK(csv.find("instance,objective,relax,status,oov,me1,me2") == 0);
    CHECK(csv.find("1.23457e-01") != std::string::npos);  // 6 significant digits
    CHECK(csv.find("0.13") != std::string::npos);         // time to 0.01 s
    CHECK(to_csv(table) == csv);
}

TEST_CASE("json emission round-trips through the reader") {
    const Feeder f = small_instance();
    const auto table = compare(f, ObjectiveKind::f2, {RelaxKind::ch});
    const std::string text = to_json(table);
    const auto parsed = reports_from_json(text);
    REQUIRE(parsed.size() == table.size());
    CHECK(parsed[0].relax == table[0].relax);
    CHECK(parsed[0].exact == table[0].exact);
    CHECK(to_json(parsed) == text);
}

TEST_CASE("emit rejects an empty table") {
    CHECK_THROWS_AS(emit({}, Format::csv, "-"), Error);
}

TEST_CASE("series csv shape") {
    const Feeder f = small_instance();
    const NetworkState st = NetworkState::zeros(f);
    const std::string text = series_csv(f, st);
    CHECK(text.rfind("series,entity,period,value\n", 0) == 0);
    CHECK(text.find("\nv,1,0,") != std::string::npos);
    CHECK(text.find("p_grid,1,0,") != std::string::npos);
}
