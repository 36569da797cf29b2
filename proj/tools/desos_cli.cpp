#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "desos/feeder.hpp"
#include "desos/hull.hpp"
#include "desos/problem.hpp"
#include "desos/report.hpp"
#include "desos/rng.hpp"

namespace {

// Exit codes: 0 success, 1 domain/validation error, 2 solver failure.
constexpr int kExitOk = 0;
constexpr int kExitDomain = 1;
constexpr int kExitSolver = 2;

void write_output(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) desos::fail(desos::ErrorKind::io, "cannot write: " + path);
    out << text;
}

std::vector<desos::RelaxKind> parse_relax_list(const std::string& csv) {
    std::vector<desos::RelaxKind> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(desos::relax_from_string(item));
    }
    if (out.empty()) desos::fail(desos::ErrorKind::validation, "empty relaxation list");
    return out;
}

int cmd_validate(const std::string& path) {
    const desos::Feeder feeder = desos::load_feeder(path);
    const auto violations = desos::validate_radial(feeder);
    if (violations.empty()) {
        std::printf("radial: OK (%d buses, %d branches, %d storage units)\n", feeder.num_buses(),
                    feeder.num_branches(), feeder.num_des());
        return kExitOk;
    }
    for (const auto& v : violations) std::printf("violation: %s\n", v.c_str());
    return kExitDomain;
}

int cmd_solve(const std::string& path, const std::string& objective, const std::string& relax,
              bool snapshot, double tol, const std::string& format, const std::string& out_path,
              const std::string& series_path) {
    desos::Feeder feeder = desos::load_feeder(path);
    if (snapshot) feeder = desos::snapshot_feeder(feeder);
    const desos::ObjectiveKind obj = desos::objective_from_string(objective);
    const desos::RelaxKind rel = desos::relax_from_string(relax);

    desos::opt::BuiltProblem built = desos::opt::build_problem(feeder, obj, rel, false);
    desos::conic::Settings settings;
    settings.tol = tol;
    const desos::conic::Solution sol = desos::conic::solve(built.problem, settings);
    if (sol.status != desos::conic::SolveStatus::optimal) {
        std::fprintf(stderr, "solve failed: %s\n", desos::conic::to_string(sol.status));
        return kExitSolver;
    }
    const desos::NetworkState state = desos::opt::extract_state(sol, built.vars, feeder);

    desos::report::ExactnessReport row;
    row.instance = path;
    row.objective = objective;
    row.relax = relax;
    row.status = desos::conic::to_string(sol.status);
    row.oov = sol.objective;
    row.me1 = desos::distflow::me_branch(feeder, state);
    if (auto me2 = desos::distflow::me_des(feeder, state)) row.me2 = *me2;
    row.exact = std::max(row.me1, row.me2.value_or(0.0)) < desos::report::kExactnessThreshold;
    row.solve_seconds = sol.solve_seconds;
    row.recovery_gap = desos::distflow::recover_feasible(feeder, state, obj, sol.objective).gap;
    row.default_bounds = feeder.default_bounds_used;

    const std::vector<desos::report::ExactnessReport> table{row};
    write_output(format == "json" ? desos::report::to_json(table) : desos::report::to_csv(table),
                 out_path);
    if (!series_path.empty()) {
        write_output(desos::report::series_csv(feeder, state), series_path);
    }
    return kExitOk;
}

int cmd_compare(const std::string& path, const std::string& objective, const std::string& relax_csv,
                bool snapshot, double tol, const std::string& format, const std::string& out_path) {
    const desos::Feeder feeder = desos::load_feeder(path);
    desos::report::CompareOptions options;
    options.snapshot = snapshot;
    options.solver.tol = tol;
    options.instance_label = path;
    const auto table = desos::report::compare(feeder, desos::objective_from_string(objective),
                                              parse_relax_list(relax_csv), options);
    write_output(format == "json" ? desos::report::to_json(table) : desos::report::to_csv(table),
                 out_path);
    for (const auto& row : table) {
        if (row.status != "optimal") return kExitSolver;
    }
    return kExitOk;
}

int cmd_hull_check(int directions, int samples, std::uint64_t seed, double v_min, double v_max,
                   double v_nom, double s_max, const std::string& out_path) {
    desos::hull::Bounds box;
    box.v_min = v_min;
    box.v_max = v_max;
    box.v_nom = v_nom;
    box.s_max = s_max;
    box.l_max = s_max * s_max / v_nom;
    const desos::hull::BranchHull hull = desos::hull::make_branch_hull(box);
    const desos::hull::SampleSet set =
        desos::hull::support_net(box, static_cast<size_t>(samples), seed);

    std::ostringstream out;
    out << "d_p,d_q,d_l,d_v,hull_support,sample_support,gap\n";
    desos::Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    double max_gap = -desos::conic::kInf;
    double min_gap = desos::conic::kInf;
    char buf[160];
    for (int k = 0; k < directions; ++k) {
        // Random unit direction from independent normals.
        std::array<double, 4> dir{};
        double norm = 0.0;
        for (double& c : dir) {
            const double u1 = rng.uniform();
            const double u2 = rng.uniform();
            c = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300))) *
                std::cos(6.283185307179586 * u2);
            norm += c * c;
        }
        norm = std::sqrt(norm);
        for (double& c : dir) c /= norm;

        const auto gap = desos::hull::support_gap(hull, dir, set);
        max_gap = std::max(max_gap, gap.gap);
        min_gap = std::min(min_gap, gap.gap);
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f,%.9e,%.9e,%.3e\n", dir[0], dir[1],
                      dir[2], dir[3], gap.hull_value, gap.sample_value, gap.gap);
        out << buf;
    }
    write_output(out.str(), out_path);
    std::fprintf(stderr, "hull-check: %d directions, %d samples, gap range [%.3e, %.3e]\n",
                 directions, samples, min_gap, max_gap);
    return max_gap <= 1e-12 ? kExitOk : kExitDomain;
}

int cmd_gen_instance(int buses, double penetration, int horizon, std::uint64_t seed,
                     const std::string& out_path) {
    desos::InstanceSpec spec;
    spec.bus_count = buses;
    spec.pv_penetration = penetration;
    spec.horizon = horizon;
    const desos::Feeder feeder = desos::gen_instance(spec, seed);
    write_output(desos::feeder_to_json_text(feeder), out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desos: convex-relaxation scheduling for radial feeders with storage"};
    app.require_subcommand(1);

    std::string feeder_path, objective = "f2", relax = "ch", relax_csv = "socp,ch";
    std::string format = "csv", out_path = "-", series_path;
    bool snapshot = false;
    double tol = 1e-8;
    int directions = 200, samples = 100000, buses = 9, horizon = 1;
    double penetration = 0.305;
    double v_min = 0.81, v_max = 1.21, v_nom = 1.0, s_max = 1.0;
    std::uint64_t seed = 0;

    auto* validate = app.add_subcommand("validate", "check a feeder file for radial structure");
    validate->add_option("feeder", feeder_path, "feeder JSON file")->required();

    auto* solve = app.add_subcommand("solve", "solve one relaxation and report metrics");
    solve->add_option("feeder", feeder_path)->required();
    solve->add_option("--objective", objective, "f1, f2 or f3")->capture_default_str();
    solve->add_option("--relax", relax, "socp or ch")->capture_default_str();
    solve->add_flag("--snapshot", snapshot, "single-period mode");
    solve->add_option("--tol", tol)->capture_default_str();
    solve->add_option("--format", format, "csv or json")->capture_default_str();
    solve->add_option("--out", out_path)->capture_default_str();
    solve->add_option("--series", series_path, "also write per-period series CSV");

    auto* compare = app.add_subcommand("compare", "compare relaxations on one instance");
    compare->add_option("feeder", feeder_path)->required();
    compare->add_option("--objective", objective)->capture_default_str();
    compare->add_option("--relax", relax_csv, "comma list")->capture_default_str();
    compare->add_flag("--snapshot", snapshot);
    compare->add_option("--tol", tol)->capture_default_str();
    compare->add_option("--format", format)->capture_default_str();
    compare->add_option("--out", out_path)->capture_default_str();

    auto* hull_check = app.add_subcommand("hull-check", "support-function oracle for the hull");
    hull_check->add_option("--directions", directions)->capture_default_str();
    hull_check->add_option("--samples", samples)->capture_default_str();
    hull_check->add_option("--seed", seed)->required();
    hull_check->add_option("--v-min", v_min)->capture_default_str();
    hull_check->add_option("--v-max", v_max)->capture_default_str();
    hull_check->add_option("--v-nom", v_nom)->capture_default_str();
    hull_check->add_option("--s-max", s_max)->capture_default_str();
    hull_check->add_option("--out", out_path)->capture_default_str();

    auto* gen = app.add_subcommand("gen-instance", "write a synthetic radial instance");
    gen->add_option("--buses", buses)->capture_default_str();
    gen->add_option("--penetration", penetration)->capture_default_str();
    gen->add_option("--horizon", horizon, "1 or 24")->capture_default_str();
    gen->add_option("--seed", seed)->required();
    gen->add_option("--out", out_path)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitDomain;
    }

    try {
        if (validate->parsed()) return cmd_validate(feeder_path);
        if (solve->parsed()) {
            return cmd_solve(feeder_path, objective, relax, snapshot, tol, format, out_path,
                             series_path);
        }
        if (compare->parsed()) {
            return cmd_compare(feeder_path, objective, relax_csv, snapshot, tol, format, out_path);
        }
        if (hull_check->parsed()) {
            return cmd_hull_check(directions, samples, seed, v_min, v_max, v_nom, s_max, out_path);
        }
        if (gen->parsed()) return cmd_gen_instance(buses, penetration, horizon, seed, out_path);
    } catch (const desos::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == desos::ErrorKind::solver ? kExitSolver : kExitDomain;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitDomain;
    }
    return kExitOk;
}
