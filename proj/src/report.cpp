#include "desos/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "desos/problem.hpp"

namespace desos::report {

namespace {

// Scientific with 6 significant digits, the table float format.
std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.5e", v);
    return buf;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::vector<ExactnessReport> compare(const Feeder& input, ObjectiveKind objective,
                                     const std::vector<RelaxKind>& relaxations,
                                     const CompareOptions& options) {
    if (relaxations.empty()) {
        fail(ErrorKind::validation, "compare: at least one relaxation required");
    }
    const Feeder feeder = options.snapshot ? snapshot_feeder(input) : input;

    std::vector<ExactnessReport> table;
    double socp_oov = std::numeric_limits<double>::quiet_NaN();
    for (RelaxKind relax : relaxations) {
        ExactnessReport row;
        row.instance = options.instance_label.empty() ? "feeder" : options.instance_label;
        row.objective = to_string(objective);
        row.relax = to_string(relax);
        row.default_bounds = feeder.default_bounds_used;
        try {
            opt::BuiltProblem built = opt::build_problem(feeder, objective, relax, false);
            const conic::Solution sol = conic::solve(built.problem, options.solver);
            row.status = conic::to_string(sol.status);
            row.solve_seconds = sol.solve_seconds;
            if (sol.status == conic::SolveStatus::optimal ||
                sol.status == conic::SolveStatus::iteration_limit) {
                const NetworkState state = opt::extract_state(sol, built.vars, feeder);
                row.oov = sol.objective;
                row.me1 = distflow::me_branch(feeder, state);
                if (auto me2 = distflow::me_des(feeder, state)) row.me2 = *me2;
                const double worst = std::max(row.me1, row.me2.value_or(0.0));
                row.exact = worst < kExactnessThreshold;
                const auto recovery =
                    distflow::recover_feasible(feeder, state, objective, sol.objective);
                row.recovery_gap = recovery.gap;
            }
        } catch (const Error& e) {
            row.status = std::string("error: ") + e.what();
        }
        if (relax == RelaxKind::socp) socp_oov = row.oov;
        table.push_back(std::move(row));
    }
    // Feasible-set containment annotation: the cut relaxation cannot beat the
    // cone-only bound on a minimization (up to solver noise at the objective
    // scale).
    if (std::isfinite(socp_oov)) {
        const double order_tol = 1e-6 * std::max(1.0, std::abs(socp_oov));
        for (ExactnessReport& row : table) {
            if (row.relax == "ch" && row.status == "optimal") {
                row.oov_order_ok = row.oov >= socp_oov - order_tol;
            }
        }
    }
    return table;
}

std::string to_csv(const std::vector<ExactnessReport>& table) {
    std::ostringstream out;
    out << "instance,objective,relax,status,oov,me1,me2,exact,cpu_s,recovery_gap,default_bounds,"
           "oov_order_ok\n";
    for (const ExactnessReport& r : table) {
        out << r.instance << ',' << r.objective << ',' << r.relax << ',' << r.status << ','
            << sci(r.oov) << ',' << sci(r.me1) << ',' << (r.me2 ? sci(*r.me2) : std::string("n/a"))
            << ',' << (r.exact ? "yes" : "no") << ',' << fixed2(r.solve_seconds) << ','
            << sci(r.recovery_gap) << ',' << (r.default_bounds ? "yes" : "no") << ','
            << (r.oov_order_ok ? "yes" : "no") << "\n";
    }
    return out.str();
}

std::string to_json(const std::vector<ExactnessReport>& table) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const ExactnessReport& r : table) {
        nlohmann::ordered_json row;
        row["instance"] = r.instance;
        row["objective"] = r.objective;
        row["relax"] = r.relax;
        row["status"] = r.status;
        row["oov"] = sci(r.oov);
        row["me1"] = sci(r.me1);
        if (r.me2) {
            row["me2"] = sci(*r.me2);
        } else {
            row["me2"] = nullptr;
        }
        row["exact"] = r.exact;
        row["cpu_s"] = fixed2(r.solve_seconds);
        row["recovery_gap"] = sci(r.recovery_gap);
        row["default_bounds"] = r.default_bounds;
        row["oov_order_ok"] = r.oov_order_ok;
        arr.push_back(std::move(row));
    }
    return arr.dump(2) + "\n";
}

std::vector<ExactnessReport> reports_from_json(const std::string& text) {
    nlohmann::ordered_json arr;
    try {
        arr = nlohmann::ordered_json::parse(text);
    } catch (const std::exception& e) {
        fail(ErrorKind::parse, std::string("report parse error: ") + e.what());
    }
    std::vector<ExactnessReport> table;
    for (const auto& row : arr) {
        ExactnessReport r;
        r.instance = row.at("instance").get<std::string>();
        r.objective = row.at("objective").get<std::string>();
        r.relax = row.at("relax").get<std::string>();
        r.status = row.at("status").get<std::string>();
        r.oov = std::stod(row.at("oov").get<std::string>());
        r.me1 = std::stod(row.at("me1").get<std::string>());
        if (!row.at("me2").is_null()) r.me2 = std::stod(row.at("me2").get<std::string>());
        r.exact = row.at("exact").get<bool>();
        r.solve_seconds = std::stod(row.at("cpu_s").get<std::string>());
        r.recovery_gap = std::stod(row.at("recovery_gap").get<std::string>());
        r.default_bounds = row.at("default_bounds").get<bool>();
        r.oov_order_ok = row.at("oov_order_ok").get<bool>();
        table.push_back(std::move(r));
    }
    return table;
}

void emit(const std::vector<ExactnessReport>& table, Format format, const std::string& path) {
    if (table.empty()) fail(ErrorKind::validation, "emit: empty table");
    const std::string text = format == Format::csv ? to_csv(table) : to_json(table);
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) fail(ErrorKind::io, "cannot write report file: " + path);
    out << text;
}

std::string series_csv(const Feeder& feeder, const NetworkState& state) {
    std::ostringstream out;
    out << "series,entity,period,value\n";
    for (int t = 0; t < state.horizon; ++t) {
        const size_t ts = static_cast<size_t>(t);
        for (int i = 0; i < feeder.num_buses(); ++i) {
            out << "v," << feeder.buses[static_cast<size_t>(i)].id << ',' << t << ','
                << sci(state.v[static_cast<size_t>(i)][ts]) << "\n";
        }
        out << "p_grid,1," << t << ',' << sci(state.p_grid[ts]) << "\n";
        out << "price,1," << t << ',' << sci(feeder.profiles.price.size() > ts ? feeder.profiles.price[ts] : 0.0) << "\n";
        for (int d = 0; d < feeder.num_des(); ++d) {
            const size_t ds = static_cast<size_t>(d);
            out << "p_des," << feeder.des_units[ds].bus << ',' << t << ',' << sci(state.p_des[ds][ts]) << "\n";
        }
    }
    // Stored-energy trajectories.
    for (int d = 0; d < feeder.num_des(); ++d) {
        const size_t ds = static_cast<size_t>(d);
        double energy = feeder.des_units[ds].e_surplus;
        for (int t = 0; t < state.horizon; ++t) {
            const size_t ts = static_cast<size_t>(t);
            energy -= (state.p_des[ds][ts] + state.p_loss[ds][ts]) * feeder.profiles.dt;
            out << "energy," << feeder.des_units[ds].bus << ',' << t << ',' << sci(energy) << "\n";
        }
    }
    return out.str();
}

}  // namespace desos::report
