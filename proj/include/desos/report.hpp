#pragma once

#include <optional>
#include <string>
#include <vector>

#include "desos/conic.hpp"
#include "desos/distflow.hpp"
#include "desos/feeder.hpp"
#include "desos/types.hpp"

namespace desos::report {

// One relaxation run on one instance, in the shape of the reference
// comparison tables: objective value, the two maximum errors, the 0.001 pu
// exactness verdict, timing and the recovery gap.
struct ExactnessReport {
    std::string instance;
    std::string objective;
    std::string relax;
    std::string status;
    double oov = 0.0;                 // $ for f1, pu otherwise
    double me1 = 0.0;
    std::optional<double> me2;       // empty: no storage on the feeder
    bool exact = false;              // max error < 0.001 pu
    double solve_seconds = 0.0;      // wall time around solve() only
    double recovery_gap = 0.0;
    bool default_bounds = false;     // feeder used fallback voltage bounds
    bool oov_order_ok = true;        // annotation: OOV(ch) >= OOV(socp) - tol
};

constexpr double kExactnessThreshold = 1e-3;  // pu

struct CompareOptions {
    bool snapshot = false;
    conic::Settings solver;
    std::string instance_label;
};

// Solves the instance once per requested relaxation and assembles the
// comparison rows. Solver failures are recorded in the row status, not
// thrown.
std::vector<ExactnessReport> compare(const Feeder& feeder, ObjectiveKind objective,
                                     const std::vector<RelaxKind>& relaxations,
                                     const CompareOptions& options = {});

enum class Format { csv, json };

std::string to_csv(const std::vector<ExactnessReport>& table);
std::string to_json(const std::vector<ExactnessReport>& table);
std::vector<ExactnessReport> reports_from_json(const std::string& text);

// Writes the table to a file, or stdout when path is "-". Byte-stable.
void emit(const std::vector<ExactnessReport>& table, Format format, const std::string& path);

// Tidy per-period series (voltage, flows, storage energy, price) for
// external plotting: columns series,entity,period,value.
std::string series_csv(const Feeder& feeder, const NetworkState& state);

}  // namespace desos::report
