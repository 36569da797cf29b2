#pragma once

#include <string>

#include "desos/errors.hpp"

namespace desos {

// Scheduling objectives: grid energy cost, total losses, voltage deviation.
enum class ObjectiveKind { f1, f2, f3 };

// Relaxation of the quadratic branch equation: plain second-order cone, or
// cone plus the convex-hull cuts.
enum class RelaxKind { socp, ch };

inline const char* to_string(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::f1: return "f1";
        case ObjectiveKind::f2: return "f2";
        case ObjectiveKind::f3: return "f3";
    }
    return "?";
}

inline const char* to_string(RelaxKind k) {
    return k == RelaxKind::socp ? "socp" : "ch";
}

inline ObjectiveKind objective_from_string(const std::string& s) {
    if (s == "f1") return ObjectiveKind::f1;
    if (s == "f2") return ObjectiveKind::f2;
    if (s == "f3") return ObjectiveKind::f3;
    fail(ErrorKind::validation, "unknown objective '" + s + "' (expected f1, f2 or f3)");
}

inline RelaxKind relax_from_string(const std::string& s) {
    if (s == "socp") return RelaxKind::socp;
    if (s == "ch") return RelaxKind::ch;
    fail(ErrorKind::validation, "unknown relaxation '" + s + "' (expected socp or ch)");
}

}  // namespace desos
