#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace desos::kernels {

// Constraint coefficients consumed by the batch evaluators. Stored flat so a
// kernel touches no pointers besides the four data arrays.
struct BranchHullCoef {
    double v_min = 0.81;
    double v_max = 1.21;
    double s_max2 = 1.0;  // thermal limit squared
    double l_max = 1.0;
    double cut_rhs = 0.0;  // l_max * (v_max + v_nom)
};

struct DesCutCoef {
    double r_eq = 0.0;
    double r_cvt = 0.0;
    double r_batt = 0.0;
    double v_min = 0.81;
    double c2_rhs = 0.0;  // r_eq * s_max^2
    double c3_pl = 0.0;   // v_min * v_max
    double c3_v = 0.0;    // r_eq * s_max^2
    double c3_rhs = 0.0;  // r_eq * s_max^2 * (v_min + v_max)
};

// Per-family maxima of signed constraint violations over a point batch.
struct BranchViolation {
    double cone = 0.0;  // max of p^2 + q^2 - l*v
    double cut = 0.0;   // max of v_max*l + l_max*v - cut_rhs
    double box = 0.0;   // max violation of 0<=l<=l_max, v_min<=v<=v_max, p^2+q^2<=s_max^2
};

struct DesViolation {
    double c1 = 0.0;  // max of r_eq*p^2 + r_cvt*q^2 - p_loss*v
    double c2 = 0.0;  // max of r_batt*q^2 + v_min*p_loss - c2_rhs
    double c3 = 0.0;  // max of c3_pl*p_loss + c3_v*v - c3_rhs
};

// One implementation of the batch kernels. All arrays have length n and may
// be unaligned; n == 0 is allowed.
struct Backend {
    std::string_view name;

    // out[i] = v[i]*l[i] - p[i]^2 - q[i]^2
    void (*quad_residual)(const double* p, const double* q, const double* l, const double* v,
                          double* out, std::size_t n);

    // min over i of d0*p[i] + d1*q[i] + d2*l[i] + d3*v[i]
    double (*min_dot4)(double d0, double d1, double d2, double d3, const double* p,
                       const double* q, const double* l, const double* v, std::size_t n);

    BranchViolation (*branch_violation)(const double* p, const double* q, const double* l,
                                        const double* v, std::size_t n, const BranchHullCoef& c);

    DesViolation (*des_violation)(const double* p, const double* q, const double* pl,
                                  const double* v, std::size_t n, const DesCutCoef& c);
};

const Backend& scalar_backend();

#if defined(DESOS_HAVE_AVX2)
const Backend& avx2_backend();
#endif

// Picks the widest implementation the running CPU supports. Resolved once.
const Backend& active_backend();

// Every backend compiled into this binary (for equivalence tests).
std::vector<const Backend*> all_backends();

}  // namespace desos::kernels
