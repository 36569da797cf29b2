#include "desos/kernels.hpp"

#include <algorithm>
#include <limits>

// Scalar reference kernels. These are the semantic definition; the SIMD
// variants must produce bit-identical results (the whole file family is
// compiled with -ffp-contract=off so the compiler cannot fuse differently
// per translation unit).

namespace desos::kernels {

namespace {

void quad_residual_scalar(const double* p, const double* q, const double* l, const double* v,
                          double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = v[i] * l[i] - p[i] * p[i] - q[i] * q[i];
    }
}

double min_dot4_scalar(double d0, double d1, double d2, double d3, const double* p,
                       const double* q, const double* l, const double* v, std::size_t n) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double dot = d0 * p[i] + d1 * q[i] + d2 * l[i] + d3 * v[i];
        best = std::min(best, dot);
    }
    return best;
}

BranchViolation branch_violation_scalar(const double* p, const double* q, const double* l,
                                        const double* v, std::size_t n,
                                        const BranchHullCoef& c) {
    BranchViolation worst;
    worst.cone = worst.cut = worst.box = -std::numeric_limits<double>::infinity();
    if (n == 0) return BranchViolation{};
    for (std::size_t i = 0; i < n; ++i) {
        const double pq2 = p[i] * p[i] + q[i] * q[i];
        worst.cone = std::max(worst.cone, pq2 - l[i] * v[i]);
        worst.cut = std::max(worst.cut, c.v_max * l[i] + c.l_max * v[i] - c.cut_rhs);
        double box = -l[i];
        box = std::max(box, l[i] - c.l_max);
        box = std::max(box, c.v_min - v[i]);
        box = std::max(box, v[i] - c.v_max);
        box = std::max(box, pq2 - c.s_max2);
        worst.box = std::max(worst.box, box);
    }
    return worst;
}

DesViolation des_violation_scalar(const double* p, const double* q, const double* pl,
                                  const double* v, std::size_t n, const DesCutCoef& c) {
    DesViolation worst;
    worst.c1 = worst.c2 = worst.c3 = -std::numeric_limits<double>::infinity();
    if (n == 0) return DesViolation{};
    for (std::size_t i = 0; i < n; ++i) {
        worst.c1 = std::max(worst.c1, c.r_eq * (p[i] * p[i]) + c.r_cvt * (q[i] * q[i]) - pl[i] * v[i]);
        worst.c2 = std::max(worst.c2, c.r_batt * (q[i] * q[i]) + c.v_min * pl[i] - c.c2_rhs);
        worst.c3 = std::max(worst.c3, c.c3_pl * pl[i] + c.c3_v * v[i] - c.c3_rhs);
    }
    return worst;
}

}  // namespace

const Backend& scalar_backend() {
    static const Backend backend{
        "scalar",
        quad_residual_scalar,
        min_dot4_scalar,
        branch_violation_scalar,
        des_violation_scalar,
    };
    return backend;
}

const Backend& active_backend() {
#if defined(DESOS_HAVE_AVX2)
    static const Backend* chosen = __builtin_cpu_supports("avx2")
                                       ? &avx2_backend()
                                       : &scalar_backend();
    return *chosen;
#else
    return scalar_backend();
#endif
}

std::vector<const Backend*> all_backends() {
    std::vector<const Backend*> out{&scalar_backend()};
#if defined(DESOS_HAVE_AVX2)
    if (__builtin_cpu_supports("avx2")) {
        out.push_back(&avx2_backend());
    }
#endif
    return out;
}

}  // namespace desos::kernels
