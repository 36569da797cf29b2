#include "desos/kernels.hpp"

#if defined(DESOS_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <limits>

// AVX2 variants of the batch kernels. Multiplies and adds are kept in the
// same order as the scalar reference and FMA contraction is disabled, so the
// lane results are bit-identical to scalar; min/max reductions are exact
// regardless of order.

namespace desos::kernels {

namespace {

inline double hmin(__m256d x) {
    const __m128d lo = _mm256_castpd256_pd128(x);
    const __m128d hi = _mm256_extractf128_pd(x, 1);
    const __m128d m2 = _mm_min_pd(lo, hi);
    const __m128d m1 = _mm_min_sd(m2, _mm_unpackhi_pd(m2, m2));
    return _mm_cvtsd_f64(m1);
}

inline double hmax(__m256d x) {
    const __m128d lo = _mm256_castpd256_pd128(x);
    const __m128d hi = _mm256_extractf128_pd(x, 1);
    const __m128d m2 = _mm_max_pd(lo, hi);
    const __m128d m1 = _mm_max_sd(m2, _mm_unpackhi_pd(m2, m2));
    return _mm_cvtsd_f64(m1);
}

void quad_residual_avx2(const double* p, const double* q, const double* l, const double* v,
                        double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vp = _mm256_loadu_pd(p + i);
        const __m256d vq = _mm256_loadu_pd(q + i);
        const __m256d vl = _mm256_loadu_pd(l + i);
        const __m256d vv = _mm256_loadu_pd(v + i);
        const __m256d r = _mm256_sub_pd(
            _mm256_sub_pd(_mm256_mul_pd(vv, vl), _mm256_mul_pd(vp, vp)),
            _mm256_mul_pd(vq, vq));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i) {
        out[i] = v[i] * l[i] - p[i] * p[i] - q[i] * q[i];
    }
}

double min_dot4_avx2(double d0, double d1, double d2, double d3, const double* p,
                     const double* q, const double* l, const double* v, std::size_t n) {
    const __m256d c0 = _mm256_set1_pd(d0);
    const __m256d c1 = _mm256_set1_pd(d1);
    const __m256d c2 = _mm256_set1_pd(d2);
    const __m256d c3 = _mm256_set1_pd(d3);
    __m256d best = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d dot = _mm256_mul_pd(c0, _mm256_loadu_pd(p + i));
        dot = _mm256_add_pd(dot, _mm256_mul_pd(c1, _mm256_loadu_pd(q + i)));
        dot = _mm256_add_pd(dot, _mm256_mul_pd(c2, _mm256_loadu_pd(l + i)));
        dot = _mm256_add_pd(dot, _mm256_mul_pd(c3, _mm256_loadu_pd(v + i)));
        best = _mm256_min_pd(best, dot);
    }
    double out = hmin(best);
    for (; i < n; ++i) {
        const double dot = d0 * p[i] + d1 * q[i] + d2 * l[i] + d3 * v[i];
        out = std::min(out, dot);
    }
    return out;
}

BranchViolation branch_violation_avx2(const double* p, const double* q, const double* l,
                                      const double* v, std::size_t n, const BranchHullCoef& c) {
    if (n == 0) return BranchViolation{};
    const __m256d ninf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    const __m256d vmax = _mm256_set1_pd(c.v_max);
    const __m256d vmin = _mm256_set1_pd(c.v_min);
    const __m256d lmax = _mm256_set1_pd(c.l_max);
    const __m256d smax2 = _mm256_set1_pd(c.s_max2);
    const __m256d cutrhs = _mm256_set1_pd(c.cut_rhs);
    __m256d cone = ninf, cut = ninf, box = ninf;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vp = _mm256_loadu_pd(p + i);
        const __m256d vq = _mm256_loadu_pd(q + i);
        const __m256d vl = _mm256_loadu_pd(l + i);
        const __m256d vv = _mm256_loadu_pd(v + i);
        const __m256d pq2 = _mm256_add_pd(_mm256_mul_pd(vp, vp), _mm256_mul_pd(vq, vq));
        cone = _mm256_max_pd(cone, _mm256_sub_pd(pq2, _mm256_mul_pd(vl, vv)));
        cut = _mm256_max_pd(
            cut, _mm256_sub_pd(
                     _mm256_add_pd(_mm256_mul_pd(vmax, vl), _mm256_mul_pd(lmax, vv)), cutrhs));
        __m256d b = _mm256_sub_pd(_mm256_setzero_pd(), vl);
        b = _mm256_max_pd(b, _mm256_sub_pd(vl, lmax));
        b = _mm256_max_pd(b, _mm256_sub_pd(vmin, vv));
        b = _mm256_max_pd(b, _mm256_sub_pd(vv, vmax));
        b = _mm256_max_pd(b, _mm256_sub_pd(pq2, smax2));
        box = _mm256_max_pd(box, b);
    }
    BranchViolation worst;
    worst.cone = hmax(cone);
    worst.cut = hmax(cut);
    worst.box = hmax(box);
    for (; i < n; ++i) {
        const double pq2 = p[i] * p[i] + q[i] * q[i];
        worst.cone = std::max(worst.cone, pq2 - l[i] * v[i]);
        worst.cut = std::max(worst.cut, c.v_max * l[i] + c.l_max * v[i] - c.cut_rhs);
        double b = -l[i];
        b = std::max(b, l[i] - c.l_max);
        b = std::max(b, c.v_min - v[i]);
        b = std::max(b, v[i] - c.v_max);
        b = std::max(b, pq2 - c.s_max2);
        worst.box = std::max(worst.box, b);
    }
    return worst;
}

DesViolation des_violation_avx2(const double* p, const double* q, const double* pl,
                                const double* v, std::size_t n, const DesCutCoef& c) {
    if (n == 0) return DesViolation{};
    const __m256d ninf = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    const __m256d req = _mm256_set1_pd(c.r_eq);
    const __m256d rcvt = _mm256_set1_pd(c.r_cvt);
    const __m256d rbatt = _mm256_set1_pd(c.r_batt);
    const __m256d vmin = _mm256_set1_pd(c.v_min);
    const __m256d c2rhs = _mm256_set1_pd(c.c2_rhs);
    const __m256d c3pl = _mm256_set1_pd(c.c3_pl);
    const __m256d c3v = _mm256_set1_pd(c.c3_v);
    const __m256d c3rhs = _mm256_set1_pd(c.c3_rhs);
    __m256d w1 = ninf, w2 = ninf, w3 = ninf;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vp = _mm256_loadu_pd(p + i);
        const __m256d vq = _mm256_loadu_pd(q + i);
        const __m256d vpl = _mm256_loadu_pd(pl + i);
        const __m256d vv = _mm256_loadu_pd(v + i);
        const __m256d p2 = _mm256_mul_pd(vp, vp);
        const __m256d q2 = _mm256_mul_pd(vq, vq);
        w1 = _mm256_max_pd(
            w1, _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(req, p2), _mm256_mul_pd(rcvt, q2)),
                              _mm256_mul_pd(vpl, vv)));
        w2 = _mm256_max_pd(
            w2, _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(rbatt, q2), _mm256_mul_pd(vmin, vpl)),
                              c2rhs));
        w3 = _mm256_max_pd(
            w3, _mm256_sub_pd(_mm256_add_pd(_mm256_mul_pd(c3pl, vpl), _mm256_mul_pd(c3v, vv)),
                              c3rhs));
    }
    DesViolation worst;
    worst.c1 = hmax(w1);
    worst.c2 = hmax(w2);
    worst.c3 = hmax(w3);
    for (; i < n; ++i) {
        worst.c1 = std::max(worst.c1, c.r_eq * (p[i] * p[i]) + c.r_cvt * (q[i] * q[i]) - pl[i] * v[i]);
        worst.c2 = std::max(worst.c2, c.r_batt * (q[i] * q[i]) + c.v_min * pl[i] - c.c2_rhs);
        worst.c3 = std::max(worst.c3, c.c3_pl * pl[i] + c.c3_v * v[i] - c.c3_rhs);
    }
    return worst;
}

}  // namespace

const Backend& avx2_backend() {
    static const Backend backend{
        "avx2",
        quad_residual_avx2,
        min_dot4_avx2,
        branch_violation_avx2,
        des_violation_avx2,
    };
    return backend;
}

}  // namespace desos::kernels

#endif  // DESOS_HAVE_AVX2
