#include <immintrin.h>

#include "corrkit/kernels.hpp"
#include "kernel_ops.hpp"

namespace corrkit::kernels {
namespace {

inline __m256d bcast(double v) { return _mm256_set1_pd(v); }

inline __m256d abs_pd(__m256d v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }

// a*x + b*y + c, evaluated left to right like the scalar formula.
inline __m256d affine(__m256d a, __m256d x, __m256d b, __m256d y, __m256d c) {
  return _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(a, x), _mm256_mul_pd(b, y)), c);
}

void sampson_avx2(const Mat3& f, const PointPairsSoA& pts, std::span<double> out) {
  const std::size_t n = pts.size();
  const __m256d f0 = bcast(f[0]), f1 = bcast(f[1]), f2 = bcast(f[2]);
  const __m256d f3 = bcast(f[3]), f4 = bcast(f[4]), f5 = bcast(f[5]);
  const __m256d f6 = bcast(f[6]), f7 = bcast(f[7]), f8 = bcast(f[8]);
  const __m256d tiny = bcast(1e-18);
  const __m256d inf = bcast(detail::kInf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(pts.xa.data() + i);
    const __m256d y = _mm256_loadu_pd(pts.ya.data() + i);
    const __m256d qx = _mm256_loadu_pd(pts.xb.data() + i);
    const __m256d qy = _mm256_loadu_pd(pts.yb.data() + i);
    const __m256d fp0 = affine(f0, x, f1, y, f2);
    const __m256d fp1 = affine(f3, x, f4, y, f5);
    const __m256d fp2 = affine(f6, x, f7, y, f8);
    const __m256d ftq0 = affine(f0, qx, f3, qy, f6);
    const __m256d ftq1 = affine(f1, qx, f4, qy, f7);
    const __m256d num = affine(qx, fp0, qy, fp1, fp2);
    __m256d den = _mm256_add_pd(_mm256_mul_pd(fp0, fp0), _mm256_mul_pd(fp1, fp1));
    den = _mm256_add_pd(den, _mm256_mul_pd(ftq0, ftq0));
    den = _mm256_add_pd(den, _mm256_mul_pd(ftq1, ftq1));
    const __m256d ok = _mm256_cmp_pd(den, tiny, _CMP_GE_OQ);
    const __m256d d = _mm256_div_pd(_mm256_mul_pd(num, num), den);
    _mm256_storeu_pd(out.data() + i, _mm256_blendv_pd(inf, d, ok));
  }
  for (; i < n; ++i) {
    out[i] = detail::sampson_one(f, pts.xa[i], pts.ya[i], pts.xb[i], pts.yb[i]);
  }
}

void transfer_avx2(const Mat3& h, const Mat3& hi, const PointPairsSoA& pts,
                   std::span<double> out) {
  const std::size_t n = pts.size();
  __m256d hv[9], iv[9];
  for (int k = 0; k < 9; ++k) {
    hv[k] = bcast(h[k]);
    iv[k] = bcast(hi[k]);
  }
  const __m256d eps = bcast(1e-12);
  const __m256d inf = bcast(detail::kInf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d x = _mm256_loadu_pd(pts.xa.data() + i);
    const __m256d y = _mm256_loadu_pd(pts.ya.data() + i);
    const __m256d qx = _mm256_loadu_pd(pts.xb.data() + i);
    const __m256d qy = _mm256_loadu_pd(pts.yb.data() + i);
    const __m256d w = affine(hv[6], x, hv[7], y, hv[8]);
    const __m256d wi = affine(iv[6], qx, iv[7], qy, iv[8]);
    const __m256d ok = _mm256_and_pd(_mm256_cmp_pd(abs_pd(w), eps, _CMP_GT_OQ),
                                     _mm256_cmp_pd(abs_pd(wi), eps, _CMP_GT_OQ));
    const __m256d dx = _mm256_sub_pd(_mm256_div_pd(affine(hv[0], x, hv[1], y, hv[2]), w), qx);
    const __m256d dy = _mm256_sub_pd(_mm256_div_pd(affine(hv[3], x, hv[4], y, hv[5]), w), qy);
    const __m256d ex = _mm256_sub_pd(_mm256_div_pd(affine(iv[0], qx, iv[1], qy, iv[2]), wi), x);
    const __m256d ey = _mm256_sub_pd(_mm256_div_pd(affine(iv[3], qx, iv[4], qy, iv[5]), wi), y);
    const __m256d fwd = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    const __m256d bwd = _mm256_add_pd(_mm256_mul_pd(ex, ex), _mm256_mul_pd(ey, ey));
    _mm256_storeu_pd(out.data() + i, _mm256_blendv_pd(inf, _mm256_add_pd(fwd, bwd), ok));
  }
  for (; i < n; ++i) {
    out[i] = detail::transfer_one(h, hi, pts.xa[i], pts.ya[i], pts.xb[i], pts.yb[i]);
  }
}

void reproject_avx2(const ReprojectParams& p, double v, std::span<const float> depth,
                    std::span<double> u_out, std::span<double> v_out, std::span<double> z_out) {
  const std::size_t n = depth.size();
  const __m256d zero = _mm256_setzero_pd();
  const __m256d cxa = bcast(p.cx_a), ifx = bcast(p.inv_fx_a);
  const __m256d ya_base = _mm256_mul_pd(_mm256_sub_pd(bcast(v), bcast(p.cy_a)), bcast(p.inv_fy_a));
  __m256d r[9];
  for (int k = 0; k < 9; ++k) r[k] = bcast(p.r[k]);
  const __m256d t0 = bcast(p.t[0]), t1 = bcast(p.t[1]), t2 = bcast(p.t[2]);
  const __m256d fxb = bcast(p.fx_b), fyb = bcast(p.fy_b);
  const __m256d cxb = bcast(p.cx_b), cyb = bcast(p.cy_b);
  const __m256d step = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_cvtps_pd(_mm_loadu_ps(depth.data() + i));
    const __m256d u = _mm256_add_pd(bcast(static_cast<double>(i)), step);
    const __m256d xa = _mm256_mul_pd(_mm256_mul_pd(_mm256_sub_pd(u, cxa), ifx), d);
    const __m256d ya = _mm256_mul_pd(ya_base, d);
    const __m256d xb =
        _mm256_add_pd(affine(r[0], xa, r[1], ya, _mm256_mul_pd(r[2], d)), t0);
    const __m256d yb =
        _mm256_add_pd(affine(r[3], xa, r[4], ya, _mm256_mul_pd(r[5], d)), t1);
    const __m256d zb =
        _mm256_add_pd(affine(r[6], xa, r[7], ya, _mm256_mul_pd(r[8], d)), t2);
    const __m256d valid = _mm256_cmp_pd(d, zero, _CMP_GT_OQ);
    const __m256d front = _mm256_and_pd(valid, _mm256_cmp_pd(zb, zero, _CMP_GT_OQ));
    const __m256d ub = _mm256_add_pd(_mm256_mul_pd(fxb, _mm256_div_pd(xb, zb)), cxb);
    const __m256d vb = _mm256_add_pd(_mm256_mul_pd(fyb, _mm256_div_pd(yb, zb)), cyb);
    _mm256_storeu_pd(u_out.data() + i, _mm256_blendv_pd(zero, ub, front));
    _mm256_storeu_pd(v_out.data() + i, _mm256_blendv_pd(zero, vb, front));
    _mm256_storeu_pd(z_out.data() + i, _mm256_blendv_pd(zero, zb, valid));
  }
  for (; i < n; ++i) {
    detail::reproject_one(p, static_cast<double>(i), v, static_cast<double>(depth[i]), u_out[i],
                          v_out[i], z_out[i]);
  }
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc = _mm256_setzero_ps();
  for (std::size_t i = 0; i < n; i += 8) {
    acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  alignas(32) float lanes[8];
  _mm256_store_ps(lanes, acc);
  return detail::reduce8(lanes);
}

const KernelTable kAvx2{"avx2", &sampson_avx2, &transfer_avx2, &reproject_avx2, &dot_avx2};

}  // namespace

namespace detail {
const KernelTable* avx2_table_impl() { return &kAvx2; }
}  // namespace detail

}  // namespace corrkit::kernels
