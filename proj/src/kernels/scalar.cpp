#include <cmath>
#include <limits>

#include "corrkit/kernels.hpp"
#include "kernel_ops.hpp"

namespace corrkit::kernels {
namespace {

void sampson_scalar(const Mat3& f, const PointPairsSoA& pts, std::span<double> out) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = detail::sampson_one(f, pts.xa[i], pts.ya[i], pts.xb[i], pts.yb[i]);
  }
}

void transfer_scalar(const Mat3& h, const Mat3& h_inv, const PointPairsSoA& pts,
                     std::span<double> out) {
  const std::size_t n = pts.size();
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = detail::transfer_one(h, h_inv, pts.xa[i], pts.ya[i], pts.xb[i], pts.yb[i]);
  }
}

void reproject_scalar(const ReprojectParams& p, double v, std::span<const float> depth,
                      std::span<double> u_out, std::span<double> v_out, std::span<double> z_out) {
  const std::size_t n = depth.size();
  for (std::size_t i = 0; i < n; ++i) {
    detail::reproject_one(p, static_cast<double>(i), v, static_cast<double>(depth[i]), u_out[i],
                          v_out[i], z_out[i]);
  }
}

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (std::size_t i = 0; i < n; i += 8) {
    for (std::size_t k = 0; k < 8; ++k) {
      acc[k] = acc[k] + a[i + k] * b[i + k];
    }
  }
  return detail::reduce8(acc);
}

const KernelTable kScalar{"scalar", &sampson_scalar, &transfer_scalar, &reproject_scalar,
                          &dot_scalar};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace corrkit::kernels
