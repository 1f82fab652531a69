#pragma once

// Per-element formulas shared by the scalar reference. The vector variants
// spell out the same operation sequence lane-wise.

#include <cmath>
#include <limits>

#include "corrkit/kernels.hpp"

namespace corrkit::kernels::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double sampson_one(const Mat3& f, double x, double y, double qx, double qy) {
  const double fp0 = f[0] * x + f[1] * y + f[2];
  const double fp1 = f[3] * x + f[4] * y + f[5];
  const double fp2 = f[6] * x + f[7] * y + f[8];
  const double ftq0 = f[0] * qx + f[3] * qy + f[6];
  const double ftq1 = f[1] * qx + f[4] * qy + f[7];
  const double num = qx * fp0 + qy * fp1 + fp2;
  const double den = fp0 * fp0 + fp1 * fp1 + ftq0 * ftq0 + ftq1 * ftq1;
  if (!(den >= 1e-18)) return kInf;
  return (num * num) / den;
}

inline double transfer_one(const Mat3& h, const Mat3& hi, double x, double y, double qx,
                           double qy) {
  const double w = h[6] * x + h[7] * y + h[8];
  const double wi = hi[6] * qx + hi[7] * qy + hi[8];
  if (!(std::fabs(w) > 1e-12) || !(std::fabs(wi) > 1e-12)) return kInf;
  const double dx = (h[0] * x + h[1] * y + h[2]) / w - qx;
  const double dy = (h[3] * x + h[4] * y + h[5]) / w - qy;
  const double ex = (hi[0] * qx + hi[1] * qy + hi[2]) / wi - x;
  const double ey = (hi[3] * qx + hi[4] * qy + hi[5]) / wi - y;
  return (dx * dx + dy * dy) + (ex * ex + ey * ey);
}

inline void reproject_one(const ReprojectParams& p, double u, double v, double d, double& u_out,
                          double& v_out, double& z_out) {
  if (!(d > 0.0)) {
    u_out = 0.0;
    v_out = 0.0;
    z_out = 0.0;
    return;
  }
  const double xa = (u - p.cx_a) * p.inv_fx_a * d;
  const double ya = (v - p.cy_a) * p.inv_fy_a * d;
  const double xb = p.r[0] * xa + p.r[1] * ya + p.r[2] * d + p.t[0];
  const double yb = p.r[3] * xa + p.r[4] * ya + p.r[5] * d + p.t[1];
  const double zb = p.r[6] * xa + p.r[7] * ya + p.r[8] * d + p.t[2];
  if (!(zb > 0.0)) {
    u_out = 0.0;
    v_out = 0.0;
    z_out = zb;
    return;
  }
  u_out = p.fx_b * (xb / zb) + p.cx_b;
  v_out = p.fy_b * (yb / zb) + p.cy_b;
  z_out = zb;
}

inline float reduce8(const float* acc) {
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace corrkit::kernels::detail
