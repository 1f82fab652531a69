#pragma once

// Batched inner loops used by robust fitting, overlap computation and
// descriptor matching. Every kernel has a scalar reference implementation and
// optional vector variants; the active table is picked once at startup from
// the CPU feature set (override with CORRKIT_SIMD=scalar|avx2).
//
// Vector variants perform the same IEEE operations in the same order as the
// scalar reference (no FMA contraction), so results are bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace corrkit::kernels {

// Point pairs in structure-of-arrays layout.
struct PointPairsSoA {
  std::span<const double> xa, ya, xb, yb;
  std::size_t size() const { return xa.size(); }
};

// Row-major 3x3.
using Mat3 = double[9];

// out[i] = Sampson distance (px^2) of pair i under F (q^T F p = 0), +inf when
// the denominator is below 1e-18.
using SampsonFn = void (*)(const Mat3& f, const PointPairsSoA& pts, std::span<double> out);

// out[i] = |H p - q|^2 + |Hinv q - p|^2, +inf when a projective depth has
// magnitude <= 1e-12.
using TransferFn = void (*)(const Mat3& h, const Mat3& h_inv, const PointPairsSoA& pts,
                            std::span<double> out);

// Pinhole reprojection of one image row of A into B.
struct ReprojectParams {
  double inv_fx_a, inv_fy_a, cx_a, cy_a;  // source intrinsics
  Mat3 r;                                  // x_b = r * x_a + t
  double t[3];
  double fx_b, fy_b, cx_b, cy_b;           // target intrinsics
};

// For pixel columns u = 0..n-1 on row v with depths d[u] (> 0), writes target
// pixel coordinates and target depth. Entries with d[u] <= 0 produce z = 0.
using ReprojectFn = void (*)(const ReprojectParams& p, double v, std::span<const float> depth,
                             std::span<double> u_out, std::span<double> v_out,
                             std::span<double> z_out);

// Dot product of two float vectors whose length is a multiple of 8. Summation
// uses eight interleaved partial sums, reduced pairwise.
using DotFn = float (*)(const float* a, const float* b, std::size_t n);

struct KernelTable {
  std::string_view name;
  SampsonFn sampson;
  TransferFn transfer;
  ReprojectFn reproject;
  DotFn dot;
};

const KernelTable& scalar_table();
// nullptr when the build or the CPU lacks AVX2.
const KernelTable* avx2_table();

// Table selected for this process.
const KernelTable& active();

}  // namespace corrkit::kernels
