#pragma once

// Per-pixel helpers shared by the scalar and SIMD translation units. Internal linkage
// keeps the copies compiled with different ISA flags apart.

#include <algorithm>
#include <cmath>
#include <span>

namespace evio::kernels {
namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

inline float conv_row_px(const float* row, int width, int x, std::span<const float> taps) {
  const int r = static_cast<int>(taps.size() / 2);
  float acc = 0.0f;
  for (int k = 0; k <= 2 * r; ++k) {
    acc = acc + taps[k] * row[clampi(x + k - r, 0, width - 1)];
  }
  return acc;
}

// Neighbour rows are already clamped by the caller.
inline void sobel_px(const float* up, const float* mid, const float* dn, int width, int x,
                     float& gx, float& gy) {
  const int xl = clampi(x - 1, 0, width - 1);
  const int xr = clampi(x + 1, 0, width - 1);
  gx = ((up[xr] - up[xl]) + 2.0f * (mid[xr] - mid[xl])) + (dn[xr] - dn[xl]);
  gy = ((dn[xl] - up[xl]) + 2.0f * (dn[x] - up[x])) + (dn[xr] - up[xr]);
}

inline float laplacian_px(const float* up, const float* mid, const float* dn, int width, int x) {
  const int xl = clampi(x - 1, 0, width - 1);
  const int xr = clampi(x + 1, 0, width - 1);
  return std::fabs(((up[x] + dn[x]) + (mid[xl] + mid[xr])) - 4.0f * mid[x]);
}

inline float min_row_px(const float* row, int width, int x, int radius) {
  float m = row[clampi(x - radius, 0, width - 1)];
  for (int k = -radius + 1; k <= radius; ++k) m = std::min(m, row[clampi(x + k, 0, width - 1)]);
  return m;
}

}  // namespace
}  // namespace evio::kernels
