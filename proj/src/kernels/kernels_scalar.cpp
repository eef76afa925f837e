#include <algorithm>
#include <cmath>

#include "evio/geometry.hpp"
#include "evio/kernels.hpp"
#include "kernel_common.hpp"

namespace evio::kernels {

namespace {

void warp_scalar(const WarpParams& p, const WarpBatch& b) {
  const Twist unit{Vec3(p.rho[0], p.rho[1], p.rho[2]), Vec3(p.phi[0], p.phi[1], p.phi[2])};
  for (std::size_t i = 0; i < b.n; ++i) {
    const double d = b.depth[i];
    const Vec3 X(d * (b.x[i] - p.cx) / p.fx, d * (b.y[i] - p.cy) / p.fy, d);
    const double s = b.alpha[i] - p.alpha_ref;
    const Vec3 Xr = s == 0.0 ? X : se3_exp(unit * s) * X;
    if (Xr.z() > 1e-6) {
      b.u[i] = p.fx * Xr.x() / Xr.z() + p.cx - p.corr_x;
      b.v[i] = p.fy * Xr.y() / Xr.z() + p.cy - p.corr_y;
      b.valid[i] = 1;
    } else {
      b.u[i] = b.v[i] = 0.0;
      b.valid[i] = 0;
    }
  }
}

void convolve_rows_scalar(const float* src, float* dst, int width, int height,
                          std::span<const float> taps) {
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<std::size_t>(y) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) out[x] = conv_row_px(row, width, x, taps);
  }
}

void convolve_cols_scalar(const float* src, float* dst, int width, int height,
                          std::span<const float> taps) {
  const int r = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      float acc = 0.0f;
      for (int k = 0; k <= 2 * r; ++k) {
        const int yy = clampi(y + k - r, 0, height - 1);
        acc = acc + taps[k] * src[static_cast<std::size_t>(yy) * width + x];
      }
      out[x] = acc;
    }
  }
}

void sobel_scalar(const float* src, float* gx, float* gy, float* mag, int width, int height) {
  for (int y = 0; y < height; ++y) {
    const float* up = src + static_cast<std::size_t>(clampi(y - 1, 0, height - 1)) * width;
    const float* mid = src + static_cast<std::size_t>(y) * width;
    const float* dn = src + static_cast<std::size_t>(clampi(y + 1, 0, height - 1)) * width;
    const std::size_t base = static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      float a, b;
      sobel_px(up, mid, dn, width, x, a, b);
      if (gx) gx[base + x] = a;
      if (gy) gy[base + x] = b;
      mag[base + x] = std::sqrt(a * a + b * b);
    }
  }
}

void laplacian_scalar(const float* src, float* dst, int width, int height) {
  for (int y = 0; y < height; ++y) {
    const float* up = src + static_cast<std::size_t>(clampi(y - 1, 0, height - 1)) * width;
    const float* mid = src + static_cast<std::size_t>(y) * width;
    const float* dn = src + static_cast<std::size_t>(clampi(y + 1, 0, height - 1)) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) out[x] = laplacian_px(up, mid, dn, width, x);
  }
}

void min_rows_scalar(const float* src, float* dst, int width, int height, int radius) {
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<std::size_t>(y) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) out[x] = min_row_px(row, width, x, radius);
  }
}

void min_cols_scalar(const float* src, float* dst, int width, int height, int radius) {
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::size_t>(y) * width;
    const float* first = src + static_cast<std::size_t>(clampi(y - radius, 0, height - 1)) * width;
    std::copy(first, first + width, out);
    for (int k = -radius + 1; k <= radius; ++k) {
      const float* row = src + static_cast<std::size_t>(clampi(y + k, 0, height - 1)) * width;
      for (int x = 0; x < width; ++x) out[x] = std::min(out[x], row[x]);
    }
  }
}

void blend_scalar(const float* a, const float* b, float alpha, float beta, float* out,
                  std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * alpha + b[i] * beta;
}

void clamp01_scalar(float* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) data[i] = std::min(std::max(data[i], 0.0f), 1.0f);
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar",         warp_scalar,      convolve_rows_scalar, convolve_cols_scalar,
      sobel_scalar,     laplacian_scalar, min_rows_scalar,      min_cols_scalar,
      blend_scalar,     clamp01_scalar,
  };
  return table;
}

}  // namespace evio::kernels
