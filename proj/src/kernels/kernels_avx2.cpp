#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>

#include "evio/kernels.hpp"
#include "kernel_common.hpp"

namespace evio::kernels {

namespace {

constexpr int kSeriesTerms = 16;

// Taylor coefficients in t^2 of sin(t)/t, (1-cos t)/t^2 and (t-sin t)/t^3. With 16
// terms the truncation error is below 1e-17 for |t| <= pi, so no small-angle branch.
struct SeriesCoeffs {
  std::array<double, kSeriesTerms> a{}, b{}, c{};
  SeriesCoeffs() {
    double fact = 1.0;  // running n!
    std::array<double, 2 * kSeriesTerms + 4> inv_fact{};
    inv_fact[0] = 1.0;
    for (std::size_t n = 1; n < inv_fact.size(); ++n) {
      fact *= static_cast<double>(n);
      inv_fact[n] = 1.0 / fact;
    }
    for (int k = 0; k < kSeriesTerms; ++k) {
      const double sign = (k % 2 == 0) ? 1.0 : -1.0;
      a[k] = sign * inv_fact[2 * k + 1];
      b[k] = sign * inv_fact[2 * k + 2];
      c[k] = sign * inv_fact[2 * k + 3];
    }
  }
};

const SeriesCoeffs& series() {
  static const SeriesCoeffs s;
  return s;
}

inline __m256d horner(const std::array<double, kSeriesTerms>& coeffs, __m256d t2) {
  __m256d acc = _mm256_set1_pd(coeffs[kSeriesTerms - 1]);
  for (int k = kSeriesTerms - 2; k >= 0; --k) {
    acc = _mm256_add_pd(_mm256_mul_pd(acc, t2), _mm256_set1_pd(coeffs[k]));
  }
  return acc;
}

struct V3 {
  __m256d x, y, z;
};

inline V3 cross(const V3& a, const V3& b) {
  return {_mm256_sub_pd(_mm256_mul_pd(a.y, b.z), _mm256_mul_pd(a.z, b.y)),
          _mm256_sub_pd(_mm256_mul_pd(a.z, b.x), _mm256_mul_pd(a.x, b.z)),
          _mm256_sub_pd(_mm256_mul_pd(a.x, b.y), _mm256_mul_pd(a.y, b.x))};
}

inline V3 axpy(const V3& base, __m256d s, const V3& d) {
  return {_mm256_add_pd(base.x, _mm256_mul_pd(s, d.x)),
          _mm256_add_pd(base.y, _mm256_mul_pd(s, d.y)),
          _mm256_add_pd(base.z, _mm256_mul_pd(s, d.z))};
}

void warp_avx2(const WarpParams& p, const WarpBatch& b) {
  const SeriesCoeffs& sc = series();
  const double phi_sq = p.phi[0] * p.phi[0] + p.phi[1] * p.phi[1] + p.phi[2] * p.phi[2];
  const __m256d fx = _mm256_set1_pd(p.fx), fy = _mm256_set1_pd(p.fy);
  const __m256d cx = _mm256_set1_pd(p.cx), cy = _mm256_set1_pd(p.cy);
  const __m256d ocx = _mm256_set1_pd(p.cx - p.corr_x), ocy = _mm256_set1_pd(p.cy - p.corr_y);
  const __m256d aref = _mm256_set1_pd(p.alpha_ref);
  const __m256d vphi_sq = _mm256_set1_pd(phi_sq);
  const V3 phi{_mm256_set1_pd(p.phi[0]), _mm256_set1_pd(p.phi[1]), _mm256_set1_pd(p.phi[2])};
  const V3 rho{_mm256_set1_pd(p.rho[0]), _mm256_set1_pd(p.rho[1]), _mm256_set1_pd(p.rho[2])};
  const __m256d min_z = _mm256_set1_pd(1e-6);

  std::size_t i = 0;
  for (; i + 4 <= b.n; i += 4) {
    const __m256d d = _mm256_loadu_pd(b.depth + i);
    const __m256d px = _mm256_loadu_pd(b.x + i);
    const __m256d py = _mm256_loadu_pd(b.y + i);
    const __m256d s = _mm256_sub_pd(_mm256_loadu_pd(b.alpha + i), aref);

    const V3 X{_mm256_div_pd(_mm256_mul_pd(d, _mm256_sub_pd(px, cx)), fx),
               _mm256_div_pd(_mm256_mul_pd(d, _mm256_sub_pd(py, cy)), fy), d};
    const __m256d t2 = _mm256_mul_pd(_mm256_mul_pd(s, s), vphi_sq);
    const __m256d A = horner(sc.a, t2);
    const __m256d B = horner(sc.b, t2);
    const __m256d C = horner(sc.c, t2);

    const V3 ph{_mm256_mul_pd(s, phi.x), _mm256_mul_pd(s, phi.y), _mm256_mul_pd(s, phi.z)};
    const V3 rh{_mm256_mul_pd(s, rho.x), _mm256_mul_pd(s, rho.y), _mm256_mul_pd(s, rho.z)};

    // R X = X + A phi x X + B phi x (phi x X);  V rho = rho + B phi x rho + C phi x (phi x rho)
    const V3 pX = cross(ph, X);
    const V3 RX = axpy(axpy(X, A, pX), B, cross(ph, pX));
    const V3 pR = cross(ph, rh);
    const V3 Vr = axpy(axpy(rh, B, pR), C, cross(ph, pR));
    const V3 Xr{_mm256_add_pd(RX.x, Vr.x), _mm256_add_pd(RX.y, Vr.y), _mm256_add_pd(RX.z, Vr.z)};

    const __m256d ok = _mm256_cmp_pd(Xr.z, min_z, _CMP_GT_OQ);
    const __m256d u = _mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(fx, Xr.x), Xr.z), ocx);
    const __m256d v = _mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(fy, Xr.y), Xr.z), ocy);
    _mm256_storeu_pd(b.u + i, _mm256_and_pd(u, ok));
    _mm256_storeu_pd(b.v + i, _mm256_and_pd(v, ok));
    const int mask = _mm256_movemask_pd(ok);
    for (int k = 0; k < 4; ++k) b.valid[i + k] = static_cast<std::uint8_t>((mask >> k) & 1);
  }

  // Tail with the same polynomial form.
  for (; i < b.n; ++i) {
    const double d = b.depth[i];
    const double X[3] = {d * (b.x[i] - p.cx) / p.fx, d * (b.y[i] - p.cy) / p.fy, d};
    const double s = b.alpha[i] - p.alpha_ref;
    const double t2 = s * s * phi_sq;
    auto poly = [&](const std::array<double, kSeriesTerms>& c) {
      double acc = c[kSeriesTerms - 1];
      for (int k = kSeriesTerms - 2; k >= 0; --k) acc = acc * t2 + c[k];
      return acc;
    };
    const double A = poly(sc.a), B = poly(sc.b), C = poly(sc.c);
    const double ph[3] = {s * p.phi[0], s * p.phi[1], s * p.phi[2]};
    const double rh[3] = {s * p.rho[0], s * p.rho[1], s * p.rho[2]};
    auto crs = [](const double* a, const double* c, double* o) {
      o[0] = a[1] * c[2] - a[2] * c[1];
      o[1] = a[2] * c[0] - a[0] * c[2];
      o[2] = a[0] * c[1] - a[1] * c[0];
    };
    double pX[3], ppX[3], pR[3], ppR[3], Xr[3];
    crs(ph, X, pX);
    crs(ph, pX, ppX);
    crs(ph, rh, pR);
    crs(ph, pR, ppR);
    for (int k = 0; k < 3; ++k) {
      Xr[k] = (X[k] + A * pX[k] + B * ppX[k]) + (rh[k] + B * pR[k] + C * ppR[k]);
    }
    if (Xr[2] > 1e-6) {
      b.u[i] = p.fx * Xr[0] / Xr[2] + (p.cx - p.corr_x);
      b.v[i] = p.fy * Xr[1] / Xr[2] + (p.cy - p.corr_y);
      b.valid[i] = 1;
    } else {
      b.u[i] = b.v[i] = 0.0;
      b.valid[i] = 0;
    }
  }
}

void convolve_rows_avx2(const float* src, float* dst, int width, int height,
                        std::span<const float> taps) {
  const int r = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<std::size_t>(y) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    const int lo = std::min(r, width);
    for (int x = 0; x < lo; ++x) out[x] = conv_row_px(row, width, x, taps);
    int x = lo;
    for (; x + 8 <= width - r; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = 0; k <= 2 * r; ++k) {
        const __m256 v = _mm256_loadu_ps(row + x + k - r);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]), v));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) out[x] = conv_row_px(row, width, x, taps);
  }
}

void convolve_cols_avx2(const float* src, float* dst, int width, int height,
                        std::span<const float> taps) {
  const int r = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::size_t>(y) * width;
    int x = 0;
    for (; x + 8 <= width; x += 8) {
      __m256 acc = _mm256_setzero_ps();
      for (int k = 0; k <= 2 * r; ++k) {
        const int yy = clampi(y + k - r, 0, height - 1);
        const __m256 v = _mm256_loadu_ps(src + static_cast<std::size_t>(yy) * width + x);
        acc = _mm256_add_ps(acc, _mm256_mul_ps(_mm256_set1_ps(taps[k]), v));
      }
      _mm256_storeu_ps(out + x, acc);
    }
    for (; x < width; ++x) {
      float acc = 0.0f;
      for (int k = 0; k <= 2 * r; ++k) {
        const int yy = clampi(y + k - r, 0, height - 1);
        acc = acc + taps[k] * src[static_cast<std::size_t>(yy) * width + x];
      }
      out[x] = acc;
    }
  }
}

void sobel_avx2(const float* src, float* gx, float* gy, float* mag, int width, int height) {
  const __m256 two = _mm256_set1_ps(2.0f);
  for (int y = 0; y < height; ++y) {
    const float* up = src + static_cast<std::size_t>(clampi(y - 1, 0, height - 1)) * width;
    const float* mid = src + static_cast<std::size_t>(y) * width;
    const float* dn = src + static_cast<std::size_t>(clampi(y + 1, 0, height - 1)) * width;
    const std::size_t base = static_cast<std::size_t>(y) * width;
    auto edge = [&](int x) {
      float a, b;
      sobel_px(up, mid, dn, width, x, a, b);
      if (gx) gx[base + x] = a;
      if (gy) gy[base + x] = b;
      mag[base + x] = std::sqrt(a * a + b * b);
    };
    if (width < 3) {
      for (int x = 0; x < width; ++x) edge(x);
      continue;
    }
    edge(0);
    int x = 1;
    for (; x + 8 <= width - 1; x += 8) {
      const __m256 ul = _mm256_loadu_ps(up + x - 1), ur = _mm256_loadu_ps(up + x + 1);
      const __m256 ml = _mm256_loadu_ps(mid + x - 1), mr = _mm256_loadu_ps(mid + x + 1);
      const __m256 dl = _mm256_loadu_ps(dn + x - 1), dr = _mm256_loadu_ps(dn + x + 1);
      const __m256 uc = _mm256_loadu_ps(up + x), dc = _mm256_loadu_ps(dn + x);
      const __m256 a = _mm256_add_ps(
          _mm256_add_ps(_mm256_sub_ps(ur, ul), _mm256_mul_ps(two, _mm256_sub_ps(mr, ml))),
          _mm256_sub_ps(dr, dl));
      const __m256 b = _mm256_add_ps(
          _mm256_add_ps(_mm256_sub_ps(dl, ul), _mm256_mul_ps(two, _mm256_sub_ps(dc, uc))),
          _mm256_sub_ps(dr, ur));
      if (gx) _mm256_storeu_ps(gx + base + x, a);
      if (gy) _mm256_storeu_ps(gy + base + x, b);
      _mm256_storeu_ps(mag + base + x,
                       _mm256_sqrt_ps(_mm256_add_ps(_mm256_mul_ps(a, a), _mm256_mul_ps(b, b))));
    }
    for (; x < width; ++x) edge(x);
  }
}

void laplacian_avx2(const float* src, float* dst, int width, int height) {
  const __m256 four = _mm256_set1_ps(4.0f);
  const __m256 sign = _mm256_set1_ps(-0.0f);
  for (int y = 0; y < height; ++y) {
    const float* up = src + static_cast<std::size_t>(clampi(y - 1, 0, height - 1)) * width;
    const float* mid = src + static_cast<std::size_t>(y) * width;
    const float* dn = src + static_cast<std::size_t>(clampi(y + 1, 0, height - 1)) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    if (width < 3) {
      for (int x = 0; x < width; ++x) out[x] = laplacian_px(up, mid, dn, width, x);
      continue;
    }
    out[0] = laplacian_px(up, mid, dn, width, 0);
    int x = 1;
    for (; x + 8 <= width - 1; x += 8) {
      const __m256 s = _mm256_add_ps(
          _mm256_add_ps(_mm256_loadu_ps(up + x), _mm256_loadu_ps(dn + x)),
          _mm256_add_ps(_mm256_loadu_ps(mid + x - 1), _mm256_loadu_ps(mid + x + 1)));
      const __m256 l = _mm256_sub_ps(s, _mm256_mul_ps(four, _mm256_loadu_ps(mid + x)));
      _mm256_storeu_ps(out + x, _mm256_andnot_ps(sign, l));
    }
    for (; x < width; ++x) out[x] = laplacian_px(up, mid, dn, width, x);
  }
}

void min_rows_avx2(const float* src, float* dst, int width, int height, int radius) {
  for (int y = 0; y < height; ++y) {
    const float* row = src + static_cast<std::size_t>(y) * width;
    float* out = dst + static_cast<std::size_t>(y) * width;
    const int lo = std::min(radius, width);
    for (int x = 0; x < lo; ++x) out[x] = min_row_px(row, width, x, radius);
    int x = lo;
    for (; x + 8 <= width - radius; x += 8) {
      __m256 m = _mm256_loadu_ps(row + x - radius);
      for (int k = -radius + 1; k <= radius; ++k) {
        m = _mm256_min_ps(_mm256_loadu_ps(row + x + k), m);
      }
      _mm256_storeu_ps(out + x, m);
    }
    for (; x < width; ++x) out[x] = min_row_px(row, width, x, radius);
  }
}

void min_cols_avx2(const float* src, float* dst, int width, int height, int radius) {
  for (int y = 0; y < height; ++y) {
    float* out = dst + static_cast<std::size_t>(y) * width;
    const float* first = src + static_cast<std::size_t>(clampi(y - radius, 0, height - 1)) * width;
    std::copy(first, first + width, out);
    for (int k = -radius + 1; k <= radius; ++k) {
      const float* row = src + static_cast<std::size_t>(clampi(y + k, 0, height - 1)) * width;
      int x = 0;
      for (; x + 8 <= width; x += 8) {
        _mm256_storeu_ps(out + x, _mm256_min_ps(_mm256_loadu_ps(row + x), _mm256_loadu_ps(out + x)));
      }
      for (; x < width; ++x) out[x] = std::min(out[x], row[x]);
    }
  }
}

void blend_avx2(const float* a, const float* b, float alpha, float beta, float* out,
                std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha), vb = _mm256_set1_ps(beta);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 r = _mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(a + i), va),
                                   _mm256_mul_ps(_mm256_loadu_ps(b + i), vb));
    _mm256_storeu_ps(out + i, r);
  }
  for (; i < n; ++i) out[i] = a[i] * alpha + b[i] * beta;
}

void clamp01_avx2(float* data, std::size_t n) {
  const __m256 zero = _mm256_setzero_ps(), one = _mm256_set1_ps(1.0f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    // Operand order mirrors std::max(v, 0) / std::min(v, 1) so signed zeros match.
    const __m256 v = _mm256_max_ps(zero, _mm256_loadu_ps(data + i));
    _mm256_storeu_ps(data + i, _mm256_min_ps(one, v));
  }
  for (; i < n; ++i) data[i] = std::min(std::max(data[i], 0.0f), 1.0f);
}

}  // namespace

const KernelTable& avx2_table_impl() {
  static const KernelTable table{
      "avx2",         warp_avx2,      convolve_rows_avx2, convolve_cols_avx2,
      sobel_avx2,     laplacian_avx2, min_rows_avx2,      min_cols_avx2,
      blend_avx2,     clamp01_avx2,
  };
  return table;
}

}  // namespace evio::kernels
