#pragma once

// Data-parallel inner loops. Every routine has a scalar reference implementation and,
// where the CPU supports it, an AVX2 variant selected at runtime. The image kernels
// evaluate the same operations in the same order in every variant, so their outputs
// are bit-identical; the event warp uses a polynomial form of the SE(3) exponential in
// the SIMD path and agrees with the reference to ~1e-12 relative to the pixel coordinate.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace evio::kernels {

/// Reference-from-event transform for event i is exp((alpha[i] - alpha_ref) * xi).
struct WarpParams {
  double rho[3] = {0, 0, 0};
  double phi[3] = {0, 0, 0};
  double alpha_ref = 0.0;
  double fx = 1, fy = 1, cx = 0, cy = 0;
  double corr_x = 0, corr_y = 0;
};

struct WarpBatch {
  const double* x = nullptr;
  const double* y = nullptr;
  const double* alpha = nullptr;
  const double* depth = nullptr;
  double* u = nullptr;
  double* v = nullptr;
  std::uint8_t* valid = nullptr;  // 1 when the warped point is in front of the camera
  std::size_t n = 0;
};

struct KernelTable {
  std::string_view name;

  /// Pinhole back-project, rigid transform, project, subtract correction.
  void (*warp)(const WarpParams& params, const WarpBatch& batch);

  /// Horizontal / vertical correlation with `taps` (odd length), replicate border.
  void (*convolve_rows)(const float* src, float* dst, int width, int height,
                        std::span<const float> taps);
  void (*convolve_cols)(const float* src, float* dst, int width, int height,
                        std::span<const float> taps);

  /// 3x3 Sobel with replicate border. gx / gy may be null.
  void (*sobel)(const float* src, float* gx, float* gy, float* magnitude, int width,
                int height);
  /// |4-neighbour Laplacian| with replicate border.
  void (*laplacian_abs)(const float* src, float* dst, int width, int height);

  /// Running minimum over 2*radius+1 samples along rows / columns, replicate border.
  void (*min_rows)(const float* src, float* dst, int width, int height, int radius);
  void (*min_cols)(const float* src, float* dst, int width, int height, int radius);

  /// out = a * alpha + b * beta
  void (*blend)(const float* a, const float* b, float alpha, float beta, float* out,
                std::size_t n);
  /// Clamp to [0, 1] in place.
  void (*clamp01)(float* data, std::size_t n);
};

const KernelTable& scalar_kernels();
/// Null when not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels();

/// Kernels used by the library. Defaults to the best supported variant; the
/// EVIO_SIMD environment variable ("scalar" or "avx2") overrides the choice.
const KernelTable& active();
/// Force a variant ("scalar", "avx2", "auto"). Returns false if unavailable.
bool select(std::string_view name);

}  // namespace evio::kernels
