#pragma once

#include <string>
#include <string_view>

#include "evio/image.hpp"

namespace evio {

enum class EdgeMethod { Sobel, Laplacian, Canny, ClaheOnly };

std::string_view to_string(EdgeMethod m);
/// Case-insensitive; accepts "sobel", "laplacian", "canny", "clahe". Throws InvalidArgument.
EdgeMethod parse_edge_method(std::string_view name);

struct EnhanceConfig {
  double sigma = 1.0;
  double lambda = 0.5;  // sharpening gain; 0 disables sharpening
  EdgeMethod method = EdgeMethod::Sobel;
  bool thinning = false;
  int erode_size = 3;
  double alpha = 0.7;
  double beta = 0.3;
  int clahe_tile_rows = 8;
  int clahe_tile_cols = 8;
  double clahe_clip = 2.0;
  double canny_low = 0.1;
  double canny_high = 0.3;
};

/// Throws InvalidArgument when a field violates its range.
void validate(const EnhanceConfig& cfg);

/// Separable Gaussian, radius ceil(3 sigma), normalized taps, replicate border.
GrayImage gaussian_blur(const GrayImage& img, double sigma);

/// Contrast limited adaptive histogram equalization with 256 bins per tile. Tiles cover
/// ceil(W / cols) x ceil(H / rows) px; the last row / column of tiles reads replicated
/// border pixels. A tile with a single occupied bin keeps the identity map.
GrayImage clahe(const GrayImage& img, int tile_rows, int tile_cols, double clip);

/// clamp(I_clahe + lambda (I_clahe - I_blur), 0, 1)
GrayImage sharpen(const GrayImage& i_clahe, const GrayImage& i_blur, double lambda);

/// Gradient magnitude normalized by its maximum.
GrayImage sobel_magnitude(const GrayImage& img);
/// |4-neighbour Laplacian| normalized by its maximum.
GrayImage laplacian_magnitude(const GrayImage& img);
/// Binary edge map: Sobel, 4-direction non-maximum suppression, double threshold on the
/// max-normalized magnitude, 8-connected hysteresis.
GrayImage canny(const GrayImage& img, double low = 0.1, double high = 0.3);

/// Dispatches on method. ClaheOnly returns its input.
GrayImage edge_detect(const GrayImage& img, EdgeMethod method, double canny_low = 0.1,
                      double canny_high = 0.3);

/// Grayscale erosion over a size x size square, replicate border.
GrayImage erode(const GrayImage& img, int size);

/// out = clamp(alpha a + beta b, 0, 1)
GrayImage blend(const GrayImage& a, const GrayImage& b, double alpha, double beta);

struct EnhanceStages {
  GrayImage blur;
  GrayImage clahe;
  GrayImage enhanced;
  GrayImage edge;
  GrayImage output;
};

EnhanceStages enhance_event_frame_stages(const GrayImage& img, const EnhanceConfig& cfg);
GrayImage enhance_event_frame(const GrayImage& img, const EnhanceConfig& cfg);

}  // namespace evio
