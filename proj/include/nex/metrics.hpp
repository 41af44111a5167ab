#pragma once

#include "nex/image.hpp"

namespace nex {

inline constexpr double kPsnrCap = 99.0;

/// Peak 1.0; identical images return kPsnrCap.
double psnr(const Image& a, const Image& b);
double mse(const Image& a, const Image& b);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, data range 1, mirror-reflected borders, mean over the interior
/// (a 5-pixel crop) and then over channels. Matches
/// skimage.metrics.structural_similarity(gaussian_weights=True,
/// use_sample_covariance=False, data_range=1).
double ssim(const Image& a, const Image& b);

}  // namespace nex
