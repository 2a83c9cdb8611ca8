#pragma once

#include <torch/torch.h>

#include <random>
#include <utility>

namespace rfseg {

// Per-transform trigger probabilities and magnitudes. Spatial transforms are
// applied identically to the image and the labels (nearest-neighbor there).
struct AugmentConfig {
  double p_rotate = 0.2;
  double max_angle_deg = 15.0;
  double p_scale = 0.2;
  double scale_lo = 0.85, scale_hi = 1.15;
  double p_noise = 0.15;
  double noise_sigma = 0.05;
  double p_blur = 0.1;
  double blur_sigma_lo = 0.5, blur_sigma_hi = 1.0;
  double p_brightness = 0.15;
  double brightness_delta = 0.1;
  double p_contrast = 0.15;
  double contrast_lo = 0.8, contrast_hi = 1.2;
  double p_lowres = 0.1;
  double lowres_lo = 1.5, lowres_hi = 2.0;
  double p_gamma = 0.15;
  double gamma_lo = 0.8, gamma_hi = 1.2;
  double p_mirror = 0.3;  // per spatial axis
};

// patch [M, D, H, W] float, gt [D, H, W] int64. All randomness comes from
// the caller's generator, so fixed seeds replay the exact same pair.
std::pair<torch::Tensor, torch::Tensor> augment(const torch::Tensor& patch,
                                                const torch::Tensor& gt,
                                                std::mt19937_64& rng,
                                                const AugmentConfig& config);

}  // namespace rfseg
