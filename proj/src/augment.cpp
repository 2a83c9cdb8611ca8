#include "rfseg/augment.hpp"

#include <cmath>

#include "rfseg/errors.hpp"

namespace rfseg {

namespace {

torch::Tensor noise_like(const torch::Tensor& x, double sigma,
                         std::mt19937_64& rng) {
  std::normal_distribution<float> dist(0.f, static_cast<float>(sigma));
  auto out = torch::empty_like(x);
  auto flat = out.flatten();
  auto acc = flat.accessor<float, 1>();
  for (int64_t i = 0; i < flat.numel(); ++i) acc[i] = dist(rng);
  return out;
}

torch::Tensor gaussian_kernel1d(double sigma) {
  const int64_t radius = std::max<int64_t>(1, std::llround(2.0 * sigma));
  auto xs = torch::arange(-radius, radius + 1, torch::kFloat32);
  auto k = torch::exp(-(xs * xs) / (2.0 * sigma * sigma));
  return k / k.sum();
}

// separable blur over H and W, slices as batch
torch::Tensor blur_hw(const torch::Tensor& x, double sigma) {
  auto k = gaussian_kernel1d(sigma);
  const int64_t r = (k.numel() - 1) / 2;
  auto planes = x.reshape({-1, 1, x.size(-2), x.size(-1)});
  namespace F = torch::nn::functional;
  auto kh = k.reshape({1, 1, -1, 1});
  auto kw = k.reshape({1, 1, 1, -1});
  planes = F::conv2d(F::pad(planes, F::PadFuncOptions({0, 0, r, r}).mode(torch::kReplicate)), kh);
  planes = F::conv2d(F::pad(planes, F::PadFuncOptions({r, r, 0, 0}).mode(torch::kReplicate)), kw);
  return planes.reshape(x.sizes());
}

}  // namespace

std::pair<torch::Tensor, torch::Tensor> augment(const torch::Tensor& patch,
                                                const torch::Tensor& gt,
                                                std::mt19937_64& rng,
                                                const AugmentConfig& cfg) {
  check_shape(patch.dim() == 4 && gt.dim() == 3,
              "augment expects patch [M, D, H, W] and gt [D, H, W]");
  check_shape(patch.size(1) == gt.size(0) && patch.size(2) == gt.size(1) &&
                  patch.size(3) == gt.size(2),
              "augment: patch and gt grids differ");
  auto img = patch.clone();
  auto lab = gt.clone();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto uniform = [&](double lo, double hi) {
    return lo + (hi - lo) * coin(rng);
  };

  // in-plane rotation and/or scaling via one shared affine warp
  const bool rotate = coin(rng) < cfg.p_rotate;
  const bool scale = coin(rng) < cfg.p_scale;
  if (rotate || scale) {
    const double angle =
        rotate ? uniform(-cfg.max_angle_deg, cfg.max_angle_deg) * M_PI / 180.0
               : 0.0;
    const double s = scale ? uniform(cfg.scale_lo, cfg.scale_hi) : 1.0;
    const double a = std::cos(angle) / s;
    const double b = std::sin(angle) / s;
    auto theta = torch::tensor({{static_cast<float>(a), static_cast<float>(-b), 0.f},
                                {static_cast<float>(b), static_cast<float>(a), 0.f}})
                     .unsqueeze(0)
                     .expand({img.size(1), 2, 3});
    namespace F = torch::nn::functional;
    auto slices = img.permute({1, 0, 2, 3});  // [D, M, H, W]
    auto grid = F::affine_grid(theta, slices.sizes().vec(), false);
    slices = F::grid_sample(slices, grid,
                            F::GridSampleFuncOptions()
                                .mode(torch::kBilinear)
                                .padding_mode(torch::kBorder)
                                .align_corners(false));
    img = slices.permute({1, 0, 2, 3}).contiguous();
    auto lab_slices = lab.unsqueeze(1).to(torch::kFloat32);  // [D, 1, H, W]
    lab_slices = F::grid_sample(lab_slices, grid,
                                F::GridSampleFuncOptions()
                                    .mode(torch::kNearest)
                                    .padding_mode(torch::kZeros)
                                    .align_corners(false));
    lab = lab_slices.squeeze(1).round().to(torch::kInt64);
  }

  // mirroring, each spatial axis on its own coin
  for (int64_t axis = 0; axis < 3; ++axis) {
    if (coin(rng) < cfg.p_mirror) {
      img = img.flip(axis + 1);
      lab = lab.flip(axis);
    }
  }

  if (coin(rng) < cfg.p_noise) {
    img = img + noise_like(img, cfg.noise_sigma, rng);
  }
  if (coin(rng) < cfg.p_blur) {
    img = blur_hw(img, uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi));
  }
  if (coin(rng) < cfg.p_brightness) {
    img = img + uniform(-cfg.brightness_delta, cfg.brightness_delta);
  }
  if (coin(rng) < cfg.p_contrast) {
    auto mean = img.mean({1, 2, 3}, true);
    img = mean + (img - mean) * uniform(cfg.contrast_lo, cfg.contrast_hi);
  }
  if (coin(rng) < cfg.p_lowres) {
    const double f = uniform(cfg.lowres_lo, cfg.lowres_hi);
    namespace F = torch::nn::functional;
    const auto h = img.size(2), w = img.size(3);
    auto small = F::interpolate(
        img.permute({1, 0, 2, 3}),
        F::InterpolateFuncOptions()
            .size(std::vector<int64_t>{std::max<int64_t>(4, (int64_t)(h / f)),
                                       std::max<int64_t>(4, (int64_t)(w / f))})
            .mode(torch::kBilinear)
            .align_corners(false));
    img = F::interpolate(small, F::InterpolateFuncOptions()
                                    .size(std::vector<int64_t>{h, w})
                                    .mode(torch::kBilinear)
                                    .align_corners(false))
              .permute({1, 0, 2, 3})
              .contiguous();
  }
  if (coin(rng) < cfg.p_gamma) {
    const double gamma = uniform(cfg.gamma_lo, cfg.gamma_hi);
    auto lo = img.min();
    auto hi = img.max();
    auto norm = (img - lo) / (hi - lo + 1e-7);
    img = norm.pow(gamma) * (hi - lo) + lo;
  }
  return {img, lab};
}

}  // namespace rfseg
