#include "rfseg/phantom.hpp"

#include <cmath>
#include <random>

namespace rfseg {

namespace {

bool inside(const PhantomShape& s, double z, double y, double x) {
  const double dz = (z - s.center[0]) / s.radii[0];
  const double dy = (y - s.center[1]) / s.radii[1];
  const double dx = (x - s.center[2]) / s.radii[2];
  if (s.ellipsoid) return dz * dz + dy * dy + dx * dx <= 1.0;
  return std::abs(dz) <= 1.0 && std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
}

bool boxes_touch(const PhantomShape& a, const PhantomShape& b) {
  for (int i = 0; i < 3; ++i) {
    const double gap = std::abs(a.center[i] - b.center[i]) -
                       (a.radii[i] + b.radii[i] + 1.5);
    if (gap > 0) return false;
  }
  return true;
}

}  // namespace

Phantom synth_phantom(uint64_t seed, const PhantomOptions& opt) {
  check_value(opt.num_classes >= 1 && opt.num_classes <= 8,
              "phantom supports 1..8 classes");
  const auto [D, H, W] = std::array{opt.shape[0], opt.shape[1], opt.shape[2]};
  check_value(D >= 8 && H >= 16 && W >= 16, "phantom volume too small");

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * coin(rng); };

  std::vector<PhantomShape> shapes;
  for (int64_t k = 1; k <= opt.num_classes; ++k) {
    // classes can skip a volume, but never all of them
    const bool drop = coin(rng) < opt.absent_class_prob &&
                      !(k == opt.num_classes && shapes.empty());
    if (drop) continue;
    PhantomShape s;
    s.class_id = k;
    s.ellipsoid = (k % 2 == 1);
    bool placed = false;
    for (int attempt = 0; attempt < opt.max_tries; ++attempt) {
      s.radii = {uniform(2.0, std::max(2.5, D / 6.0)),
                 uniform(5.0, std::max(5.5, H / 5.0)),
                 uniform(5.0, std::max(5.5, W / 5.0))};
      s.center = {uniform(s.radii[0] + 1, D - s.radii[0] - 1),
                  uniform(s.radii[1] + 1, H - s.radii[1] - 1),
                  uniform(s.radii[2] + 1, W - s.radii[2] - 1)};
      bool clash = false;
      for (const auto& other : shapes) clash = clash || boxes_touch(s, other);
      if (!clash) {
        placed = true;
        break;
      }
    }
    check_value(placed, "phantom packing infeasible for class " +
                            std::to_string(k) + " (seed " +
                            std::to_string(seed) + ")");
    shapes.push_back(s);
  }

  auto labels = torch::zeros({D, H, W}, torch::kInt64);
  auto intensity = torch::full({opt.modalities, D, H, W}, 0.1f);
  auto lacc = labels.accessor<int64_t, 3>();
  auto iacc = intensity.accessor<float, 4>();
  for (const auto& s : shapes) {
    const float band = 0.28f + 0.08f * static_cast<float>(s.class_id);
    const int64_t z0 = std::max<int64_t>(0, (int64_t)(s.center[0] - s.radii[0]));
    const int64_t z1 = std::min<int64_t>(D - 1, (int64_t)(s.center[0] + s.radii[0]) + 1);
    const int64_t y0 = std::max<int64_t>(0, (int64_t)(s.center[1] - s.radii[1]));
    const int64_t y1 = std::min<int64_t>(H - 1, (int64_t)(s.center[1] + s.radii[1]) + 1);
    const int64_t x0 = std::max<int64_t>(0, (int64_t)(s.center[2] - s.radii[2]));
    const int64_t x1 = std::min<int64_t>(W - 1, (int64_t)(s.center[2] + s.radii[2]) + 1);
    for (int64_t z = z0; z <= z1; ++z) {
      for (int64_t y = y0; y <= y1; ++y) {
        for (int64_t x = x0; x <= x1; ++x) {
          if (inside(s, z, y, x)) {
            lacc[z][y][x] = s.class_id;
            for (int64_t m = 0; m < opt.modalities; ++m) {
              iacc[m][z][y][x] = band + 0.03f * static_cast<float>(m);
            }
          }
        }
      }
    }
  }

  std::normal_distribution<float> noise(0.f, static_cast<float>(opt.noise_sigma));
  auto flat = intensity.flatten();
  auto facc = flat.accessor<float, 1>();
  for (int64_t i = 0; i < flat.numel(); ++i) facc[i] += noise(rng);

  Phantom out;
  out.volume = Volume(intensity, {3.0, 1.0, 1.0},
                      "phantom_" + std::to_string(seed));
  out.labels = LabelVolume(labels, opt.num_classes);
  out.shapes = std::move(shapes);
  return out;
}

}  // namespace rfseg
