#include "rfseg/schedule.hpp"

#include <cmath>

namespace rfseg {

double poly_lr(int64_t epoch, double init_lr, int64_t max_epoch) {
  check_value(max_epoch > 0, "max_epoch must be positive");
  check_value(epoch >= 0 && epoch <= max_epoch,
              "epoch " + std::to_string(epoch) + " outside 0.." +
                  std::to_string(max_epoch));
  const double frac =
      1.0 - static_cast<double>(epoch) / static_cast<double>(max_epoch);
  return init_lr * std::pow(frac, 0.9);
}

std::vector<double> deep_supervision_weights(int levels) {
  check_value(levels >= 1, "deep supervision needs at least one level");
  std::vector<double> w(levels);
  double sum = 0.0;
  for (int i = 0; i < levels; ++i) {
    w[i] = std::pow(2.0, -static_cast<double>(i));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

}  // namespace rfseg
