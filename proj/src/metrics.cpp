#include "rfseg/metrics.hpp"

namespace rfseg {

double dice_score(const torch::Tensor& pred, const torch::Tensor& gt) {
  check_shape(pred.sizes() == gt.sizes(),
              "dice_score: pred and gt shapes differ");
  auto p = pred.to(torch::kBool);
  auto g = gt.to(torch::kBool);
  const auto inter = (p & g).sum().item<int64_t>();
  const auto total = p.sum().item<int64_t>() + g.sum().item<int64_t>();
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

MulticlassDice multiclass_dice(const LabelVolume& pred, const LabelVolume& gt) {
  check_shape(pred.labels.sizes() == gt.labels.sizes(),
              "multiclass_dice: volume shapes differ");
  check_value(pred.num_classes == gt.num_classes,
              "multiclass_dice: class counts differ");
  MulticlassDice out;
  double sum = 0.0;
  int64_t counted = 0;
  for (int64_t k = 1; k <= gt.num_classes; ++k) {
    auto p = pred.class_mask(k);
    auto g = gt.class_mask(k);
    const double d = dice_score(p, g);
    out.per_class.push_back(d);
    const bool absent_in_both =
        p.sum().item<int64_t>() == 0 && g.sum().item<int64_t>() == 0;
    if (!absent_in_both) {
      sum += d;
      ++counted;
    }
  }
  out.mean = counted == 0 ? 1.0 : sum / static_cast<double>(counted);
  return out;
}

}  // namespace rfseg
