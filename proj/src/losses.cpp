#include "rfseg/losses.hpp"

#include "rfseg/schedule.hpp"

namespace rfseg {

torch::Tensor soft_dice_loss(const torch::Tensor& logits,
                             const torch::Tensor& labels) {
  check_shape(logits.dim() >= 3, "soft dice expects [B, C, ...]");
  const int64_t C = logits.size(1);
  auto probs = torch::softmax(logits, 1);
  auto one_hot =
      torch::nn::functional::one_hot(labels, C).to(logits.dtype());
  // move the class axis next to the batch: [B, ..., C] -> [B, C, ...]
  std::vector<int64_t> perm(one_hot.dim());
  perm[0] = 0;
  perm[1] = one_hot.dim() - 1;
  for (int64_t i = 2; i < one_hot.dim(); ++i) perm[i] = i - 1;
  one_hot = one_hot.permute(perm);

  auto dims = std::vector<int64_t>();
  for (int64_t i = 2; i < logits.dim(); ++i) dims.push_back(i);
  dims.insert(dims.begin(), 0);  // batch-wide dice per class
  const double eps = 1e-5;
  auto inter = (probs * one_hot).sum(dims);
  auto denom = probs.sum(dims) + one_hot.sum(dims);
  auto dice = (2.0 * inter + eps) / (denom + eps);
  return 1.0 - dice.mean();
}

torch::Tensor combined_loss(const torch::Tensor& logits,
                            const torch::Tensor& labels) {
  auto ce = torch::nn::functional::cross_entropy(logits, labels);
  return ce + soft_dice_loss(logits, labels);
}

torch::Tensor deep_supervised_loss(const UNetOutput& out,
                                   const torch::Tensor& labels) {
  const int levels = 1 + static_cast<int>(out.aux.size());
  const auto weights = deep_supervision_weights(levels);
  auto total = weights[0] * combined_loss(out.logits, labels);
  for (int i = 0; i < static_cast<int>(out.aux.size()); ++i) {
    const auto& aux = out.aux[i];
    auto gt = labels.unsqueeze(1).to(torch::kFloat32);
    gt = torch::nn::functional::interpolate(
        gt, torch::nn::functional::InterpolateFuncOptions()
                .size(std::vector<int64_t>{aux.size(2), aux.size(3), aux.size(4)})
                .mode(torch::kNearest));
    total = total + weights[i + 1] *
                        combined_loss(aux, gt.squeeze(1).to(torch::kInt64));
  }
  return total;
}

torch::Tensor binary_mask_loss(const torch::Tensor& logits,
                               const torch::Tensor& targets) {
  check_shape(logits.sizes() == targets.sizes(),
              "binary mask loss: shape mismatch");
  auto t = targets.to(logits.dtype());
  auto bce = torch::binary_cross_entropy_with_logits(logits, t);
  auto probs = torch::sigmoid(logits);
  const double eps = 1e-5;
  auto inter = (probs * t).sum({-2, -1});
  auto denom = probs.sum({-2, -1}) + t.sum({-2, -1});
  auto dice = (2.0 * inter + eps) / (denom + eps);
  return bce + (1.0 - dice.mean());
}

}  // namespace rfseg
