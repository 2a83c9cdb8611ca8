#pragma once

#include <torch/torch.h>

#include "rfseg/unet.hpp"

namespace rfseg {

// 1 - mean soft dice over all classes (softmax probabilities vs one-hot gt).
torch::Tensor soft_dice_loss(const torch::Tensor& logits,  // [B, C, ...]
                             const torch::Tensor& labels); // [B, ...] int64

// cross-entropy + dice, summed.
torch::Tensor combined_loss(const torch::Tensor& logits,
                            const torch::Tensor& labels);

// combined_loss across the deep-supervision pyramid: the ground truth is
// nearest-downsampled onto each auxiliary head and the per-level losses are
// blended with the halving, sum-to-one weights.
torch::Tensor deep_supervised_loss(const UNetOutput& out,
                                   const torch::Tensor& labels);

// BCE + binary soft dice for per-object decoder masks.
torch::Tensor binary_mask_loss(const torch::Tensor& logits,   // [K, H, W]
                               const torch::Tensor& targets); // [K, H, W] 0/1

}  // namespace rfseg
