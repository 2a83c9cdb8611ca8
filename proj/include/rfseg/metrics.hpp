#pragma once

#include <torch/torch.h>

#include <vector>

#include "rfseg/types.hpp"

namespace rfseg {

// 2|P∩G| / (|P|+|G|) over binary masks of identical shape.
// Both masks empty -> 1.0 (agreement on absence).
double dice_score(const torch::Tensor& pred, const torch::Tensor& gt);

struct MulticlassDice {
  std::vector<double> per_class;  // index 0 -> class 1, ..., K-1 -> class K
  double mean = 1.0;              // excludes classes absent from both volumes
};

MulticlassDice multiclass_dice(const LabelVolume& pred, const LabelVolume& gt);

}  // namespace rfseg
