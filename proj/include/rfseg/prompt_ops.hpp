#pragma once

#include <vector>

#include "rfseg/types.hpp"

namespace rfseg {

// One tight box per (frame, class) with foreground, spanning all connected
// components of that class in that frame. Pairs without pixels are omitted.
std::vector<BoundingBox> extract_bboxes(const LabelVolume& mask);

// Centroid of the foreground, rounded; snapped to the nearest foreground
// pixel (Euclidean, ties broken row-major) if the rounded centroid lands on
// background. Throws ValueError on an empty mask.
PointPrompt central_point(const torch::Tensor& mask_slice, int64_t frame,
                          int64_t class_id);

// Builds the prompt plan for a ground-truth volume under one setting:
//   AllFrames -> prompt on every frame where the class appears, plus
//                no-object markers on frames where it is absent;
//   TwoFrames -> first and last frame of appearance;
//   OneFrame  -> middle frame of the appearance range (snapped to the
//                nearest frame of presence if the midpoint is empty).
PromptSet derive_prompt_plan(const LabelVolume& gt, const PromptSetting& setting);

}  // namespace rfseg
