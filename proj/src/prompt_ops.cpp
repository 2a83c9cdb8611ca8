#include "rfseg/prompt_ops.hpp"

#include <cmath>
#include <limits>

namespace rfseg {

std::vector<BoundingBox> extract_bboxes(const LabelVolume& mask) {
  std::vector<BoundingBox> boxes;
  const auto acc = mask.labels.accessor<int64_t, 3>();
  const int64_t D = mask.depth(), H = mask.height(), W = mask.width();
  for (int64_t z = 0; z < D; ++z) {
    for (int64_t k = 1; k <= mask.num_classes; ++k) {
      int64_t rmin = H, rmax = -1, cmin = W, cmax = -1;
      for (int64_t r = 0; r < H; ++r) {
        for (int64_t c = 0; c < W; ++c) {
          if (acc[z][r][c] == k) {
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
            cmin = std::min(cmin, c);
            cmax = std::max(cmax, c);
          }
        }
      }
      if (rmax >= 0) {
        boxes.push_back({z, k, rmin, cmin, rmax, cmax});
      }
    }
  }
  return boxes;
}

PointPrompt central_point(const torch::Tensor& mask_slice, int64_t frame,
                          int64_t class_id) {
  check_shape(mask_slice.dim() == 2, "central_point: mask slice must be [H, W]");
  auto m = mask_slice.to(torch::kBool);
  auto coords = m.nonzero();  // [N, 2] (row, col)
  check_value(coords.size(0) > 0, "central_point: empty mask");
  auto mean = coords.to(torch::kDouble).mean(0);
  const int64_t row = std::llround(mean[0].item<double>());
  const int64_t col = std::llround(mean[1].item<double>());
  const int64_t H = m.size(0), W = m.size(1);
  auto macc = m.accessor<bool, 2>();
  if (row >= 0 && row < H && col >= 0 && col < W && macc[row][col]) {
    return {frame, class_id, row, col, 1};
  }
  // Snap to the nearest foreground pixel; ties resolved row-major.
  const auto cacc = coords.accessor<int64_t, 2>();
  int64_t best_r = -1, best_c = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int64_t i = 0; i < coords.size(0); ++i) {
    const int64_t r = cacc[i][0], c = cacc[i][1];
    const double dr = static_cast<double>(r - row);
    const double dc = static_cast<double>(c - col);
    const double d = dr * dr + dc * dc;
    if (d < best_d) {
      best_d = d;
      best_r = r;
      best_c = c;
    }
  }
  return {frame, class_id, best_r, best_c, 1};
}

namespace {

// Frames where a class has at least one pixel, ascending.
std::vector<int64_t> presence_frames(const LabelVolume& gt, int64_t class_id) {
  std::vector<int64_t> frames;
  auto per_frame = gt.class_mask(class_id).sum({1, 2});
  const auto acc = per_frame.accessor<int64_t, 1>();
  for (int64_t z = 0; z < gt.depth(); ++z) {
    if (acc[z] > 0) frames.push_back(z);
  }
  return frames;
}

PromptEntry make_entry(const LabelVolume& gt, int64_t frame, int64_t class_id,
                       PromptKind kind) {
  PromptEntry e;
  e.frame = frame;
  e.class_id = class_id;
  auto slice = gt.class_slice(frame, class_id);
  if (kind == PromptKind::Box) {
    auto coords = slice.nonzero();
    auto mins = std::get<0>(coords.min(0));
    auto maxs = std::get<0>(coords.max(0));
    e.sparse = BoundingBox{frame, class_id, mins[0].item<int64_t>(),
                           mins[1].item<int64_t>(), maxs[0].item<int64_t>(),
                           maxs[1].item<int64_t>()};
  } else {
    e.sparse = central_point(slice, frame, class_id);
  }
  return e;
}

}  // namespace

PromptSet derive_prompt_plan(const LabelVolume& gt,
                             const PromptSetting& setting) {
  PromptSet plan;
  for (int64_t k = 1; k <= gt.num_classes; ++k) {
    const auto frames = presence_frames(gt, k);
    switch (setting.coverage) {
      case PromptCoverage::AllFrames: {
        size_t next = 0;
        for (int64_t z = 0; z < gt.depth(); ++z) {
          if (next < frames.size() && frames[next] == z) {
            plan.add(make_entry(gt, z, k, setting.kind));
            ++next;
          } else {
            plan.add({z, k, NoObjectMarker{}, std::nullopt});
          }
        }
        break;
      }
      case PromptCoverage::TwoFrames: {
        if (frames.empty()) break;
        plan.add(make_entry(gt, frames.front(), k, setting.kind));
        if (frames.back() != frames.front()) {
          plan.add(make_entry(gt, frames.back(), k, setting.kind));
        }
        break;
      }
      case PromptCoverage::OneFrame: {
        if (frames.empty()) break;
        const int64_t mid = (frames.front() + frames.back()) / 2;
        int64_t chosen = frames.front();
        int64_t best = std::numeric_limits<int64_t>::max();
        for (int64_t z : frames) {
          const int64_t d = std::abs(z - mid);
          if (d < best) {
            best = d;
            chosen = z;
          }
        }
        plan.add(make_entry(gt, chosen, k, setting.kind));
        break;
      }
    }
  }
  return plan;
}

}  // namespace rfseg
