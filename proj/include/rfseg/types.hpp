#pragma once

#include <torch/torch.h>

#include <array>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rfseg/errors.hpp"

namespace rfseg {

// Multi-modality intensity grid [M, D, H, W] with voxel spacing in mm.
struct Volume {
  torch::Tensor data;  // float32 [M, D, H, W]
  std::array<double, 3> spacing{1.0, 1.0, 1.0};
  std::string id;

  Volume() = default;
  Volume(torch::Tensor d, std::array<double, 3> sp, std::string ident);

  int64_t modalities() const { return data.size(0); }
  int64_t depth() const { return data.size(1); }
  int64_t height() const { return data.size(2); }
  int64_t width() const { return data.size(3); }
};

// Integer class labels per voxel, 0 = background, classes 1..K.
struct LabelVolume {
  torch::Tensor labels;  // int64 [D, H, W]
  int64_t num_classes = 0;

  LabelVolume() = default;
  LabelVolume(torch::Tensor l, int64_t k);

  int64_t depth() const { return labels.size(0); }
  int64_t height() const { return labels.size(1); }
  int64_t width() const { return labels.size(2); }

  // Binary [H, W] mask of one class in one frame.
  torch::Tensor class_slice(int64_t frame, int64_t class_id) const;
  // Binary [D, H, W] mask of one class.
  torch::Tensor class_mask(int64_t class_id) const;
};

// Axis-aligned box, inclusive pixel coordinates.
struct BoundingBox {
  int64_t frame = 0;
  int64_t class_id = 0;
  int64_t min_row = 0, min_col = 0, max_row = 0, max_col = 0;

  bool operator==(const BoundingBox&) const = default;
};

// Point prompt labels follow the segmenter's convention:
//   -1 no object, 0 negative point, 1 positive point,
//    2 box top-left corner, 3 box bottom-right corner.
struct PointPrompt {
  int64_t frame = 0;
  int64_t class_id = 0;
  int64_t row = 0, col = 0;
  int label = 1;

  bool operator==(const PointPrompt&) const = default;
};

struct NoObjectMarker {
  bool operator==(const NoObjectMarker&) const = default;
};

using SparsePayload = std::variant<BoundingBox, PointPrompt, NoObjectMarker>;

// One prompt record per (frame, class). The sparse payload is a box, a point,
// or a no-object marker; a dense mask may ride along (mask routing).
struct PromptEntry {
  int64_t frame = 0;
  int64_t class_id = 0;
  SparsePayload sparse = NoObjectMarker{};
  std::optional<torch::Tensor> dense_mask;  // float32 [H, W] in {0,1}

  bool is_no_object() const {
    return std::holds_alternative<NoObjectMarker>(sparse) && !dense_mask;
  }
};

class PromptSet {
 public:
  void add(PromptEntry entry);
  const std::vector<PromptEntry>& entries() const { return entries_; }
  std::vector<const PromptEntry*> for_frame(int64_t frame) const;
  const PromptEntry* find(int64_t frame, int64_t class_id) const;
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }

 private:
  std::vector<PromptEntry> entries_;
};

enum class PromptCoverage { AllFrames, TwoFrames, OneFrame };
enum class PromptKind { Box, CentralPoint };
enum class Step2Scope { UnpromptedOnly, AllFrames };

struct PromptSetting {
  PromptCoverage coverage = PromptCoverage::AllFrames;
  PromptKind kind = PromptKind::Box;
  Step2Scope step2_scope = Step2Scope::AllFrames;
};

std::string to_string(PromptCoverage c);
std::string to_string(PromptKind k);
std::string to_string(Step2Scope s);

}  // namespace rfseg
