#include "rfseg/types.hpp"

namespace rfseg {

Volume::Volume(torch::Tensor d, std::array<double, 3> sp, std::string ident)
    : data(std::move(d)), spacing(sp), id(std::move(ident)) {
  check_shape(data.dim() == 4, "Volume data must be [M, D, H, W]");
  check_shape(data.size(0) >= 1 && data.size(1) >= 1 && data.size(2) >= 1 &&
                  data.size(3) >= 1,
              "Volume dims must all be >= 1");
  data = data.to(torch::kFloat32);
  check_value(torch::isfinite(data).all().item<bool>(),
              "Volume contains non-finite values");
}

LabelVolume::LabelVolume(torch::Tensor l, int64_t k)
    : labels(std::move(l)), num_classes(k) {
  check_shape(labels.dim() == 3, "LabelVolume must be [D, H, W]");
  labels = labels.to(torch::kInt64);
  check_value(num_classes >= 0, "num_classes must be >= 0");
  const auto lo = labels.min().item<int64_t>();
  const auto hi = labels.max().item<int64_t>();
  check_value(lo >= 0 && hi <= num_classes,
              "labels must lie in 0..num_classes");
}

torch::Tensor LabelVolume::class_slice(int64_t frame, int64_t class_id) const {
  check_value(frame >= 0 && frame < depth(), "frame out of range");
  return labels[frame].eq(class_id);
}

torch::Tensor LabelVolume::class_mask(int64_t class_id) const {
  return labels.eq(class_id);
}

void PromptSet::add(PromptEntry entry) {
  check_value(find(entry.frame, entry.class_id) == nullptr,
              "duplicate prompt for (frame=" + std::to_string(entry.frame) +
                  ", class=" + std::to_string(entry.class_id) + ")");
  entries_.push_back(std::move(entry));
}

std::vector<const PromptEntry*> PromptSet::for_frame(int64_t frame) const {
  std::vector<const PromptEntry*> out;
  for (const auto& e : entries_) {
    if (e.frame == frame) out.push_back(&e);
  }
  return out;
}

const PromptEntry* PromptSet::find(int64_t frame, int64_t class_id) const {
  for (const auto& e : entries_) {
    if (e.frame == frame && e.class_id == class_id) return &e;
  }
  return nullptr;
}

std::string to_string(PromptCoverage c) {
  switch (c) {
    case PromptCoverage::AllFrames: return "all_frames";
    case PromptCoverage::TwoFrames: return "two_frames";
    case PromptCoverage::OneFrame: return "one_frame";
  }
  return "?";
}

std::string to_string(PromptKind k) {
  return k == PromptKind::Box ? "box" : "central_point";
}

std::string to_string(Step2Scope s) {
  return s == Step2Scope::AllFrames ? "all_frames" : "unprompted_only";
}

}  // namespace rfseg
