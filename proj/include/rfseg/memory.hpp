#pragma once

#include <torch/torch.h>

#include <vector>

#include "rfseg/adapters.hpp"
#include "rfseg/attention.hpp"

namespace rfseg {

enum class MemoryOrigin { Step1, Step2 };

// Frame selection for the refinement pass:
//   OriginalPromptedZero - prompted frames pinned at position 0, previous
//                          unprompted frames at 1..W (closer = higher);
//   CurrentAsZero        - the current frame's own entry at position 0,
//                          previous frames at their literal offset t - index;
//   BidirectionalA       - symmetric window of W/2 on each side, positions
//                          by absolute offset;
//   BidirectionalB       - symmetric window of W on each side (trades the
//                          size cap for coverage).
enum class FrameStrategy {
  OriginalPromptedZero,
  CurrentAsZero,
  BidirectionalA,
  BidirectionalB,
};

std::string to_string(FrameStrategy s);
FrameStrategy frame_strategy_from_string(const std::string& name);

struct MemoryEntry {
  int64_t frame_index = 0;
  MemoryOrigin origin = MemoryOrigin::Step1;
  bool prompted = false;           // frame carried at least one live prompt
  torch::Tensor feature;           // [C_m, h, w]
  torch::Tensor object_pointers;   // [K, C_e]
};

// Append-only store of per-frame memories, unique per (frame, origin).
class MemoryBank {
 public:
  void add(MemoryEntry entry);
  const MemoryEntry* find(int64_t frame, MemoryOrigin origin) const;
  // The most refined entry for a frame: refinement output if present,
  // otherwise the prompted-pass output.
  const MemoryEntry* latest(int64_t frame) const;
  bool empty() const { return entries_.empty(); }
  size_t size() const { return entries_.size(); }
  const std::vector<MemoryEntry>& entries() const { return entries_; }

 private:
  std::vector<MemoryEntry> entries_;
};

struct SelectedMemory {
  const MemoryEntry* entry = nullptr;
  int64_t position = 0;  // temporal position fed to the attention encoding
};

struct FrameSelectionConfig {
  FrameStrategy strategy = FrameStrategy::CurrentAsZero;
  int64_t window = 6;
  bool read_refined = true;  // previous frames: refined entry when available
};

std::vector<SelectedMemory> select_frames(int64_t t, const MemoryBank& bank,
                                          const FrameSelectionConfig& config);

// Fuses frame features with the predicted-mask planes into a compact
// per-frame memory feature. Mask planes arrive at full frame resolution
// ([2, H, W]: foreground probability and a normalized soft label index) and
// are reduced onto the feature grid by a stride-2 conv chain.
class MemoryEncoderImpl : public torch::nn::Module {
 public:
  MemoryEncoderImpl(int64_t embed_channels, int64_t mem_channels,
                    int64_t downsample_factor, int64_t adapter_ratio);

  torch::Tensor forward(const torch::Tensor& features,     // [C_e, h, w]
                        const torch::Tensor& mask_planes);  // [2, h*f, w*f]

  torch::nn::ModuleList down_convs;
  torch::nn::Conv2d down_proj{nullptr}, feat_proj{nullptr};
  CnnAdapter downsampler_adapter{nullptr}, fuser_adapter{nullptr};
  torch::nn::ModuleList fuser_convs;
  int64_t mem_channels = 0;
  int64_t factor = 16;
};
TORCH_MODULE(MemoryEncoder);

class MemoryAttentionBlockImpl : public torch::nn::Module {
 public:
  MemoryAttentionBlockImpl(int64_t dim, int64_t kv_dim, int64_t heads,
                           int64_t adapter_ratio);
  torch::Tensor forward(const torch::Tensor& tokens,  // [1, N, C_e]
                        const torch::Tensor& memory,  // [1, M, C_m]
                        int64_t h, int64_t w);

  MultiheadAttention self_attn{nullptr}, cross_attn{nullptr};
  DWConvAdapter self_attn_adapter{nullptr}, cross_attn_adapter{nullptr};
  Mlp mlp{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr}, norm3{nullptr};
};
TORCH_MODULE(MemoryAttentionBlock);

// Conditions current-frame features on selected memories. Memory tokens are
// flattened memory features plus a sinusoidal encoding of their temporal
// position; object pointers are projected in as extra memory tokens.
class MemoryAttentionImpl : public torch::nn::Module {
 public:
  MemoryAttentionImpl(int64_t embed_channels, int64_t mem_channels,
                      int64_t heads, int64_t blocks_count,
                      int64_t adapter_ratio);

  torch::Tensor forward(const torch::Tensor& features,  // [C_e, h, w]
                        const std::vector<SelectedMemory>& selected);

  torch::nn::ModuleList blocks;
  torch::nn::Linear pointer_proj{nullptr};
  int64_t mem_channels = 0;
};
TORCH_MODULE(MemoryAttention);

}  // namespace rfseg
