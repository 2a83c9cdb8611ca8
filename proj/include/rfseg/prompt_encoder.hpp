#pragma once

#include <torch/torch.h>

#include "rfseg/attention.hpp"
#include "rfseg/types.hpp"

namespace rfseg {

// Sparse prompt tokens carry a coordinate encoding plus a learned embedding
// of the prompt label (-1 no object, 0/1 negative/positive point, 2/3 box
// corners). Dense prompts are downsampled mask planes; their absence is a
// learned "no mask" vector broadcast over the grid.
class PromptEncoderImpl : public torch::nn::Module {
 public:
  PromptEncoderImpl(int64_t embed_channels, int64_t mask_downsample_factor);

  // Tokens for one (frame, class) record: a box yields two tokens labelled
  // 2 and 3, a point one token labelled 0/1, a no-object marker one token
  // labelled -1. Coordinates are validated against the frame bounds.
  torch::Tensor encode_sparse(const PromptEntry& entry, int64_t frame_h,
                              int64_t frame_w);  // [T, C]

  // Dense embedding for the record at the target grid; entries without a
  // dense mask get the learned no-mask embedding.
  torch::Tensor encode_dense(const PromptEntry& entry, int64_t grid_h,
                             int64_t grid_w);  // [C, grid_h, grid_w]

  // 0-based index into the label embedding table for labels in {-1..3}.
  static int64_t label_index(int label);

  torch::nn::Embedding label_embed{nullptr};    // 5 prompt labels
  torch::nn::Embedding no_mask_embed{nullptr};  // broadcast dense fallback
  torch::nn::ModuleList mask_convs;             // stride-2 chain
  torch::nn::Conv2d mask_proj{nullptr};
  int64_t channels = 0;
  int64_t downsample_factor = 16;
};
TORCH_MODULE(PromptEncoder);

// Padded per-object batch of prompt embeddings for one frame.
struct EncodedPrompts {
  torch::Tensor sparse;   // [K, T_max, C]
  torch::Tensor padding;  // [K, T_max] bool, true = inert slot
  torch::Tensor dense;    // [K, C, grid_h, grid_w]
  std::vector<int64_t> class_ids;  // object order
};

EncodedPrompts encode_frame_prompts(PromptEncoder& encoder,
                                    const std::vector<const PromptEntry*>& entries,
                                    int64_t frame_h, int64_t frame_w,
                                    int64_t grid_h, int64_t grid_w);

}  // namespace rfseg
