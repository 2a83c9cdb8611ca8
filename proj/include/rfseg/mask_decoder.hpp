#pragma once

#include <torch/torch.h>

#include "rfseg/adapters.hpp"
#include "rfseg/attention.hpp"

namespace rfseg {

// One (logits, score, pointer) triple per prompted object.
struct DecoderOutput {
  torch::Tensor mask_logits;      // [K_obj, H/4, W/4]
  torch::Tensor object_scores;    // [K_obj]
  torch::Tensor object_pointers;  // [K_obj, C]
};

// One two-way transformer block. Adapter placement:
//   plain after token self-attention,
//   plain after token-to-image cross-attention,
//   plain parallel to the token MLP,
//   depthwise-conv adapter after image-to-token cross-attention.
class TwoWayBlockImpl : public torch::nn::Module {
 public:
  TwoWayBlockImpl(int64_t dim, int64_t heads, int64_t adapter_ratio);

  // tokens [B, T, C], image [B, N, C] (N == h*w); the padding mask flags
  // inert token slots (true = padded).
  std::pair<torch::Tensor, torch::Tensor> forward(
      torch::Tensor tokens, torch::Tensor image, const torch::Tensor& image_pe,
      int64_t h, int64_t w, const torch::Tensor& token_padding = {});

  MultiheadAttention self_attn{nullptr}, cross_t2i{nullptr}, cross_i2t{nullptr};
  PlainAdapter self_attn_adapter{nullptr}, cross_t2i_adapter{nullptr},
      mlp_adapter{nullptr};
  DWConvAdapter cross_i2t_adapter{nullptr};
  Mlp mlp{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr}, norm3{nullptr},
      norm4{nullptr};
};
TORCH_MODULE(TwoWayBlock);

class MaskDecoderImpl : public torch::nn::Module {
 public:
  MaskDecoderImpl(int64_t embed_channels, int64_t heads, int64_t adapter_ratio);

  // embedding: (possibly memory-conditioned) image embedding [C, h, w];
  // skips at 4x and 2x of the embedding grid; sparse [K, T, C] with padding
  // mask [K, T]; dense [K, C, h, w] added to the embedding per object.
  DecoderOutput forward(const torch::Tensor& embedding,
                        const torch::Tensor& skip1, const torch::Tensor& skip2,
                        const torch::Tensor& sparse,
                        const torch::Tensor& sparse_padding,
                        const torch::Tensor& dense);

  torch::nn::Embedding object_token{nullptr};
  torch::nn::ModuleList blocks;
  torch::nn::ConvTranspose2d up1{nullptr}, up2{nullptr};
  torch::nn::Conv2d skip1_proj{nullptr}, skip2_proj{nullptr};
  CnnAdapter upconv_adapter{nullptr};
  Mlp mask_hypernet_head{nullptr}, pointer_head{nullptr};
  torch::nn::Linear score_head{nullptr};
  int64_t channels = 0;
};
TORCH_MODULE(MaskDecoder);

// When enabled, objects whose score falls below the threshold are emitted as
// all-background masks; scores and pointers pass through unchanged.
DecoderOutput object_score_gate(const DecoderOutput& output, bool enabled,
                                double threshold);

}  // namespace rfseg
