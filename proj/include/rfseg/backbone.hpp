#pragma once

#include <torch/torch.h>

#include <array>
#include <vector>

#include "rfseg/adapters.hpp"
#include "rfseg/attention.hpp"

namespace rfseg {

struct BackboneDims {
  int64_t modalities = 1;
  int64_t base_channels = 16;   // doubles per stage
  std::array<int, 4> depths{1, 2, 2, 1};
  int64_t embed_channels = 64;  // fused embedding width
  int64_t heads = 4;
  int64_t adapter_ratio = 4;
};

// Per-stage feature maps; spatial halves and channels double stage to stage.
struct StageFeatures {
  std::vector<torch::Tensor> stages;  // [B, C_i, H_i, W_i], i = 0..3
};

// Fused embedding at 1/16 input resolution plus the two high-resolution
// skips (1/4 and 1/8) used by the mask decoder.
struct ImageEmbedding {
  torch::Tensor embedding;  // [B, C_e, H/16, W/16]
  torch::Tensor skip1;      // [B, C_e, H/4,  W/4]
  torch::Tensor skip2;      // [B, C_e, H/8,  W/8]
};

// Maps M input modalities onto a 3-channel frame through an inverted
// bottleneck (expand past max(M, 3), then project down to 3).
class ModalityStemImpl : public torch::nn::Module {
 public:
  explicit ModalityStemImpl(int64_t modalities);
  torch::Tensor forward(const torch::Tensor& frame);  // [B, M, H, W] -> [B, 3, H, W]

  torch::nn::Conv2d expand{nullptr}, project{nullptr};
  int64_t modalities = 1;
};
TORCH_MODULE(ModalityStem);

// Pre-norm transformer block over image tokens; the attention output passes
// through a depthwise-conv adapter before the residual add.
class EncoderBlockImpl : public torch::nn::Module {
 public:
  EncoderBlockImpl(int64_t dim, int64_t heads, int64_t adapter_ratio);
  torch::Tensor forward(const torch::Tensor& tokens, int64_t h, int64_t w);

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  MultiheadAttention attn{nullptr};
  DWConvAdapter attn_adapter{nullptr};
  Mlp mlp{nullptr};
};
TORCH_MODULE(EncoderBlock);

class EncoderStageImpl : public torch::nn::Module {
 public:
  EncoderStageImpl(int64_t in_channels, int64_t out_channels, int64_t stride,
                   int depth, int64_t heads, int64_t adapter_ratio);
  torch::Tensor forward(const torch::Tensor& x);  // [B, Cin, H, W] -> [B, Cout, H/s, W/s]

  torch::nn::Conv2d patch_embed{nullptr};
  torch::nn::ModuleList blocks;
  int64_t stride = 2;
};
TORCH_MODULE(EncoderStage);

// Four-stage hierarchical encoder at 1/4, 1/8, 1/16 and 1/32 of the input.
class HierEncoderImpl : public torch::nn::Module {
 public:
  explicit HierEncoderImpl(const BackboneDims& dims);
  StageFeatures forward(const torch::Tensor& frame3);  // [B, 3, H, W]

  torch::nn::ModuleList stages;
};
TORCH_MODULE(HierEncoder);

// Lateral 1x1 convs onto a shared width; the deepest feature is upsampled
// and summed with the next one to form the embedding, the two finest stages
// become skips. Each emitted output passes through a CNN adapter.
class FpnNeckImpl : public torch::nn::Module {
 public:
  explicit FpnNeckImpl(const BackboneDims& dims);
  ImageEmbedding forward(const StageFeatures& feats);

  torch::nn::ModuleList laterals;
  CnnAdapter skip1_adapter{nullptr}, skip2_adapter{nullptr},
      embed_adapter{nullptr};
};
TORCH_MODULE(FpnNeck);

class BackboneImpl : public torch::nn::Module {
 public:
  explicit BackboneImpl(const BackboneDims& dims);
  ImageEmbedding forward(const torch::Tensor& frame);  // [B, M, H, W]

  ModalityStem stem{nullptr};
  HierEncoder encoder{nullptr};
  FpnNeck fpn{nullptr};
  BackboneDims dims;
};
TORCH_MODULE(Backbone);

}  // namespace rfseg
