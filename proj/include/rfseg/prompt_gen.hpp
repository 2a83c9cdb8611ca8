#pragma once

#include <torch/torch.h>

#include "rfseg/attention.hpp"
#include "rfseg/backbone.hpp"
#include "rfseg/types.hpp"

namespace rfseg {

// The six automatic prompt-generation blocks. The independent-UNet pair is
// the production path; the others stay selectable for ablation runs.
enum class GeneratorVariant {
  QueryBox,             // learnable per-class queries -> boxes + scores
  QueryBoxFusedScore,   // QueryBox with scores fused into the decoder's
  LearnablePointEmbed,  // queries -> prompt tokens directly
  HierarchicalMask,     // conv mask head sharing the image encoder
  IndependentUNet,      // separate UNet -> boxes
  IndependentUNetRouted // separate UNet -> boxes + dense masks
};

std::string to_string(GeneratorVariant v);
GeneratorVariant generator_variant_from_string(const std::string& name);

// Converts predicted labels into the prompt records the segmenter consumes:
// one tight box per present (frame, class); a per-frame binary mask rides
// along when `routed`; absent (frame, class) pairs get no-object markers.
PromptSet masks_to_prompts(const LabelVolume& pred, bool routed);

struct QueryBoxOutput {
  torch::Tensor boxes;   // [K, 4] normalized (r0, c0, r1, c1), r0<=r1, c0<=c1
  torch::Tensor scores;  // [K] logits
};

// Learnable object queries attending to the image embedding, decoded into
// center/size boxes (sigmoid-bounded, so corners are always ordered).
class QueryBoxGeneratorImpl : public torch::nn::Module {
 public:
  QueryBoxGeneratorImpl(int64_t num_classes, int64_t channels, int64_t heads,
                        int blocks_count = 2);
  QueryBoxOutput forward(const torch::Tensor& embedding);  // [C, h, w]

  torch::nn::Embedding queries{nullptr};
  torch::nn::ModuleList self_attns, cross_attns, norms;
  Mlp box_head{nullptr}, score_head{nullptr};
  int64_t num_classes = 0;
};
TORCH_MODULE(QueryBoxGenerator);

// Combines a generator score with the decoder's object score (both logits).
torch::Tensor fuse_object_scores(const torch::Tensor& generator_logits,
                                 const torch::Tensor& decoder_logits);

// Emits 2*K prompt tokens directly (box-token arity per class), bypassing
// coordinate decoding entirely.
class LearnablePointEmbedImpl : public torch::nn::Module {
 public:
  LearnablePointEmbedImpl(int64_t num_classes, int64_t channels, int64_t heads,
                          int blocks_count = 2);
  torch::Tensor forward(const torch::Tensor& embedding);  // -> [K, 2, C]

  torch::nn::Embedding queries{nullptr};
  torch::nn::ModuleList self_attns, cross_attns, norms;
  int64_t num_classes = 0;
};
TORCH_MODULE(LearnablePointEmbed);

// Coarse-to-fine conv head over the shared encoder's stage features,
// emitting (K+1)-class logits at 1/4 of the input resolution.
class HierarchicalMaskGeneratorImpl : public torch::nn::Module {
 public:
  HierarchicalMaskGeneratorImpl(int64_t num_classes, int64_t base_channels);
  torch::Tensor forward(const StageFeatures& feats);  // [K+1, H/4, W/4]

  torch::nn::ModuleList laterals, fuse_convs;
  torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(HierarchicalMaskGenerator);

}  // namespace rfseg
