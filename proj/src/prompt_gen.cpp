#include "rfseg/prompt_gen.hpp"

#include "rfseg/prompt_ops.hpp"

namespace rfseg {

std::string to_string(GeneratorVariant v) {
  switch (v) {
    case GeneratorVariant::QueryBox: return "query_box";
    case GeneratorVariant::QueryBoxFusedScore: return "query_box_fused_score";
    case GeneratorVariant::LearnablePointEmbed: return "learnable_point_embed";
    case GeneratorVariant::HierarchicalMask: return "hierarchical_mask";
    case GeneratorVariant::IndependentUNet: return "independent_unet";
    case GeneratorVariant::IndependentUNetRouted: return "independent_unet_routed";
  }
  return "?";
}

GeneratorVariant generator_variant_from_string(const std::string& name) {
  if (name == "query_box") return GeneratorVariant::QueryBox;
  if (name == "query_box_fused_score") return GeneratorVariant::QueryBoxFusedScore;
  if (name == "learnable_point_embed") return GeneratorVariant::LearnablePointEmbed;
  if (name == "hierarchical_mask") return GeneratorVariant::HierarchicalMask;
  if (name == "independent_unet") return GeneratorVariant::IndependentUNet;
  if (name == "independent_unet_routed")
    return GeneratorVariant::IndependentUNetRouted;
  throw ConfigError("unknown generator variant: " + name);
}

PromptSet masks_to_prompts(const LabelVolume& pred, bool routed) {
  PromptSet out;
  auto boxes = extract_bboxes(pred);
  // index boxes by (frame, class) for the presence scan
  auto find_box = [&boxes](int64_t z, int64_t k) -> const BoundingBox* {
    for (const auto& b : boxes) {
      if (b.frame == z && b.class_id == k) return &b;
    }
    return nullptr;
  };
  for (int64_t z = 0; z < pred.depth(); ++z) {
    for (int64_t k = 1; k <= pred.num_classes; ++k) {
      PromptEntry e;
      e.frame = z;
      e.class_id = k;
      if (const auto* box = find_box(z, k)) {
        e.sparse = *box;
        if (routed) {
          e.dense_mask = pred.class_slice(z, k).to(torch::kFloat32);
        }
      }
      out.add(std::move(e));
    }
  }
  return out;
}

namespace {

torch::Tensor run_query_blocks(torch::nn::ModuleList& self_attns,
                               torch::nn::ModuleList& cross_attns,
                               torch::nn::ModuleList& norms, torch::Tensor q,
                               const torch::Tensor& image) {
  for (size_t i = 0; i < self_attns->size(); ++i) {
    auto* n1 = norms[2 * i]->as<torch::nn::LayerNormImpl>();
    auto* n2 = norms[2 * i + 1]->as<torch::nn::LayerNormImpl>();
    auto s = n1->forward(q);
    q = q + self_attns[i]->as<MultiheadAttentionImpl>()->forward(s, s, s);
    q = q + cross_attns[i]->as<MultiheadAttentionImpl>()->forward(n2->forward(q),
                                                                  image, image);
  }
  return q;
}

}  // namespace

QueryBoxGeneratorImpl::QueryBoxGeneratorImpl(int64_t num_classes_,
                                             int64_t channels, int64_t heads,
                                             int blocks_count)
    : num_classes(num_classes_) {
  queries = register_module("queries", torch::nn::Embedding(num_classes, channels));
  self_attns = register_module("self_attns", torch::nn::ModuleList());
  cross_attns = register_module("cross_attns", torch::nn::ModuleList());
  norms = register_module("norms", torch::nn::ModuleList());
  for (int i = 0; i < blocks_count; ++i) {
    self_attns->push_back(MultiheadAttention(channels, channels, heads));
    cross_attns->push_back(MultiheadAttention(channels, channels, heads));
    norms->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
    norms->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  }
  box_head = register_module("box_head", Mlp(channels, channels, 4));
  score_head = register_module("score_head", Mlp(channels, channels, 1));
}

QueryBoxOutput QueryBoxGeneratorImpl::forward(const torch::Tensor& embedding) {
  check_shape(embedding.dim() == 3, "query box generator expects [C, h, w]");
  auto image = embedding.flatten(1).transpose(0, 1).unsqueeze(0);
  auto q = queries->weight.unsqueeze(0);
  q = run_query_blocks(self_attns, cross_attns, norms, q, image).squeeze(0);
  auto raw = torch::sigmoid(box_head(q));  // (cy, cx, height, width) in [0,1]
  auto cy = raw.select(1, 0), cx = raw.select(1, 1);
  auto hh = raw.select(1, 2) * 0.5, hw = raw.select(1, 3) * 0.5;
  QueryBoxOutput out;
  out.boxes = torch::stack({(cy - hh).clamp(0, 1), (cx - hw).clamp(0, 1),
                            (cy + hh).clamp(0, 1), (cx + hw).clamp(0, 1)},
                           1);
  out.scores = score_head(q).squeeze(-1);
  return out;
}

torch::Tensor fuse_object_scores(const torch::Tensor& generator_logits,
                                 const torch::Tensor& decoder_logits) {
  // product of probabilities, returned in logit space
  auto p = torch::sigmoid(generator_logits) * torch::sigmoid(decoder_logits);
  return torch::logit(p.clamp(1e-6, 1.0 - 1e-6));
}

LearnablePointEmbedImpl::LearnablePointEmbedImpl(int64_t num_classes_,
                                                 int64_t channels, int64_t heads,
                                                 int blocks_count)
    : num_classes(num_classes_) {
  queries =
      register_module("queries", torch::nn::Embedding(2 * num_classes, channels));
  self_attns = register_module("self_attns", torch::nn::ModuleList());
  cross_attns = register_module("cross_attns", torch::nn::ModuleList());
  norms = register_module("norms", torch::nn::ModuleList());
  for (int i = 0; i < blocks_count; ++i) {
    self_attns->push_back(MultiheadAttention(channels, channels, heads));
    cross_attns->push_back(MultiheadAttention(channels, channels, heads));
    norms->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
    norms->push_back(torch::nn::LayerNorm(torch::nn::LayerNormOptions({channels})));
  }
}

torch::Tensor LearnablePointEmbedImpl::forward(const torch::Tensor& embedding) {
  check_shape(embedding.dim() == 3, "point embed generator expects [C, h, w]");
  auto image = embedding.flatten(1).transpose(0, 1).unsqueeze(0);
  auto q = queries->weight.unsqueeze(0);
  q = run_query_blocks(self_attns, cross_attns, norms, q, image).squeeze(0);
  return q.reshape({num_classes, 2, embedding.size(0)});
}

HierarchicalMaskGeneratorImpl::HierarchicalMaskGeneratorImpl(
    int64_t num_classes, int64_t base_channels) {
  laterals = register_module("laterals", torch::nn::ModuleList());
  fuse_convs = register_module("fuse_convs", torch::nn::ModuleList());
  const int64_t width = base_channels;  // work at the finest stage's width
  int64_t c = base_channels;
  for (int i = 0; i < 4; ++i) {
    laterals->push_back(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c, width, 1)));
    c *= 2;
  }
  for (int i = 0; i < 3; ++i) {
    fuse_convs->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(width, width, 3).padding(1)));
  }
  head = register_module(
      "head",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(width, num_classes + 1, 1)));
}

torch::Tensor HierarchicalMaskGeneratorImpl::forward(const StageFeatures& feats) {
  check_shape(feats.stages.size() == 4, "expected four stage features");
  auto lat = [&](int i) {
    return laterals[i]->as<torch::nn::Conv2dImpl>()->forward(
        feats.stages[i].squeeze(0));
  };
  auto x = lat(3);
  for (int i = 2; i >= 0; --i) {
    auto target = lat(i);
    auto up = torch::nn::functional::interpolate(
        x.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                            .size(std::vector<int64_t>{target.size(1), target.size(2)})
                            .mode(torch::kBilinear)
                            .align_corners(false))
                  .squeeze(0);
    x = torch::gelu(
        fuse_convs[2 - i]->as<torch::nn::Conv2dImpl>()->forward(up + target));
  }
  return head(x);
}

}  // namespace rfseg
