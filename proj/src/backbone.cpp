#include "rfseg/backbone.hpp"

namespace rfseg {

ModalityStemImpl::ModalityStemImpl(int64_t m) : modalities(m) {
  check_value(m >= 1, "stem needs at least one modality");
  const int64_t hidden = 4 * std::max<int64_t>(m, 3);
  expand = register_module(
      "expand", torch::nn::Conv2d(torch::nn::Conv2dOptions(m, hidden, 3).padding(1)));
  project = register_module(
      "project", torch::nn::Conv2d(torch::nn::Conv2dOptions(hidden, 3, 3).padding(1)));
}

torch::Tensor ModalityStemImpl::forward(const torch::Tensor& frame) {
  check_shape(frame.dim() == 4 && frame.size(1) == modalities,
              "stem expects [B, M, H, W]");
  return project(torch::gelu(expand(frame)));
}

EncoderBlockImpl::EncoderBlockImpl(int64_t dim, int64_t heads,
                                   int64_t adapter_ratio) {
  norm1 = register_module("norm1",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  attn = register_module("attn", MultiheadAttention(dim, dim, heads));
  attn_adapter = register_module(
      "attn_adapter",
      DWConvAdapter(AdapterSpec{AdapterKind::DWConv, dim, adapter_ratio}));
  norm2 = register_module("norm2",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  mlp = register_module("mlp", Mlp(dim, dim * 4));
}

torch::Tensor EncoderBlockImpl::forward(const torch::Tensor& tokens, int64_t h,
                                        int64_t w) {
  auto n = norm1(tokens);
  auto a = attn(n, n, n);
  a = attn_adapter->forward_tokens(a, h, w);
  auto x = tokens + a;
  return x + mlp(norm2(x));
}

EncoderStageImpl::EncoderStageImpl(int64_t in_channels, int64_t out_channels,
                                   int64_t stride_, int depth, int64_t heads,
                                   int64_t adapter_ratio)
    : stride(stride_) {
  patch_embed = register_module(
      "patch_embed",
      torch::nn::Conv2d(
          torch::nn::Conv2dOptions(in_channels, out_channels, stride).stride(stride)));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < depth; ++i) {
    blocks->push_back(EncoderBlock(out_channels, heads, adapter_ratio));
  }
}

torch::Tensor EncoderStageImpl::forward(const torch::Tensor& x) {
  auto f = patch_embed(x);  // [B, C, h, w]
  const auto h = f.size(2), w = f.size(3);
  auto tokens = f.flatten(2).transpose(1, 2);  // [B, h*w, C]
  for (auto& block : *blocks) {
    tokens = block->as<EncoderBlockImpl>()->forward(tokens, h, w);
  }
  return tokens.transpose(1, 2).reshape({f.size(0), f.size(1), h, w});
}

HierEncoderImpl::HierEncoderImpl(const BackboneDims& dims) {
  stages = register_module("stages", torch::nn::ModuleList());
  int64_t in = 3;
  int64_t out = dims.base_channels;
  const std::array<int64_t, 4> strides{4, 2, 2, 2};
  for (int i = 0; i < 4; ++i) {
    stages->push_back(EncoderStage(in, out, strides[i], dims.depths[i],
                                   dims.heads, dims.adapter_ratio));
    in = out;
    out *= 2;
  }
}

StageFeatures HierEncoderImpl::forward(const torch::Tensor& frame3) {
  check_shape(frame3.dim() == 4, "encoder expects [B, 3, H, W]");
  check_shape(frame3.size(2) % 32 == 0 && frame3.size(3) % 32 == 0,
              "encoder needs H and W divisible by 32, got " +
                  std::to_string(frame3.size(2)) + "x" +
                  std::to_string(frame3.size(3)));
  StageFeatures out;
  auto x = frame3;
  for (auto& stage : *stages) {
    x = stage->as<EncoderStageImpl>()->forward(x);
    out.stages.push_back(x);
  }
  return out;
}

FpnNeckImpl::FpnNeckImpl(const BackboneDims& dims) {
  laterals = register_module("laterals", torch::nn::ModuleList());
  int64_t c = dims.base_channels;
  for (int i = 0; i < 4; ++i) {
    laterals->push_back(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c, dims.embed_channels, 1)));
    c *= 2;
  }
  const AdapterSpec spec{AdapterKind::Cnn, dims.embed_channels,
                         dims.adapter_ratio};
  skip1_adapter = register_module("skip1_adapter", CnnAdapter(spec));
  skip2_adapter = register_module("skip2_adapter", CnnAdapter(spec));
  embed_adapter = register_module("embed_adapter", CnnAdapter(spec));
}

ImageEmbedding FpnNeckImpl::forward(const StageFeatures& feats) {
  check_shape(feats.stages.size() == 4, "fpn expects four stage features");
  auto conv = [&](int i) {
    return laterals[i]->as<torch::nn::Conv2dImpl>()->forward(feats.stages[i]);
  };
  auto l3 = conv(2);
  auto l4 = conv(3);
  auto up = torch::nn::functional::interpolate(
      l4, torch::nn::functional::InterpolateFuncOptions()
              .size(std::vector<int64_t>{l3.size(2), l3.size(3)})
              .mode(torch::kBilinear)
              .align_corners(false));
  ImageEmbedding out;
  out.embedding = embed_adapter(up + l3);
  out.skip1 = skip1_adapter(conv(0));
  out.skip2 = skip2_adapter(conv(1));
  return out;
}

BackboneImpl::BackboneImpl(const BackboneDims& d) : dims(d) {
  stem = register_module("stem", ModalityStem(dims.modalities));
  encoder = register_module("encoder", HierEncoder(dims));
  fpn = register_module("fpn", FpnNeck(dims));
}

ImageEmbedding BackboneImpl::forward(const torch::Tensor& frame) {
  return fpn(encoder(stem(frame)));
}

}  // namespace rfseg
