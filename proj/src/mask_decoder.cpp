#include "rfseg/mask_decoder.hpp"

namespace rfseg {

TwoWayBlockImpl::TwoWayBlockImpl(int64_t dim, int64_t heads,
                                 int64_t adapter_ratio) {
  const AdapterSpec plain{AdapterKind::Plain, dim, adapter_ratio};
  self_attn = register_module("self_attn", MultiheadAttention(dim, dim, heads));
  self_attn_adapter =
      register_module("self_attn_adapter", PlainAdapter(plain));
  cross_t2i = register_module("cross_t2i", MultiheadAttention(dim, dim, heads));
  cross_t2i_adapter =
      register_module("cross_t2i_adapter", PlainAdapter(plain));
  mlp = register_module("mlp", Mlp(dim, dim * 4));
  mlp_adapter = register_module("mlp_adapter", PlainAdapter(plain));
  cross_i2t = register_module("cross_i2t", MultiheadAttention(dim, dim, heads));
  cross_i2t_adapter = register_module(
      "cross_i2t_adapter",
      DWConvAdapter(AdapterSpec{AdapterKind::DWConv, dim, adapter_ratio}));
  norm1 = register_module("norm1",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm3 = register_module("norm3",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm4 = register_module("norm4",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

std::pair<torch::Tensor, torch::Tensor> TwoWayBlockImpl::forward(
    torch::Tensor tokens, torch::Tensor image, const torch::Tensor& image_pe,
    int64_t h, int64_t w, const torch::Tensor& token_padding) {
  // token self-attention
  auto t = norm1(tokens);
  tokens = tokens + self_attn_adapter(self_attn(t, t, t, token_padding));
  // tokens attend to the image
  auto img_keys = image + image_pe;
  tokens = tokens +
           cross_t2i_adapter(cross_t2i(norm2(tokens), img_keys, img_keys));
  // token MLP with a parallel adapter branch
  auto n = norm3(tokens);
  tokens = tokens + mlp(n) + mlp_adapter->delta(n);
  // image attends to the tokens
  auto img_update =
      cross_i2t(norm4(image) + image_pe, tokens, tokens, token_padding);
  image = image + cross_i2t_adapter->forward_tokens(img_update, h, w);
  return {tokens, image};
}

MaskDecoderImpl::MaskDecoderImpl(int64_t embed_channels, int64_t heads,
                                 int64_t adapter_ratio)
    : channels(embed_channels) {
  object_token =
      register_module("object_token", torch::nn::Embedding(1, channels));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < 2; ++i) {
    blocks->push_back(TwoWayBlock(channels, heads, adapter_ratio));
  }
  up1 = register_module(
      "up1", torch::nn::ConvTranspose2d(
                 torch::nn::ConvTranspose2dOptions(channels, channels / 2, 2)
                     .stride(2)));
  up2 = register_module(
      "up2", torch::nn::ConvTranspose2d(
                 torch::nn::ConvTranspose2dOptions(channels / 2, channels / 4, 2)
                     .stride(2)));
  skip2_proj = register_module(
      "skip2_proj",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels / 2, 1)));
  skip1_proj = register_module(
      "skip1_proj",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, channels / 4, 1)));
  upconv_adapter = register_module(
      "upconv_adapter",
      CnnAdapter(AdapterSpec{AdapterKind::Cnn, channels / 4, adapter_ratio}));
  mask_hypernet_head =
      register_module("mask_hypernet_head", Mlp(channels, channels, channels / 4));
  score_head = register_module("score_head", torch::nn::Linear(channels, 1));
  pointer_head = register_module("pointer_head", Mlp(channels, channels, channels));
}

DecoderOutput MaskDecoderImpl::forward(const torch::Tensor& embedding,
                                       const torch::Tensor& skip1,
                                       const torch::Tensor& skip2,
                                       const torch::Tensor& sparse,
                                       const torch::Tensor& sparse_padding,
                                       const torch::Tensor& dense) {
  check_shape(embedding.dim() == 3, "decoder expects an unbatched [C, h, w] embedding");
  check_shape(sparse.dim() == 3 && sparse.size(2) == channels,
              "sparse tokens must be [K, T, C]");
  const int64_t K = sparse.size(0);
  const int64_t h = embedding.size(1), w = embedding.size(2);

  // positional encoding of the embedding grid
  auto ys = torch::arange(h, torch::kFloat32) / std::max<int64_t>(h - 1, 1);
  auto xs = torch::arange(w, torch::kFloat32) / std::max<int64_t>(w - 1, 1);
  auto grid = torch::stack({ys.reshape({h, 1}).expand({h, w}),
                            xs.reshape({1, w}).expand({h, w})},
                           -1)
                  .reshape({h * w, 2});
  auto image_pe = coordinate_encoding(grid, channels).unsqueeze(0).expand(
      {K, h * w, channels});

  // one image token set per object, dense prompt added up front
  auto image = (embedding.unsqueeze(0) + dense)
                   .flatten(2)
                   .transpose(1, 2);  // [K, h*w, C]

  auto obj = object_token->weight.reshape({1, 1, channels}).expand({K, 1, channels});
  auto tokens = torch::cat({obj, sparse}, 1);  // [K, 1+T, C]
  torch::Tensor padding;
  if (sparse_padding.defined()) {
    auto obj_pad = torch::zeros({K, 1}, torch::kBool);
    padding = torch::cat({obj_pad, sparse_padding}, 1);
  }

  for (auto& block : *blocks) {
    std::tie(tokens, image) =
        block->as<TwoWayBlockImpl>()->forward(tokens, image, image_pe, h, w, padding);
  }

  auto obj_out = tokens.select(1, 0);  // [K, C]
  auto img_grid = image.transpose(1, 2).reshape({K, channels, h, w});

  auto x = torch::gelu(up1(img_grid) + skip2_proj(skip2).unsqueeze(0));
  x = torch::gelu(up2(x) + skip1_proj(skip1).unsqueeze(0));
  x = upconv_adapter(x);  // [K, C/4, 4h, 4w]

  auto hyper = mask_hypernet_head(obj_out);  // [K, C/4]
  auto logits = torch::einsum("kc,kchw->khw", {hyper, x});

  DecoderOutput out;
  out.mask_logits = logits;
  out.object_scores = score_head(obj_out).squeeze(-1);
  out.object_pointers = pointer_head(obj_out);
  return out;
}

DecoderOutput object_score_gate(const DecoderOutput& output, bool enabled,
                                double threshold) {
  if (!enabled) return output;
  auto present = torch::sigmoid(output.object_scores) >= threshold;  // [K]
  auto gate = present.reshape({-1, 1, 1}).to(output.mask_logits.dtype());
  DecoderOutput gated = output;
  // absent objects collapse to a strongly negative (all-background) plane
  gated.mask_logits =
      output.mask_logits * gate + (1.0 - gate) * (-1e4);
  return gated;
}

}  // namespace rfseg
