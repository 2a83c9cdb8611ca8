#include "rfseg/prompt_encoder.hpp"

namespace rfseg {

PromptEncoderImpl::PromptEncoderImpl(int64_t embed_channels,
                                     int64_t mask_downsample_factor)
    : channels(embed_channels), downsample_factor(mask_downsample_factor) {
  check_value((downsample_factor & (downsample_factor - 1)) == 0,
              "mask downsample factor must be a power of two");
  label_embed = register_module("label_embed", torch::nn::Embedding(5, channels));
  no_mask_embed =
      register_module("no_mask_embed", torch::nn::Embedding(1, channels));
  mask_convs = register_module("mask_convs", torch::nn::ModuleList());
  int64_t c_in = 1;
  int64_t c_out = std::max<int64_t>(channels / 8, 4);
  for (int64_t f = downsample_factor; f > 1; f /= 2) {
    mask_convs->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(c_in, c_out, 2).stride(2)));
    c_in = c_out;
    c_out = std::min(c_out * 2, channels);
  }
  mask_proj = register_module(
      "mask_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(c_in, channels, 1)));
}

int64_t PromptEncoderImpl::label_index(int label) {
  check_value(label >= -1 && label <= 3, "prompt label out of range -1..3");
  return static_cast<int64_t>(label) + 1;
}

namespace {

void check_coord(int64_t row, int64_t col, int64_t h, int64_t w) {
  check_value(row >= 0 && row < h && col >= 0 && col < w,
              "prompt coordinates (" + std::to_string(row) + ", " +
                  std::to_string(col) + ") outside frame " +
                  std::to_string(h) + "x" + std::to_string(w));
}

}  // namespace

torch::Tensor PromptEncoderImpl::encode_sparse(const PromptEntry& entry,
                                               int64_t frame_h,
                                               int64_t frame_w) {
  auto token = [&](int64_t row, int64_t col, int label) {
    check_coord(row, col, frame_h, frame_w);
    auto rc = torch::tensor(
        {{static_cast<float>(row) / static_cast<float>(std::max<int64_t>(frame_h - 1, 1)),
          static_cast<float>(col) / static_cast<float>(std::max<int64_t>(frame_w - 1, 1))}});
    auto pe = coordinate_encoding(rc, channels).squeeze(0);
    return pe + label_embed->weight[label_index(label)];
  };
  if (const auto* box = std::get_if<BoundingBox>(&entry.sparse)) {
    check_value(box->min_row <= box->max_row && box->min_col <= box->max_col,
                "degenerate box: min corner past max corner");
    return torch::stack({token(box->min_row, box->min_col, 2),
                         token(box->max_row, box->max_col, 3)});
  }
  if (const auto* pt = std::get_if<PointPrompt>(&entry.sparse)) {
    check_value(pt->label == 0 || pt->label == 1,
                "point prompts must carry label 0 or 1");
    return torch::stack({token(pt->row, pt->col, pt->label)});
  }
  // no-object: a single token with the dedicated label embedding
  return label_embed->weight[label_index(-1)].unsqueeze(0);
}

EncodedPrompts encode_frame_prompts(PromptEncoder& encoder,
                                    const std::vector<const PromptEntry*>& entries,
                                    int64_t frame_h, int64_t frame_w,
                                    int64_t grid_h, int64_t grid_w) {
  check_value(!entries.empty(), "no prompt entries for this frame");
  std::vector<torch::Tensor> sparse, dense;
  int64_t t_max = 0;
  EncodedPrompts out;
  for (const auto* e : entries) {
    auto s = encoder->encode_sparse(*e, frame_h, frame_w);
    t_max = std::max(t_max, s.size(0));
    sparse.push_back(s);
    dense.push_back(encoder->encode_dense(*e, grid_h, grid_w));
    out.class_ids.push_back(e->class_id);
  }
  const int64_t K = static_cast<int64_t>(entries.size());
  auto padded = torch::zeros({K, t_max, encoder->channels});
  auto mask = torch::ones({K, t_max}, torch::kBool);
  for (int64_t i = 0; i < K; ++i) {
    padded.index_put_({i, torch::indexing::Slice(0, sparse[i].size(0))},
                      sparse[i]);
    mask.index_put_({i, torch::indexing::Slice(0, sparse[i].size(0))}, false);
  }
  out.sparse = padded;
  out.padding = mask;
  out.dense = torch::stack(dense);
  return out;
}

torch::Tensor PromptEncoderImpl::encode_dense(const PromptEntry& entry,
                                              int64_t grid_h, int64_t grid_w) {
  if (!entry.dense_mask.has_value()) {
    return no_mask_embed->weight[0].reshape({channels, 1, 1}).expand(
        {channels, grid_h, grid_w});
  }
  auto mask = entry.dense_mask->to(torch::kFloat32);
  check_shape(mask.dim() == 2, "dense prompt mask must be [H, W]");
  check_shape(mask.size(0) == grid_h * downsample_factor &&
                  mask.size(1) == grid_w * downsample_factor,
              "dense prompt mask does not downsample onto the embedding grid");
  auto x = mask.reshape({1, 1, mask.size(0), mask.size(1)});
  for (auto& conv : *mask_convs) {
    x = torch::gelu(conv->as<torch::nn::Conv2dImpl>()->forward(x));
  }
  return mask_proj(x).squeeze(0);
}

}  // namespace rfseg
