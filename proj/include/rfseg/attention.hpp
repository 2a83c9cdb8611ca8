#pragma once

#include <torch/torch.h>

#include "rfseg/errors.hpp"

namespace rfseg {

// Multi-head attention over token sets, with distinct query / key-value
// widths and an optional key padding mask (true = ignore that key).
class MultiheadAttentionImpl : public torch::nn::Module {
 public:
  MultiheadAttentionImpl(int64_t query_dim, int64_t kv_dim, int64_t heads);

  torch::Tensor forward(const torch::Tensor& q,  // [B, Tq, Cq]
                        const torch::Tensor& k,  // [B, Tk, Ckv]
                        const torch::Tensor& v,  // [B, Tk, Ckv]
                        const torch::Tensor& key_padding_mask = {});

  torch::nn::Linear q_proj{nullptr}, k_proj{nullptr}, v_proj{nullptr},
      out_proj{nullptr};
  int64_t heads = 1;
  int64_t head_dim = 0;
};
TORCH_MODULE(MultiheadAttention);

// Two-layer GELU MLP used by the transformer blocks.
class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t dim, int64_t hidden, int64_t out = 0);
  torch::Tensor forward(const torch::Tensor& x);

  torch::nn::Linear fc1{nullptr}, fc2{nullptr};
};
TORCH_MODULE(Mlp);

// Fixed sinusoidal encoding of scalar positions into `dim` channels.
torch::Tensor sinusoidal_encoding(const torch::Tensor& positions, int64_t dim);

// Fixed sinusoidal encoding of normalized 2-D coordinates into `dim` channels
// (half the channels per axis).
torch::Tensor coordinate_encoding(const torch::Tensor& rows_cols,  // [N, 2] in [0,1]
                                  int64_t dim);

}  // namespace rfseg
