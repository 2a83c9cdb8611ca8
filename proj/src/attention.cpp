#include "rfseg/attention.hpp"

#include <cmath>

namespace rfseg {

MultiheadAttentionImpl::MultiheadAttentionImpl(int64_t query_dim,
                                               int64_t kv_dim, int64_t heads_)
    : heads(heads_) {
  check_value(query_dim % heads == 0, "query dim must divide by head count");
  head_dim = query_dim / heads;
  q_proj = register_module("q_proj", torch::nn::Linear(query_dim, query_dim));
  k_proj = register_module("k_proj", torch::nn::Linear(kv_dim, query_dim));
  v_proj = register_module("v_proj", torch::nn::Linear(kv_dim, query_dim));
  out_proj =
      register_module("out_proj", torch::nn::Linear(query_dim, query_dim));
}

torch::Tensor MultiheadAttentionImpl::forward(
    const torch::Tensor& q, const torch::Tensor& k, const torch::Tensor& v,
    const torch::Tensor& key_padding_mask) {
  const auto B = q.size(0), Tq = q.size(1), Tk = k.size(1);
  auto split = [&](torch::Tensor t, int64_t tokens) {
    return t.reshape({B, tokens, heads, head_dim}).transpose(1, 2);
  };
  auto qh = split(q_proj(q), Tq);            // [B, h, Tq, d]
  auto kh = split(k_proj(k), Tk);
  auto vh = split(v_proj(v), Tk);
  auto scores = torch::matmul(qh, kh.transpose(-2, -1)) /
                std::sqrt(static_cast<double>(head_dim));
  if (key_padding_mask.defined()) {
    check_shape(key_padding_mask.sizes() == torch::IntArrayRef({B, Tk}),
                "key padding mask must be [B, Tk]");
    auto mask = key_padding_mask.reshape({B, 1, 1, Tk});
    scores = scores.masked_fill(mask, -1e9);
  }
  auto attn = torch::softmax(scores, -1);
  auto out = torch::matmul(attn, vh)           // [B, h, Tq, d]
                 .transpose(1, 2)
                 .reshape({B, Tq, heads * head_dim});
  return out_proj(out);
}

MlpImpl::MlpImpl(int64_t dim, int64_t hidden, int64_t out) {
  fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
  fc2 = register_module("fc2", torch::nn::Linear(hidden, out > 0 ? out : dim));
}

torch::Tensor MlpImpl::forward(const torch::Tensor& x) {
  return fc2(torch::gelu(fc1(x)));
}

torch::Tensor sinusoidal_encoding(const torch::Tensor& positions, int64_t dim) {
  check_value(dim % 2 == 0, "sinusoidal encoding needs an even dim");
  auto pos = positions.to(torch::kFloat32).reshape({-1, 1});
  auto i = torch::arange(dim / 2, torch::kFloat32);
  auto freq = torch::exp(-std::log(10000.0) * 2.0 * i / static_cast<double>(dim));
  auto angles = pos * freq.reshape({1, -1});
  return torch::cat({torch::sin(angles), torch::cos(angles)}, -1);
}

torch::Tensor coordinate_encoding(const torch::Tensor& rows_cols, int64_t dim) {
  check_value(dim % 4 == 0, "coordinate encoding needs dim divisible by 4");
  check_shape(rows_cols.dim() == 2 && rows_cols.size(1) == 2,
              "coordinates must be [N, 2]");
  auto r = sinusoidal_encoding(rows_cols.select(1, 0) * 64.0, dim / 2);
  auto c = sinusoidal_encoding(rows_cols.select(1, 1) * 64.0, dim / 2);
  return torch::cat({r, c}, -1);
}

}  // namespace rfseg
