#pragma once

#include <torch/torch.h>

#include <string>
#include <vector>

#include "rfseg/errors.hpp"

namespace rfseg {

enum class AdapterKind { Plain, DWConv, Cnn };

std::string to_string(AdapterKind k);

// All adapters are residual bottlenecks whose up-projection starts at zero,
// so a freshly inserted adapter is an exact identity on its host.
struct AdapterSpec {
  AdapterKind kind = AdapterKind::Plain;
  int64_t channels = 0;
  int64_t bottleneck_ratio = 4;  // hidden width = channels / ratio

  int64_t hidden() const;
};

// x + Up(GELU(Down(x))) over token channels.
class PlainAdapterImpl : public torch::nn::Module {
 public:
  explicit PlainAdapterImpl(AdapterSpec spec);

  torch::Tensor forward(const torch::Tensor& x);  // [..., C]
  torch::Tensor delta(const torch::Tensor& x);    // branch only, no residual

  torch::nn::Linear down{nullptr}, up{nullptr};
  AdapterSpec spec;
  bool bypass = false;
};
TORCH_MODULE(PlainAdapter);

// x + Up(GELU(LN(DWConv(GELU(Down(x)))))) with the skip carrying x through.
// Operates on spatial maps; token inputs are reshaped to their (h, w) grid.
class DWConvAdapterImpl : public torch::nn::Module {
 public:
  explicit DWConvAdapterImpl(AdapterSpec spec);

  torch::Tensor forward(const torch::Tensor& x);  // [B, C, H, W]
  torch::Tensor forward_tokens(const torch::Tensor& x, int64_t h,
                               int64_t w);  // [B, T, C], T == h*w

  torch::nn::Linear down{nullptr}, up{nullptr};
  torch::nn::Conv2d dw{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  AdapterSpec spec;
  bool bypass = false;
};
TORCH_MODULE(DWConvAdapter);

// x + PWup(GELU(LN(DW(PWdown(x))))) for convolutional hosts.
class CnnAdapterImpl : public torch::nn::Module {
 public:
  explicit CnnAdapterImpl(AdapterSpec spec);

  torch::Tensor forward(const torch::Tensor& x);  // [B, C, H, W] or [C, H, W]

  torch::nn::Conv2d pw_down{nullptr}, dw{nullptr}, pw_up{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  AdapterSpec spec;
  bool bypass = false;
};
TORCH_MODULE(CnnAdapter);

// Flips the runtime bypass flag on every adapter under `root` (inclusive).
// Bypassed adapters forward their input untouched; parameters stay put.
void set_adapter_bypass(torch::nn::Module& root, bool bypass);

// Adapter parameters are recognized by module path ("...adapter...").
bool is_adapter_parameter(const std::string& qualified_name);

// Where each adapter kind sits inside the segmenter.
struct InsertionPoint {
  std::string host;
  AdapterKind kind;
};

const std::vector<InsertionPoint>& insertion_registry();
std::string insertion_manifest();  // human-readable table of the registry

}  // namespace rfseg
