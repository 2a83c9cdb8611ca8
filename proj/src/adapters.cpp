#include "rfseg/adapters.hpp"

#include <sstream>

namespace rfseg {

std::string to_string(AdapterKind k) {
  switch (k) {
    case AdapterKind::Plain: return "plain";
    case AdapterKind::DWConv: return "dwconv";
    case AdapterKind::Cnn: return "cnn";
  }
  return "?";
}

int64_t AdapterSpec::hidden() const {
  check_value(channels > 0 && bottleneck_ratio > 0 &&
                  channels / bottleneck_ratio >= 1,
              "adapter bottleneck must keep at least one hidden channel");
  return channels / bottleneck_ratio;
}

namespace {

void zero_up_init(torch::nn::Linear& up) {
  torch::NoGradGuard g;
  up->weight.zero_();
  up->bias.zero_();
}

void zero_up_init(torch::nn::Conv2d& up) {
  torch::NoGradGuard g;
  up->weight.zero_();
  up->bias.zero_();
}

void check_channels(const torch::Tensor& x, int64_t dim, int64_t expected,
                    const char* who) {
  check_shape(x.size(dim) == expected,
              std::string(who) + ": expected " + std::to_string(expected) +
                  " channels, got " + std::to_string(x.size(dim)));
}

}  // namespace

PlainAdapterImpl::PlainAdapterImpl(AdapterSpec s) : spec(s) {
  const int64_t h = spec.hidden();
  down = register_module("down", torch::nn::Linear(spec.channels, h));
  up = register_module("up", torch::nn::Linear(h, spec.channels));
  zero_up_init(up);
}

torch::Tensor PlainAdapterImpl::delta(const torch::Tensor& x) {
  check_channels(x, -1, spec.channels, "plain adapter");
  return up(torch::gelu(down(x)));
}

torch::Tensor PlainAdapterImpl::forward(const torch::Tensor& x) {
  if (bypass) return x;
  return x + delta(x);
}

DWConvAdapterImpl::DWConvAdapterImpl(AdapterSpec s) : spec(s) {
  const int64_t h = spec.hidden();
  down = register_module("down", torch::nn::Linear(spec.channels, h));
  dw = register_module(
      "dw", torch::nn::Conv2d(
                torch::nn::Conv2dOptions(h, h, 3).padding(1).groups(h)));
  norm = register_module("norm",
                         torch::nn::LayerNorm(torch::nn::LayerNormOptions({h})));
  up = register_module("up", torch::nn::Linear(h, spec.channels));
  zero_up_init(up);
}

torch::Tensor DWConvAdapterImpl::forward(const torch::Tensor& x) {
  if (bypass) return x;
  check_shape(x.dim() == 4, "dwconv adapter: expected [B, C, H, W]");
  check_channels(x, 1, spec.channels, "dwconv adapter");
  // tokens-last layout for the linear projections
  auto t = x.permute({0, 2, 3, 1});              // [B, H, W, C]
  auto z = torch::gelu(down(t));                 // [B, H, W, h]
  z = z.permute({0, 3, 1, 2});                   // [B, h, H, W]
  z = dw(z);
  z = z.permute({0, 2, 3, 1});                   // [B, H, W, h]
  z = torch::gelu(norm(z));
  auto d = up(z).permute({0, 3, 1, 2});          // [B, C, H, W]
  return x + d;
}

torch::Tensor DWConvAdapterImpl::forward_tokens(const torch::Tensor& x,
                                                int64_t h, int64_t w) {
  if (bypass) return x;
  check_shape(x.dim() == 3, "dwconv adapter: expected [B, T, C] tokens");
  check_shape(x.size(1) == h * w,
              "dwconv adapter: token count " + std::to_string(x.size(1)) +
                  " does not reshape to " + std::to_string(h) + "x" +
                  std::to_string(w));
  auto grid = x.transpose(1, 2).reshape({x.size(0), x.size(2), h, w});
  auto out = forward(grid);
  return out.reshape({x.size(0), x.size(2), h * w}).transpose(1, 2);
}

CnnAdapterImpl::CnnAdapterImpl(AdapterSpec s) : spec(s) {
  const int64_t h = spec.hidden();
  pw_down = register_module(
      "pw_down", torch::nn::Conv2d(torch::nn::Conv2dOptions(spec.channels, h, 1)));
  dw = register_module(
      "dw", torch::nn::Conv2d(
                torch::nn::Conv2dOptions(h, h, 3).padding(1).groups(h)));
  norm = register_module("norm",
                         torch::nn::LayerNorm(torch::nn::LayerNormOptions({h})));
  pw_up = register_module(
      "pw_up", torch::nn::Conv2d(torch::nn::Conv2dOptions(h, spec.channels, 1)));
  zero_up_init(pw_up);
}

torch::Tensor CnnAdapterImpl::forward(const torch::Tensor& x) {
  if (bypass) return x;
  const bool batched = x.dim() == 4;
  check_shape(batched || x.dim() == 3,
              "cnn adapter: expected [B, C, H, W] or [C, H, W]");
  auto in = batched ? x : x.unsqueeze(0);
  check_channels(in, 1, spec.channels, "cnn adapter");
  auto z = pw_down(in);
  z = dw(z);
  z = z.permute({0, 2, 3, 1});
  z = torch::gelu(norm(z));
  z = z.permute({0, 3, 1, 2});
  auto out = in + pw_up(z);
  return batched ? out : out.squeeze(0);
}

void set_adapter_bypass(torch::nn::Module& root, bool bypass) {
  auto flip = [bypass](torch::nn::Module& m) {
    if (auto* a = dynamic_cast<PlainAdapterImpl*>(&m)) a->bypass = bypass;
    if (auto* a = dynamic_cast<DWConvAdapterImpl*>(&m)) a->bypass = bypass;
    if (auto* a = dynamic_cast<CnnAdapterImpl*>(&m)) a->bypass = bypass;
  };
  flip(root);
  for (const auto& m : root.modules(/*include_self=*/false)) flip(*m);
}

bool is_adapter_parameter(const std::string& qualified_name) {
  return qualified_name.find("adapter") != std::string::npos;
}

const std::vector<InsertionPoint>& insertion_registry() {
  static const std::vector<InsertionPoint> registry = {
      {"encoder.attention_block", AdapterKind::DWConv},
      {"fpn.output", AdapterKind::Cnn},
      {"decoder.token_self_attention", AdapterKind::Plain},
      {"decoder.token_to_image_attention", AdapterKind::Plain},
      {"decoder.mlp_parallel", AdapterKind::Plain},
      {"decoder.image_to_token_attention", AdapterKind::DWConv},
      {"decoder.upsampling_convs", AdapterKind::Cnn},
      {"memory_encoder.mask_downsampler", AdapterKind::Cnn},
      {"memory_encoder.fuser", AdapterKind::Cnn},
      {"memory_attention.attention_block", AdapterKind::DWConv},
  };
  return registry;
}

std::string insertion_manifest() {
  std::ostringstream os;
  os << "host                                  adapter\n";
  os << "------------------------------------  -------\n";
  for (const auto& p : insertion_registry()) {
    os << p.host;
    for (size_t i = p.host.size(); i < 38; ++i) os << ' ';
    os << to_string(p.kind) << "\n";
  }
  return os.str();
}

}  // namespace rfseg
