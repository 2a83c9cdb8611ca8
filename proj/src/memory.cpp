#include "rfseg/memory.hpp"

#include <algorithm>

namespace rfseg {

std::string to_string(FrameStrategy s) {
  switch (s) {
    case FrameStrategy::OriginalPromptedZero: return "original_prompted_zero";
    case FrameStrategy::CurrentAsZero: return "current_as_zero";
    case FrameStrategy::BidirectionalA: return "bidirectional_a";
    case FrameStrategy::BidirectionalB: return "bidirectional_b";
  }
  return "?";
}

FrameStrategy frame_strategy_from_string(const std::string& name) {
  if (name == "original_prompted_zero") return FrameStrategy::OriginalPromptedZero;
  if (name == "current_as_zero") return FrameStrategy::CurrentAsZero;
  if (name == "bidirectional_a") return FrameStrategy::BidirectionalA;
  if (name == "bidirectional_b") return FrameStrategy::BidirectionalB;
  throw ConfigError("unknown frame strategy: " + name);
}

void MemoryBank::add(MemoryEntry entry) {
  check_value(find(entry.frame_index, entry.origin) == nullptr,
              "duplicate memory entry for frame " +
                  std::to_string(entry.frame_index));
  entries_.push_back(std::move(entry));
}

const MemoryEntry* MemoryBank::find(int64_t frame, MemoryOrigin origin) const {
  for (const auto& e : entries_) {
    if (e.frame_index == frame && e.origin == origin) return &e;
  }
  return nullptr;
}

const MemoryEntry* MemoryBank::latest(int64_t frame) const {
  if (const auto* refined = find(frame, MemoryOrigin::Step2)) return refined;
  return find(frame, MemoryOrigin::Step1);
}

namespace {

const MemoryEntry* previous_entry(const MemoryBank& bank, int64_t frame,
                                  bool read_refined) {
  return read_refined ? bank.latest(frame)
                      : bank.find(frame, MemoryOrigin::Step1);
}

std::vector<SelectedMemory> select_current_as_zero(
    int64_t t, const MemoryBank& bank, const FrameSelectionConfig& cfg) {
  const auto* own = bank.find(t, MemoryOrigin::Step1);
  check_value(own != nullptr,
              "current-as-zero selection needs the current frame's first-pass "
              "memory (frame " + std::to_string(t) + ")");
  std::vector<SelectedMemory> out{{own, 0}};
  for (int64_t k = 1; k <= cfg.window; ++k) {
    const int64_t idx = t - k;
    if (idx < 0) break;
    if (const auto* e = previous_entry(bank, idx, cfg.read_refined)) {
      out.push_back({e, k});
    }
  }
  return out;
}

std::vector<SelectedMemory> select_original(int64_t t, const MemoryBank& bank,
                                            const FrameSelectionConfig& cfg) {
  std::vector<SelectedMemory> out;
  const size_t cap = static_cast<size_t>(cfg.window) + 1;
  // prompted frames first, nearest to t, all pinned at position 0
  for (int64_t k = 0; k <= t && out.size() < cap; ++k) {
    const auto* e = previous_entry(bank, t - k, cfg.read_refined);
    if (e && e->prompted) out.push_back({e, 0});
  }
  // then previous unprompted frames; closer frames get higher positions
  for (int64_t k = 1; k <= cfg.window && out.size() < cap; ++k) {
    const int64_t idx = t - k;
    if (idx < 0) break;
    const auto* e = previous_entry(bank, idx, cfg.read_refined);
    if (e && !e->prompted) out.push_back({e, cfg.window + 1 - k});
  }
  check_value(!out.empty(), "frame selection produced no candidates");
  return out;
}

std::vector<SelectedMemory> select_bidirectional(
    int64_t t, const MemoryBank& bank, const FrameSelectionConfig& cfg,
    int64_t half_window) {
  const auto* own = bank.find(t, MemoryOrigin::Step1);
  check_value(own != nullptr, "bidirectional selection needs the current frame");
  std::vector<SelectedMemory> out{{own, 0}};
  for (int64_t k = 1; k <= half_window; ++k) {
    if (const auto* e = (t - k >= 0)
                            ? previous_entry(bank, t - k, cfg.read_refined)
                            : nullptr) {
      out.push_back({e, k});
    }
    // future frames only ever have first-pass memories in a forward sweep
    if (const auto* e = bank.find(t + k, MemoryOrigin::Step1)) {
      out.push_back({e, k});
    }
  }
  return out;
}

}  // namespace

std::vector<SelectedMemory> select_frames(int64_t t, const MemoryBank& bank,
                                          const FrameSelectionConfig& config) {
  check_value(!bank.empty(), "frame selection over an empty memory bank");
  check_value(config.window >= 1, "selection window must be >= 1");
  switch (config.strategy) {
    case FrameStrategy::CurrentAsZero:
      return select_current_as_zero(t, bank, config);
    case FrameStrategy::OriginalPromptedZero:
      return select_original(t, bank, config);
    case FrameStrategy::BidirectionalA:
      return select_bidirectional(t, bank, config, config.window / 2);
    case FrameStrategy::BidirectionalB:
      return select_bidirectional(t, bank, config, config.window);
  }
  throw Error("unreachable strategy");
}

MemoryEncoderImpl::MemoryEncoderImpl(int64_t embed_channels,
                                     int64_t mem_channels_,
                                     int64_t downsample_factor,
                                     int64_t adapter_ratio)
    : mem_channels(mem_channels_), factor(downsample_factor) {
  check_value((factor & (factor - 1)) == 0,
              "mask downsample factor must be a power of two");
  down_convs = register_module("down_convs", torch::nn::ModuleList());
  int64_t c_in = 2;
  int64_t c_out = 4;
  for (int64_t f = factor; f > 1; f /= 2) {
    down_convs->push_back(
        torch::nn::Conv2d(torch::nn::Conv2dOptions(c_in, c_out, 2).stride(2)));
    c_in = c_out;
    c_out = std::min(c_out * 2, mem_channels);
  }
  down_proj = register_module(
      "down_proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(c_in, mem_channels, 1)));
  downsampler_adapter = register_module(
      "downsampler_adapter",
      CnnAdapter(AdapterSpec{AdapterKind::Cnn, mem_channels, adapter_ratio}));
  feat_proj = register_module(
      "feat_proj",
      torch::nn::Conv2d(torch::nn::Conv2dOptions(embed_channels, mem_channels, 1)));
  fuser_convs = register_module("fuser_convs", torch::nn::ModuleList());
  for (int i = 0; i < 2; ++i) {
    fuser_convs->push_back(torch::nn::Conv2d(
        torch::nn::Conv2dOptions(mem_channels, mem_channels, 3).padding(1)));
  }
  fuser_adapter = register_module(
      "fuser_adapter",
      CnnAdapter(AdapterSpec{AdapterKind::Cnn, mem_channels, adapter_ratio}));
}

torch::Tensor MemoryEncoderImpl::forward(const torch::Tensor& features,
                                         const torch::Tensor& mask_planes) {
  check_shape(features.dim() == 3 && mask_planes.dim() == 3 &&
                  mask_planes.size(0) == 2,
              "memory encoder expects [C_e, h, w] features and [2, H, W] masks");
  check_shape(mask_planes.size(1) == features.size(1) * factor &&
                  mask_planes.size(2) == features.size(2) * factor,
              "mask resolution does not reduce onto the feature grid by the "
              "stride-2 chain");
  auto m = mask_planes.unsqueeze(0);
  for (auto& conv : *down_convs) {
    m = torch::gelu(conv->as<torch::nn::Conv2dImpl>()->forward(m));
  }
  m = downsampler_adapter(down_proj(m));
  auto fused = feat_proj(features.unsqueeze(0)) + m;
  for (auto& conv : *fuser_convs) {
    fused = torch::gelu(conv->as<torch::nn::Conv2dImpl>()->forward(fused));
  }
  return fuser_adapter(fused).squeeze(0);
}

MemoryAttentionBlockImpl::MemoryAttentionBlockImpl(int64_t dim, int64_t kv_dim,
                                                   int64_t heads,
                                                   int64_t adapter_ratio) {
  self_attn = register_module("self_attn", MultiheadAttention(dim, dim, heads));
  cross_attn =
      register_module("cross_attn", MultiheadAttention(dim, kv_dim, heads));
  const AdapterSpec spec{AdapterKind::DWConv, dim, adapter_ratio};
  self_attn_adapter = register_module("self_attn_adapter", DWConvAdapter(spec));
  cross_attn_adapter =
      register_module("cross_attn_adapter", DWConvAdapter(spec));
  mlp = register_module("mlp", Mlp(dim, dim * 4));
  norm1 = register_module("norm1",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm3 = register_module("norm3",
                          torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
}

torch::Tensor MemoryAttentionBlockImpl::forward(const torch::Tensor& tokens,
                                                const torch::Tensor& memory,
                                                int64_t h, int64_t w) {
  auto n = norm1(tokens);
  auto x = tokens + self_attn_adapter->forward_tokens(self_attn(n, n, n), h, w);
  auto c = cross_attn(norm2(x), memory, memory);
  x = x + cross_attn_adapter->forward_tokens(c, h, w);
  return x + mlp(norm3(x));
}

MemoryAttentionImpl::MemoryAttentionImpl(int64_t embed_channels,
                                         int64_t mem_channels_, int64_t heads,
                                         int64_t blocks_count,
                                         int64_t adapter_ratio)
    : mem_channels(mem_channels_) {
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < blocks_count; ++i) {
    blocks->push_back(MemoryAttentionBlock(embed_channels, mem_channels, heads,
                                           adapter_ratio));
  }
  pointer_proj = register_module(
      "pointer_proj", torch::nn::Linear(embed_channels, mem_channels));
}

torch::Tensor MemoryAttentionImpl::forward(
    const torch::Tensor& features, const std::vector<SelectedMemory>& selected) {
  check_shape(features.dim() == 3, "memory attention expects [C_e, h, w]");
  check_value(!selected.empty(), "memory attention needs a nonempty selection");
  const int64_t h = features.size(1), w = features.size(2);

  std::vector<torch::Tensor> mem_tokens;
  for (const auto& sel : selected) {
    check_value(sel.entry != nullptr, "null memory entry in selection");
    auto pos_enc = sinusoidal_encoding(
        torch::tensor({static_cast<float>(sel.position)}), mem_channels);
    auto feat_tokens =
        sel.entry->feature.flatten(1).transpose(0, 1) + pos_enc;  // [h*w, C_m]
    mem_tokens.push_back(feat_tokens);
    if (sel.entry->object_pointers.defined() &&
        sel.entry->object_pointers.numel() > 0) {
      auto ptr_tokens = pointer_proj(sel.entry->object_pointers) + pos_enc;
      mem_tokens.push_back(ptr_tokens);
    }
  }
  auto memory = torch::cat(mem_tokens, 0).unsqueeze(0);  // [1, M, C_m]

  auto tokens = features.flatten(1).transpose(0, 1).unsqueeze(0);  // [1, N, C_e]
  for (auto& block : *blocks) {
    tokens = block->as<MemoryAttentionBlockImpl>()->forward(tokens, memory, h, w);
  }
  return tokens.squeeze(0).transpose(0, 1).reshape_as(features);
}

}  // namespace rfseg
