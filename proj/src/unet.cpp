#include "rfseg/unet.hpp"

#include "rfseg/attention.hpp"

namespace rfseg {

std::string to_string(UNetArch a) {
  switch (a) {
    case UNetArch::UNet3D: return "unet3d";
    case UNetArch::UNet2D: return "unet2d";
    case UNetArch::UNet2DAttn: return "unet2d_attn";
    case UNetArch::UNet3DAttn: return "unet3d_attn";
  }
  return "?";
}

UNetArch unet_arch_from_string(const std::string& name) {
  if (name == "unet3d") return UNetArch::UNet3D;
  if (name == "unet2d") return UNetArch::UNet2D;
  if (name == "unet2d_attn") return UNetArch::UNet2DAttn;
  if (name == "unet3d_attn") return UNetArch::UNet3DAttn;
  throw ConfigError("unknown unet arch: " + name);
}

namespace {

bool is_2d(UNetArch a) {
  return a == UNetArch::UNet2D || a == UNetArch::UNet2DAttn;
}

bool has_attn(UNetArch a) {
  return a == UNetArch::UNet2DAttn || a == UNetArch::UNet3DAttn;
}

// conv(stride) + instance norm + leaky relu, twice; strided axes downsample
// with kernel == stride so the grid stays mirror-aligned
torch::nn::Sequential conv_block(int64_t in, int64_t out,
                                 std::array<int64_t, 3> stride) {
  using namespace torch::nn;
  std::vector<int64_t> k1(3), p1(3);
  for (int a = 0; a < 3; ++a) {
    k1[a] = stride[a] == 1 ? 3 : stride[a];
    p1[a] = stride[a] == 1 ? 1 : 0;
  }
  auto opts1 = Conv3dOptions(in, out, {k1[0], k1[1], k1[2]})
                   .stride({stride[0], stride[1], stride[2]})
                   .padding({p1[0], p1[1], p1[2]});
  auto opts2 = Conv3dOptions(out, out, 3).padding(1);
  return Sequential(
      Conv3d(opts1), InstanceNorm3d(InstanceNorm3dOptions(out).affine(true)),
      LeakyReLU(LeakyReLUOptions().negative_slope(0.01)), Conv3d(opts2),
      InstanceNorm3d(InstanceNorm3dOptions(out).affine(true)),
      LeakyReLU(LeakyReLUOptions().negative_slope(0.01)));
}

}  // namespace

UNetImpl::UNetImpl(UNetConfig cfg) : config(cfg) {
  check_value(config.stages >= 2, "unet needs at least two stages");
  check_value(config.deep_supervision >= 1 &&
                  config.deep_supervision <= config.stages - 1,
              "deep supervision level count out of range");

  // Per-axis strides per stage: halve an axis while it stays divisible and
  // at least 4 voxels deep; 2-D variants never pool the depth axis.
  std::array<int64_t, 3> size = config.patch_size;
  stage_strides.push_back({1, 1, 1});  // stage 0 keeps full resolution
  for (int s = 1; s < config.stages; ++s) {
    std::array<int64_t, 3> stride{1, 1, 1};
    for (int axis = 0; axis < 3; ++axis) {
      const bool frozen = axis == 0 && is_2d(config.arch);
      if (!frozen && size[axis] % 2 == 0 && size[axis] >= 4) {
        stride[axis] = 2;
        size[axis] /= 2;
      }
    }
    check_value(stride != std::array<int64_t, 3>{1, 1, 1},
                "patch too small to build " + std::to_string(config.stages) +
                    " stages");
    stage_strides.push_back(stride);
  }

  enc_blocks = register_module("enc_blocks", torch::nn::ModuleList());
  dec_blocks = register_module("dec_blocks", torch::nn::ModuleList());
  up_convs = register_module("up_convs", torch::nn::ModuleList());
  heads = register_module("heads", torch::nn::ModuleList());
  bottleneck_attn = register_module("bottleneck_attn", torch::nn::ModuleList());

  int64_t in = config.in_channels;
  std::vector<int64_t> widths;
  for (int s = 0; s < config.stages; ++s) {
    const int64_t out = config.base_channels << s;
    enc_blocks->push_back(conv_block(in, out, stage_strides[s]));
    widths.push_back(out);
    in = out;
  }
  if (has_attn(config.arch)) {
    bottleneck_attn->push_back(
        torch::nn::LayerNorm(torch::nn::LayerNormOptions({widths.back()})));
    bottleneck_attn->push_back(MultiheadAttention(widths.back(), widths.back(), 4));
  }
  for (int s = config.stages - 1; s >= 1; --s) {
    const auto stride = stage_strides[s];
    up_convs->push_back(torch::nn::ConvTranspose3d(
        torch::nn::ConvTranspose3dOptions(widths[s], widths[s - 1],
                                          {stride[0], stride[1], stride[2]})
            .stride({stride[0], stride[1], stride[2]})));
    dec_blocks->push_back(conv_block(2 * widths[s - 1], widths[s - 1], {1, 1, 1}));
  }
  for (int level = 0; level < config.deep_supervision; ++level) {
    heads->push_back(torch::nn::Conv3d(torch::nn::Conv3dOptions(
        widths[level], config.num_classes + 1, 1)));
  }
}

UNetOutput UNetImpl::forward(const torch::Tensor& patch) {
  check_shape(patch.dim() == 5 && patch.size(1) == config.in_channels,
              "unet expects [B, M, D, H, W]");
  std::array<int64_t, 3> total{1, 1, 1};
  for (const auto& s : stage_strides) {
    for (int a = 0; a < 3; ++a) total[a] *= s[a];
  }
  for (int a = 0; a < 3; ++a) {
    check_shape(patch.size(2 + a) % total[a] == 0,
                "patch axis " + std::to_string(a) + " (" +
                    std::to_string(patch.size(2 + a)) +
                    ") not divisible by the stage stride product " +
                    std::to_string(total[a]));
  }

  auto x = patch;
  std::vector<torch::Tensor> skips;
  for (auto& block : *enc_blocks) {
    x = block->as<torch::nn::SequentialImpl>()->forward(x);
    skips.push_back(x);
  }
  if (!bottleneck_attn->is_empty()) {
    const auto sizes = x.sizes().vec();
    auto tokens = x.flatten(2).transpose(1, 2);  // [B, DHW, C]
    auto n = bottleneck_attn[0]->as<torch::nn::LayerNormImpl>()->forward(tokens);
    auto a = bottleneck_attn[1]->as<MultiheadAttentionImpl>()->forward(n, n, n);
    x = (tokens + a).transpose(1, 2).reshape(sizes);
  }
  UNetOutput out;
  std::vector<torch::Tensor> level_features(config.stages);
  level_features[config.stages - 1] = x;
  for (size_t i = 0; i < up_convs->size(); ++i) {
    const int target = config.stages - 2 - static_cast<int>(i);
    auto up = up_convs[i]->as<torch::nn::ConvTranspose3dImpl>()->forward(x);
    x = dec_blocks[i]->as<torch::nn::SequentialImpl>()->forward(
        torch::cat({up, skips[target]}, 1));
    level_features[target] = x;
  }
  out.logits = heads[0]->as<torch::nn::Conv3dImpl>()->forward(level_features[0]);
  for (int level = 1; level < config.deep_supervision; ++level) {
    out.aux.push_back(
        heads[level]->as<torch::nn::Conv3dImpl>()->forward(level_features[level]));
  }
  return out;
}

torch::Tensor normalize_volume(const Volume& volume) {
  auto x = volume.data;
  auto mean = x.mean({1, 2, 3}, /*keepdim=*/true);
  auto std = x.std({1, 2, 3}, /*unbiased=*/false, /*keepdim=*/true);
  return (x - mean) / (std + 1e-6);
}

torch::Tensor sliding_window_probabilities(UNet& net, const Volume& volume) {
  torch::NoGradGuard guard;
  net->eval();
  const auto patch = net->config.patch_size;
  const int64_t D = volume.depth(), H = volume.height(), W = volume.width();
  check_shape(D >= patch[0] && H >= patch[1] && W >= patch[2],
              "volume smaller than the inference patch");
  auto data = normalize_volume(volume);
  auto prob_sum =
      torch::zeros({net->config.num_classes + 1, D, H, W}, torch::kFloat32);
  auto counts = torch::zeros({1, D, H, W}, torch::kFloat32);

  auto starts = [](int64_t full, int64_t win) {
    std::vector<int64_t> s;
    const int64_t step = std::max<int64_t>(win / 2, 1);
    for (int64_t v = 0;; v += step) {
      if (v + win >= full) {
        s.push_back(full - win);
        break;
      }
      s.push_back(v);
    }
    return s;
  };

  using torch::indexing::Slice;
  for (int64_t z : starts(D, patch[0])) {
    for (int64_t y : starts(H, patch[1])) {
      for (int64_t x : starts(W, patch[2])) {
        auto window = data.index({Slice(), Slice(z, z + patch[0]),
                                  Slice(y, y + patch[1]), Slice(x, x + patch[2])});
        auto logits = net->forward(window.unsqueeze(0)).logits.squeeze(0);
        auto probs = torch::softmax(logits, 0);
        prob_sum.index_put_({Slice(), Slice(z, z + patch[0]),
                             Slice(y, y + patch[1]), Slice(x, x + patch[2])},
                            prob_sum.index({Slice(), Slice(z, z + patch[0]),
                                            Slice(y, y + patch[1]),
                                            Slice(x, x + patch[2])}) +
                                probs);
        counts.index_put_({Slice(), Slice(z, z + patch[0]),
                           Slice(y, y + patch[1]), Slice(x, x + patch[2])},
                          counts.index({Slice(), Slice(z, z + patch[0]),
                                        Slice(y, y + patch[1]),
                                        Slice(x, x + patch[2])}) +
                              1.0);
      }
    }
  }
  return prob_sum / counts;
}

LabelVolume sliding_window_predict(UNet& net, const Volume& volume) {
  auto probs = sliding_window_probabilities(net, volume);
  return LabelVolume(probs.argmax(0), net->config.num_classes);
}

}  // namespace rfseg
