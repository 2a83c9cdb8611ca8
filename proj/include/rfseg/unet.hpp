#pragma once

#include <torch/torch.h>

#include <array>
#include <vector>

#include "rfseg/types.hpp"

namespace rfseg {

enum class UNetArch { UNet3D, UNet2D, UNet2DAttn, UNet3DAttn };

std::string to_string(UNetArch a);
UNetArch unet_arch_from_string(const std::string& name);

struct UNetConfig {
  UNetArch arch = UNetArch::UNet3D;
  int64_t in_channels = 1;
  int64_t num_classes = 4;  // K foreground classes; logits carry K+1 channels
  int64_t base_channels = 16;
  int stages = 4;
  int deep_supervision = 3;  // heads: full resolution + (n-1) coarser levels
  std::array<int64_t, 3> patch_size{32, 64, 64};  // fixes per-axis strides
};

struct UNetOutput {
  torch::Tensor logits;             // [B, K+1, D, H, W]
  std::vector<torch::Tensor> aux;   // coarser heads, finest first
};

// Symmetric encoder-decoder with skip connections, instance-normalized conv
// blocks, per-axis downsampling strides derived from the patch size, and
// optional bottleneck self-attention. The 2-D variants share the same entry
// point and treat depth slices as independent batch items.
class UNetImpl : public torch::nn::Module {
 public:
  explicit UNetImpl(UNetConfig config);

  UNetOutput forward(const torch::Tensor& patch);  // [B, M, D, H, W]

  UNetConfig config;
  std::vector<std::array<int64_t, 3>> stage_strides;  // per stage (d, h, w)

  torch::nn::ModuleList enc_blocks, dec_blocks, up_convs, heads;
  torch::nn::ModuleList bottleneck_attn;  // empty unless an Attn variant
};
TORCH_MODULE(UNet);

// Per-modality z-score normalization over the whole volume.
torch::Tensor normalize_volume(const Volume& volume);

// Sliding-window inference with 50% overlap and uniform averaging of class
// probabilities; windows are clamped to the volume bounds.
LabelVolume sliding_window_predict(UNet& net, const Volume& volume);

// Soft class probabilities from the same sliding-window pass, [K+1, D, H, W].
torch::Tensor sliding_window_probabilities(UNet& net, const Volume& volume);

}  // namespace rfseg
