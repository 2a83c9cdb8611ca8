#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "rfseg/augment.hpp"
#include "rfseg/errors.hpp"

namespace rfseg {

// Full experiment description. Optimizer defaults follow the reference
// training recipe (poly-decayed SGD); the shipped desk-scale config files
// override the schedule lengths.
struct RunConfig {
  // data
  std::string data_dir;
  std::string out_dir = "runs/default";
  int64_t num_classes = 4;
  int64_t modalities = 1;
  std::array<int64_t, 3> volume_shape{32, 64, 64};
  int64_t train_volumes = 40;
  int64_t eval_volumes = 10;
  uint64_t seed = 17;

  // unet
  std::array<int64_t, 3> patch_size{32, 64, 64};
  std::string unet_arch = "unet3d";
  int64_t unet_base_channels = 16;
  int unet_stages = 4;
  int deep_supervision = 3;

  // optimizer / schedule
  double init_lr = 0.001;
  int64_t max_epoch = 1000;
  int64_t iters_per_epoch = 250;
  struct Optimizer {
    double momentum = 0.99;
    double weight_decay = 3e-5;
  } optimizer;

  // segmenter dims
  struct Segmenter {
    int64_t base_channels = 16;
    int64_t embed_channels = 64;
    int64_t mem_channels = 16;  // embed / 4
    int64_t heads = 4;
    int64_t adapter_ratio = 4;
    int64_t memory_blocks = 2;
    int64_t frame_hw = 64;  // frames are resized-free; phantoms match this
    // training phases (epochs run iters_per_epoch each)
    int64_t pretrain_epochs = 8;
    int64_t adapter_epochs = 2;
    double pretrain_lr = 0.02;
    double adapter_lr = 0.005;
  } segmenter;

  struct Memory {
    std::string strategy = "current_as_zero";
    int64_t window = 6;
    bool enabled = true;
    bool read_refined = true;
  } memory;

  struct Generator {
    std::string variant = "independent_unet_routed";
  } generator;

  struct ObjectScore {
    bool enabled = true;
    double threshold = 0.5;
  } object_score;

  struct Pipeline {
    bool step2_reuse_step1_prompts = false;
    bool oracle_step0 = false;  // ground-truth passthrough instead of the UNet
  } pipeline;

  AugmentConfig augment;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

// Reads a JSON config file and applies RFSEG_* environment overrides
// (RFSEG_MEMORY_WINDOW=4 sets memory.window, etc.).
RunConfig load_config(const std::string& path);

// Applies the env overrides to an in-memory config (exposed for tests).
RunConfig apply_env_overrides(const RunConfig& config);

}  // namespace rfseg
