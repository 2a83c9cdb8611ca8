#include "rfseg/config.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace rfseg {

using nlohmann::json;

namespace {

json config_to_json(const RunConfig& c) {
  json j;
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  j["num_classes"] = c.num_classes;
  j["modalities"] = c.modalities;
  j["volume_shape"] = c.volume_shape;
  j["train_volumes"] = c.train_volumes;
  j["eval_volumes"] = c.eval_volumes;
  j["seed"] = c.seed;
  j["patch_size"] = c.patch_size;
  j["unet_arch"] = c.unet_arch;
  j["unet_base_channels"] = c.unet_base_channels;
  j["unet_stages"] = c.unet_stages;
  j["deep_supervision"] = c.deep_supervision;
  j["init_lr"] = c.init_lr;
  j["max_epoch"] = c.max_epoch;
  j["iters_per_epoch"] = c.iters_per_epoch;
  j["optimizer"]["momentum"] = c.optimizer.momentum;
  j["optimizer"]["weight_decay"] = c.optimizer.weight_decay;
  j["segmenter"]["base_channels"] = c.segmenter.base_channels;
  j["segmenter"]["embed_channels"] = c.segmenter.embed_channels;
  j["segmenter"]["mem_channels"] = c.segmenter.mem_channels;
  j["segmenter"]["heads"] = c.segmenter.heads;
  j["segmenter"]["adapter_ratio"] = c.segmenter.adapter_ratio;
  j["segmenter"]["memory_blocks"] = c.segmenter.memory_blocks;
  j["segmenter"]["frame_hw"] = c.segmenter.frame_hw;
  j["segmenter"]["pretrain_epochs"] = c.segmenter.pretrain_epochs;
  j["segmenter"]["adapter_epochs"] = c.segmenter.adapter_epochs;
  j["segmenter"]["pretrain_lr"] = c.segmenter.pretrain_lr;
  j["segmenter"]["adapter_lr"] = c.segmenter.adapter_lr;
  j["memory"]["strategy"] = c.memory.strategy;
  j["memory"]["window"] = c.memory.window;
  j["memory"]["enabled"] = c.memory.enabled;
  j["memory"]["read_refined"] = c.memory.read_refined;
  j["generator"]["variant"] = c.generator.variant;
  j["object_score"]["enabled"] = c.object_score.enabled;
  j["object_score"]["threshold"] = c.object_score.threshold;
  j["pipeline"]["step2_reuse_step1_prompts"] = c.pipeline.step2_reuse_step1_prompts;
  j["pipeline"]["oracle_step0"] = c.pipeline.oracle_step0;
  auto& a = j["augment"];
  a["p_rotate"] = c.augment.p_rotate;
  a["max_angle_deg"] = c.augment.max_angle_deg;
  a["p_scale"] = c.augment.p_scale;
  a["scale_lo"] = c.augment.scale_lo;
  a["scale_hi"] = c.augment.scale_hi;
  a["p_noise"] = c.augment.p_noise;
  a["noise_sigma"] = c.augment.noise_sigma;
  a["p_blur"] = c.augment.p_blur;
  a["blur_sigma_lo"] = c.augment.blur_sigma_lo;
  a["blur_sigma_hi"] = c.augment.blur_sigma_hi;
  a["p_brightness"] = c.augment.p_brightness;
  a["brightness_delta"] = c.augment.brightness_delta;
  a["p_contrast"] = c.augment.p_contrast;
  a["contrast_lo"] = c.augment.contrast_lo;
  a["contrast_hi"] = c.augment.contrast_hi;
  a["p_lowres"] = c.augment.p_lowres;
  a["lowres_lo"] = c.augment.lowres_lo;
  a["lowres_hi"] = c.augment.lowres_hi;
  a["p_gamma"] = c.augment.p_gamma;
  a["gamma_lo"] = c.augment.gamma_lo;
  a["gamma_hi"] = c.augment.gamma_hi;
  a["p_mirror"] = c.augment.p_mirror;
  return j;
}

template <typename T>
void pull(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void pull_array3(const json& j, const char* key, std::array<int64_t, 3>& out) {
  if (j.contains(key)) {
    auto v = j.at(key).get<std::vector<int64_t>>();
    check_value(v.size() == 3, std::string(key) + " must have three entries");
    std::copy(v.begin(), v.end(), out.begin());
  }
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  pull(j, "data_dir", c.data_dir);
  pull(j, "out_dir", c.out_dir);
  pull(j, "num_classes", c.num_classes);
  pull(j, "modalities", c.modalities);
  pull_array3(j, "volume_shape", c.volume_shape);
  pull(j, "train_volumes", c.train_volumes);
  pull(j, "eval_volumes", c.eval_volumes);
  pull(j, "seed", c.seed);
  pull_array3(j, "patch_size", c.patch_size);
  pull(j, "unet_arch", c.unet_arch);
  pull(j, "unet_base_channels", c.unet_base_channels);
  pull(j, "unet_stages", c.unet_stages);
  pull(j, "deep_supervision", c.deep_supervision);
  pull(j, "init_lr", c.init_lr);
  pull(j, "max_epoch", c.max_epoch);
  pull(j, "iters_per_epoch", c.iters_per_epoch);
  if (j.contains("optimizer")) {
    pull(j["optimizer"], "momentum", c.optimizer.momentum);
    pull(j["optimizer"], "weight_decay", c.optimizer.weight_decay);
  }
  if (j.contains("segmenter")) {
    const auto& s = j["segmenter"];
    pull(s, "base_channels", c.segmenter.base_channels);
    pull(s, "embed_channels", c.segmenter.embed_channels);
    pull(s, "mem_channels", c.segmenter.mem_channels);
    pull(s, "heads", c.segmenter.heads);
    pull(s, "adapter_ratio", c.segmenter.adapter_ratio);
    pull(s, "memory_blocks", c.segmenter.memory_blocks);
    pull(s, "frame_hw", c.segmenter.frame_hw);
    pull(s, "pretrain_epochs", c.segmenter.pretrain_epochs);
    pull(s, "adapter_epochs", c.segmenter.adapter_epochs);
    pull(s, "pretrain_lr", c.segmenter.pretrain_lr);
    pull(s, "adapter_lr", c.segmenter.adapter_lr);
  }
  if (j.contains("memory")) {
    pull(j["memory"], "strategy", c.memory.strategy);
    pull(j["memory"], "window", c.memory.window);
    pull(j["memory"], "enabled", c.memory.enabled);
    pull(j["memory"], "read_refined", c.memory.read_refined);
  }
  if (j.contains("generator")) pull(j["generator"], "variant", c.generator.variant);
  if (j.contains("object_score")) {
    pull(j["object_score"], "enabled", c.object_score.enabled);
    pull(j["object_score"], "threshold", c.object_score.threshold);
  }
  if (j.contains("pipeline")) {
    pull(j["pipeline"], "step2_reuse_step1_prompts",
         c.pipeline.step2_reuse_step1_prompts);
    pull(j["pipeline"], "oracle_step0", c.pipeline.oracle_step0);
  }
  if (j.contains("augment")) {
    const auto& a = j["augment"];
    pull(a, "p_rotate", c.augment.p_rotate);
    pull(a, "max_angle_deg", c.augment.max_angle_deg);
    pull(a, "p_scale", c.augment.p_scale);
    pull(a, "scale_lo", c.augment.scale_lo);
    pull(a, "scale_hi", c.augment.scale_hi);
    pull(a, "p_noise", c.augment.p_noise);
    pull(a, "noise_sigma", c.augment.noise_sigma);
    pull(a, "p_blur", c.augment.p_blur);
    pull(a, "blur_sigma_lo", c.augment.blur_sigma_lo);
    pull(a, "blur_sigma_hi", c.augment.blur_sigma_hi);
    pull(a, "p_brightness", c.augment.p_brightness);
    pull(a, "brightness_delta", c.augment.brightness_delta);
    pull(a, "p_contrast", c.augment.p_contrast);
    pull(a, "contrast_lo", c.augment.contrast_lo);
    pull(a, "contrast_hi", c.augment.contrast_hi);
    pull(a, "p_lowres", c.augment.p_lowres);
    pull(a, "lowres_lo", c.augment.lowres_lo);
    pull(a, "lowres_hi", c.augment.lowres_hi);
    pull(a, "p_gamma", c.augment.p_gamma);
    pull(a, "gamma_lo", c.augment.gamma_lo);
    pull(a, "gamma_hi", c.augment.gamma_hi);
    pull(a, "p_mirror", c.augment.p_mirror);
  }
  return c;
}

void apply_env_to_json(json& j, const std::string& prefix) {
  for (auto& [key, value] : j.items()) {
    std::string name = prefix + key;
    for (auto& ch : name) ch = static_cast<char>(std::toupper(ch));
    if (value.is_object()) {
      apply_env_to_json(value, prefix + key + "_");
      continue;
    }
    std::string env = "RFSEG_" + name;
    if (const char* raw = std::getenv(env.c_str())) {
      json parsed = json::parse(raw, nullptr, /*allow_exceptions=*/false);
      if (parsed.is_discarded()) {
        value = std::string(raw);
      } else {
        value = parsed;
      }
    }
  }
}

}  // namespace

std::string RunConfig::to_json() const { return config_to_json(*this).dump(2); }

RunConfig RunConfig::from_json(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw ConfigError("config is not valid JSON");
  return config_from_json(j);
}

RunConfig apply_env_overrides(const RunConfig& config) {
  json j = config_to_json(config);
  apply_env_to_json(j, "");
  return config_from_json(j);
}

RunConfig load_config(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("config file not found: " + path);
  }
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return apply_env_overrides(RunConfig::from_json(text));
}

}  // namespace rfseg
