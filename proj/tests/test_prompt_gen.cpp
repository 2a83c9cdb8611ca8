#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "rfseg_doctest.hpp"

#include "rfseg/mask_decoder.hpp"
#include "rfseg/prompt_encoder.hpp"
#include "rfseg/prompt_gen.hpp"
#include "rfseg/prompt_ops.hpp"
#include "rfseg/unet.hpp"

using namespace rfseg;

namespace {

UNetConfig tiny_unet(std::array<int64_t, 3> patch, UNetArch arch = UNetArch::UNet3D) {
  UNetConfig cfg;
  cfg.arch = arch;
  cfg.num_classes = 3;
  cfg.base_channels = 8;
  cfg.patch_size = patch;
  return cfg;
}

}  // namespace

TEST_CASE("unet logits keep the patch resolution with deep supervision heads") {
  torch::manual_seed(1);
  for (auto arch : {UNetArch::UNet3D, UNetArch::UNet2D, UNetArch::UNet3DAttn,
                    UNetArch::UNet2DAttn}) {
    UNet net(tiny_unet({8, 32, 32}, arch));
    auto out = net(torch::randn({1, 1, 8, 32, 32}));
    CHECK(out.logits.sizes() == torch::IntArrayRef({1, 4, 8, 32, 32}));
    REQUIRE(out.aux.size() == 2);
    CHECK(out.aux[0].size(1) == 4);
    CHECK(out.aux[0].size(4) == 16);  // one stride level down
  }
}

TEST_CASE("anisotropic patches freeze exhausted axes") {
  torch::manual_seed(2);
  UNet net(tiny_unet({2, 32, 32}));
  auto out = net(torch::randn({1, 1, 2, 32, 32}));
  CHECK(out.logits.sizes() == torch::IntArrayRef({1, 4, 2, 32, 32}));
}

TEST_CASE("indivisible patches are rejected") {
  torch::manual_seed(3);
  UNet net(tiny_unet({8, 32, 32}));
  CHECK_THROWS_AS(net(torch::randn({1, 1, 8, 30, 30})), ShapeError);
}

TEST_CASE("zero input yields finite logits with a well-defined argmax") {
  torch::manual_seed(4);
  UNet net(tiny_unet({8, 32, 32}));
  auto out = net(torch::zeros({1, 1, 8, 32, 32}));
  CHECK(torch::isfinite(out.logits).all().item<bool>());
  auto arg = out.logits.argmax(1);
  CHECK(arg.min().item<int64_t>() >= 0);
  CHECK(arg.max().item<int64_t>() <= 3);
}

TEST_CASE("a width-symmetrized unet is mirror-equivariant along W") {
  torch::manual_seed(5);
  UNet net(tiny_unet({4, 16, 16}));
  {
    torch::NoGradGuard g;
    for (auto& p : net->named_parameters()) {
      if (p.value().dim() == 5) {  // conv kernels: [out, in, kd, kh, kw]
        p.value().copy_((p.value() + p.value().flip(4)) / 2.0);
      }
    }
  }
  torch::NoGradGuard g;
  auto x = torch::randn({1, 1, 4, 16, 16});
  auto direct = net(x.flip(4)).logits;
  auto mirrored = net(x).logits.flip(4);
  CHECK(torch::allclose(direct, mirrored, 1e-4, 1e-5));
}

TEST_CASE("sliding-window prediction covers the whole volume deterministically") {
  torch::manual_seed(6);
  UNet net(tiny_unet({4, 16, 16}));
  Volume vol(torch::rand({1, 6, 24, 24}), {1, 1, 1}, "t");
  auto a = sliding_window_predict(net, vol);
  auto b = sliding_window_predict(net, vol);
  CHECK(a.labels.sizes() == torch::IntArrayRef({6, 24, 24}));
  CHECK(torch::equal(a.labels, b.labels));
  CHECK(a.num_classes == 3);
}

TEST_CASE("perfect predictions reproduce the all-frames box plan") {
  auto labels = torch::zeros({3, 16, 16}, torch::kInt64);
  labels[1].index_put_({torch::indexing::Slice(4, 8), torch::indexing::Slice(5, 9)}, 1);
  labels[2].index_put_({torch::indexing::Slice(2, 6), torch::indexing::Slice(2, 6)}, 2);
  LabelVolume lv(labels, 2);

  auto prompts = masks_to_prompts(lv, /*routed=*/false);
  auto plan = derive_prompt_plan(
      lv, {PromptCoverage::AllFrames, PromptKind::Box, Step2Scope::AllFrames});
  REQUIRE(prompts.size() == plan.size());
  for (const auto& e : plan.entries()) {
    const auto* got = prompts.find(e.frame, e.class_id);
    REQUIRE(got != nullptr);
    if (std::holds_alternative<BoundingBox>(e.sparse)) {
      CHECK(std::get<BoundingBox>(got->sparse) == std::get<BoundingBox>(e.sparse));
    } else {
      CHECK(got->is_no_object());
    }
  }
}

TEST_CASE("all-background predictions yield only no-object markers") {
  LabelVolume lv(torch::zeros({2, 8, 8}, torch::kInt64), 2);
  auto prompts = masks_to_prompts(lv, false);
  REQUIRE(prompts.size() == 4);
  for (const auto& e : prompts.entries()) CHECK(e.is_no_object());
}

TEST_CASE("a spurious pixel expands the predicted box") {
  auto labels = torch::zeros({1, 16, 16}, torch::kInt64);
  labels[0].index_put_({torch::indexing::Slice(4, 8), torch::indexing::Slice(4, 8)}, 1);
  labels[0][14][15] = 1;  // stray prediction far from the blob
  auto prompts = masks_to_prompts(LabelVolume(labels, 1), false);
  const auto& box = std::get<BoundingBox>(prompts.find(0, 1)->sparse);
  CHECK(box.max_row == 14);
  CHECK(box.max_col == 15);
  CHECK(box.min_row == 4);
}

TEST_CASE("routed prompts carry per-class dense masks") {
  auto labels = torch::zeros({1, 16, 16}, torch::kInt64);
  labels[0].index_put_({torch::indexing::Slice(4, 8), torch::indexing::Slice(4, 8)}, 1);
  auto prompts = masks_to_prompts(LabelVolume(labels, 2), true);
  const auto* present = prompts.find(0, 1);
  REQUIRE(present->dense_mask.has_value());
  CHECK(present->dense_mask->sum().item<float>() == doctest::Approx(16.0));
  const auto* absent = prompts.find(0, 2);
  CHECK(absent->is_no_object());
  CHECK_FALSE(absent->dense_mask.has_value());
}

TEST_CASE("query boxes are valid normalized corner pairs") {
  torch::manual_seed(7);
  QueryBoxGenerator gen(4, 64, 4);
  auto out = gen(torch::randn({64, 4, 4}));
  REQUIRE(out.boxes.sizes() == torch::IntArrayRef({4, 4}));
  REQUIRE(out.scores.sizes() == torch::IntArrayRef({4}));
  auto acc = out.boxes.accessor<float, 2>();
  for (int k = 0; k < 4; ++k) {
    CHECK(acc[k][0] >= 0.f);
    CHECK(acc[k][2] <= 1.f);
    CHECK(acc[k][0] <= acc[k][2]);
    CHECK(acc[k][1] <= acc[k][3]);
  }
}

TEST_CASE("score fusion multiplies probabilities in logit space") {
  auto g = torch::tensor({2.0f, -3.0f});
  auto d = torch::tensor({1.0f, 4.0f});
  auto fused = torch::sigmoid(fuse_object_scores(g, d));
  auto expected = torch::sigmoid(g) * torch::sigmoid(d);
  CHECK(torch::allclose(fused, expected, 1e-4, 1e-5));
}

TEST_CASE("learnable point tokens mirror box arity and feed the decoder") {
  torch::manual_seed(8);
  const int64_t K = 3, C = 64;
  LearnablePointEmbed gen(K, C, 4);
  auto embedding = torch::randn({C, 4, 4});
  auto tokens = gen(embedding);
  REQUIRE(tokens.sizes() == torch::IntArrayRef({K, 2, C}));

  MaskDecoder dec(C, 4, 4);
  PromptEncoder enc(C, 16);
  PromptEntry no_mask;  // learned dense fallback for every object
  auto dense = enc->encode_dense(no_mask, 4, 4).unsqueeze(0).expand({K, C, 4, 4});
  auto out = dec(embedding, torch::randn({C, 16, 16}), torch::randn({C, 8, 8}),
                 tokens, torch::Tensor(), dense);
  CHECK(out.mask_logits.sizes() == torch::IntArrayRef({K, 16, 16}));
}

TEST_CASE("hierarchical mask head lands at quarter resolution") {
  torch::manual_seed(9);
  BackboneDims dims;
  Backbone bb(dims);
  HierarchicalMaskGenerator gen(3, dims.base_channels);
  auto frame = torch::randn({1, 1, 64, 64});
  auto feats = bb->encoder(bb->stem(frame));
  auto logits = gen(feats);
  CHECK(logits.sizes() == torch::IntArrayRef({4, 16, 16}));
  auto full = torch::nn::functional::interpolate(
      logits.unsqueeze(0), torch::nn::functional::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{64, 64})
                               .mode(torch::kBilinear)
                               .align_corners(false));
  CHECK(full.sizes() == torch::IntArrayRef({1, 4, 64, 64}));
}

TEST_CASE("shared-encoder generator couples, independent unet decouples") {
  torch::manual_seed(10);
  BackboneDims dims;
  Backbone bb(dims);
  HierarchicalMaskGenerator gen(2, dims.base_channels);
  UNet unet(tiny_unet({4, 32, 32}));

  auto frame = torch::randn({1, 1, 64, 64});

  // generator-side auxiliary loss reaches the shared encoder
  auto feats = bb->encoder(bb->stem(frame));
  auto aux_loss = gen(feats).pow(2).mean();
  aux_loss.backward();
  double enc_grad = 0;
  for (auto& p : bb->encoder->parameters()) {
    if (p.grad().defined()) enc_grad += p.grad().abs().sum().item<double>();
  }
  CHECK(enc_grad > 0.0);
  bb->zero_grad();

  // segmenter-side loss also reaches the shared encoder: the conflict
  auto emb = bb(frame);
  auto seg_loss = emb.embedding.pow(2).mean();
  seg_loss.backward();
  enc_grad = 0;
  for (auto& p : bb->encoder->parameters()) {
    if (p.grad().defined()) enc_grad += p.grad().abs().sum().item<double>();
  }
  CHECK(enc_grad > 0.0);

  // the independent unet stays untouched by segmenter-side losses
  for (auto& p : unet->parameters()) {
    CHECK_FALSE(p.grad().defined());
  }
  // and unet losses leave the segmenter untouched
  bb->zero_grad();
  auto unet_loss = unet(torch::randn({1, 1, 4, 32, 32})).logits.pow(2).mean();
  unet_loss.backward();
  for (auto& p : bb->parameters()) {
    const bool zero = !p.grad().defined() ||
                      p.grad().abs().sum().item<double>() == 0.0;
    CHECK(zero);
  }
}
