#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "rfseg_doctest.hpp"

#include "rfseg/backbone.hpp"

using namespace rfseg;

TEST_CASE("stem maps any modality count onto three channels") {
  torch::manual_seed(1);
  for (int64_t m : {1, 4}) {
    ModalityStem stem(m);
    auto out = stem(torch::randn({2, m, 32, 32}));
    CHECK(out.sizes() == torch::IntArrayRef({2, 3, 32, 32}));
  }
}

TEST_CASE("stem gradients reach both convolutions") {
  torch::manual_seed(2);
  ModalityStem stem(2);
  auto loss = stem(torch::randn({1, 2, 32, 32})).pow(2).sum();
  loss.backward();
  CHECK(stem->expand->weight.grad().abs().sum().item<float>() > 0.f);
  CHECK(stem->project->weight.grad().abs().sum().item<float>() > 0.f);
}

TEST_CASE("stage features halve spatially and double channels") {
  torch::manual_seed(3);
  BackboneDims dims;
  HierEncoder enc(dims);
  auto feats = enc(torch::randn({1, 3, 64, 64}));
  REQUIRE(feats.stages.size() == 4);
  int64_t expect_c = dims.base_channels;
  int64_t expect_hw = 16;  // 64 / 4 after the first patch embed
  for (const auto& f : feats.stages) {
    CHECK(f.size(1) == expect_c);
    CHECK(f.size(2) == expect_hw);
    CHECK(f.size(3) == expect_hw);
    expect_c *= 2;
    expect_hw /= 2;
  }
}

TEST_CASE("embedding lands at 1/16 with skips at 1/4 and 1/8") {
  torch::manual_seed(4);
  BackboneDims dims;
  Backbone bb(dims);
  for (int64_t hw : {32, 64, 96}) {
    auto out = bb(torch::randn({1, 1, hw, hw}));
    CHECK(out.embedding.size(2) == hw / 16);
    CHECK(out.embedding.size(3) == hw / 16);
    CHECK(out.embedding.size(1) == dims.embed_channels);
    CHECK(out.skip1.size(2) == hw / 4);
    CHECK(out.skip2.size(2) == hw / 8);
  }
}

TEST_CASE("indivisible spatial dims are rejected") {
  torch::manual_seed(5);
  Backbone bb(BackboneDims{});
  CHECK_THROWS_AS(bb(torch::randn({1, 1, 48, 48})), ShapeError);
}

TEST_CASE("zero-up adapters leave the backbone output untouched") {
  torch::manual_seed(6);
  Backbone bb(BackboneDims{});
  auto x = torch::randn({1, 1, 64, 64});
  torch::NoGradGuard g;
  auto with_adapters = bb(x);
  set_adapter_bypass(*bb, true);
  auto without = bb(x);
  CHECK(torch::max(torch::abs(with_adapters.embedding - without.embedding))
            .item<float>() <= 1e-6f);
  CHECK(torch::max(torch::abs(with_adapters.skip1 - without.skip1))
            .item<float>() <= 1e-6f);
}

TEST_CASE("batch order permutes outputs without mixing samples") {
  torch::manual_seed(7);
  Backbone bb(BackboneDims{});
  torch::NoGradGuard g;
  auto a = torch::randn({1, 1, 32, 32});
  auto b = torch::randn({1, 1, 32, 32});
  auto ab = bb(torch::cat({a, b}, 0));
  auto ba = bb(torch::cat({b, a}, 0));
  CHECK(torch::allclose(ab.embedding[0], ba.embedding[1], 1e-5, 1e-6));
  CHECK(torch::allclose(ab.embedding[1], ba.embedding[0], 1e-5, 1e-6));
}

TEST_CASE("zero stage features make the fused embedding a constant bias field") {
  torch::manual_seed(8);
  BackboneDims dims;
  FpnNeck fpn(dims);
  torch::NoGradGuard g;
  StageFeatures feats;
  int64_t c = dims.base_channels, hw = 16;
  for (int i = 0; i < 4; ++i) {
    feats.stages.push_back(torch::zeros({1, c, hw, hw}));
    c *= 2;
    hw /= 2;
  }
  auto out = fpn(feats);
  auto b3 = fpn->laterals[2]->as<torch::nn::Conv2dImpl>()->bias;
  auto b4 = fpn->laterals[3]->as<torch::nn::Conv2dImpl>()->bias;
  auto expected = (b3 + b4).reshape({1, -1, 1, 1}).expand_as(out.embedding);
  CHECK(torch::allclose(out.embedding, expected, 1e-5, 1e-6));
  // constant per channel
  auto flat = out.embedding.flatten(2);
  CHECK(torch::max(std::get<0>(flat.max(2)) - std::get<0>(flat.min(2)))
            .item<float>() <= 1e-6f);
}

TEST_CASE("fixed seed rebuild reproduces outputs bit for bit") {
  torch::NoGradGuard g;
  torch::manual_seed(99);
  Backbone a(BackboneDims{});
  torch::manual_seed(99);
  Backbone b(BackboneDims{});
  torch::manual_seed(123);
  auto x = torch::randn({1, 1, 64, 64});
  CHECK(torch::equal(a(x).embedding, b(x).embedding));
}
