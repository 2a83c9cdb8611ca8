#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "rfseg_doctest.hpp"

#include <random>

#include "rfseg/gradcheck.hpp"
#include "rfseg/mask_decoder.hpp"
#include "rfseg/prompt_encoder.hpp"

using namespace rfseg;

namespace {

constexpr int64_t kC = 64;

PromptEntry box_entry(int64_t frame, int64_t cls, int64_t r0, int64_t c0,
                      int64_t r1, int64_t c1) {
  PromptEntry e;
  e.frame = frame;
  e.class_id = cls;
  e.sparse = BoundingBox{frame, cls, r0, c0, r1, c1};
  return e;
}

struct DecoderRig {
  PromptEncoder enc{nullptr};
  MaskDecoder dec{nullptr};
  torch::Tensor embedding, skip1, skip2;

  explicit DecoderRig(int64_t h = 4, int64_t w = 4) {
    enc = PromptEncoder(kC, 16);
    dec = MaskDecoder(kC, 4, 4);
    embedding = torch::randn({kC, h, w});
    skip1 = torch::randn({kC, h * 4, w * 4});
    skip2 = torch::randn({kC, h * 2, w * 2});
  }

  DecoderOutput decode(const std::vector<const PromptEntry*>& entries) {
    auto ep = encode_frame_prompts(enc, entries, 64, 64, embedding.size(1),
                                   embedding.size(2));
    return dec(embedding, skip1, skip2, ep.sparse, ep.padding, ep.dense);
  }
};

}  // namespace

TEST_CASE("a box becomes two corner tokens labelled 2 and 3") {
  torch::manual_seed(1);
  PromptEncoder enc(kC, 16);
  auto e = box_entry(0, 1, 5, 7, 9, 11);
  auto tokens = enc->encode_sparse(e, 64, 64);
  REQUIRE(tokens.sizes() == torch::IntArrayRef({2, kC}));
  // the label component is recoverable by subtracting the coordinate part
  auto pe_tl = coordinate_encoding(torch::tensor({{5.f / 63.f, 7.f / 63.f}}), kC)[0];
  auto pe_br = coordinate_encoding(torch::tensor({{9.f / 63.f, 11.f / 63.f}}), kC)[0];
  CHECK(torch::allclose(tokens[0] - pe_tl,
                        enc->label_embed->weight[PromptEncoderImpl::label_index(2)],
                        1e-5, 1e-6));
  CHECK(torch::allclose(tokens[1] - pe_br,
                        enc->label_embed->weight[PromptEncoderImpl::label_index(3)],
                        1e-5, 1e-6));
}

TEST_CASE("a no-object marker is a single dedicated token") {
  torch::manual_seed(2);
  PromptEncoder enc(kC, 16);
  PromptEntry e;
  e.frame = 0;
  e.class_id = 2;
  auto tokens = enc->encode_sparse(e, 64, 64);
  REQUIRE(tokens.sizes() == torch::IntArrayRef({1, kC}));
  CHECK(torch::equal(tokens[0],
                     enc->label_embed->weight[PromptEncoderImpl::label_index(-1)]));
}

TEST_CASE("the five prompt labels embed injectively") {
  torch::manual_seed(3);
  PromptEncoder enc(kC, 16);
  auto w = enc->label_embed->weight;
  for (int a = 0; a < 5; ++a) {
    for (int b = a + 1; b < 5; ++b) {
      CHECK((w[a] - w[b]).norm().item<float>() > 1e-3f);
    }
  }
  // same coordinates, different labels -> different tokens
  PromptEntry pos, neg;
  pos.sparse = PointPrompt{0, 1, 8, 8, 1};
  neg.sparse = PointPrompt{0, 1, 8, 8, 0};
  auto tp = enc->encode_sparse(pos, 64, 64);
  auto tn = enc->encode_sparse(neg, 64, 64);
  CHECK((tp - tn).norm().item<float>() > 1e-3f);
}

TEST_CASE("out-of-bounds prompt coordinates are rejected") {
  torch::manual_seed(4);
  PromptEncoder enc(kC, 16);
  auto e = box_entry(0, 1, 5, 7, 70, 11);
  CHECK_THROWS_AS(enc->encode_sparse(e, 64, 64), ValueError);
}

TEST_CASE("dense mask prompts land on the embedding grid") {
  torch::manual_seed(5);
  PromptEncoder enc(kC, 16);
  PromptEntry e = box_entry(0, 1, 2, 2, 10, 10);
  e.dense_mask = torch::zeros({64, 64});
  auto d = enc->encode_dense(e, 4, 4);
  CHECK(d.sizes() == torch::IntArrayRef({kC, 4, 4}));
  // absent mask -> broadcast learned embedding
  PromptEntry no_mask = box_entry(0, 1, 2, 2, 10, 10);
  auto nd = enc->encode_dense(no_mask, 4, 4);
  CHECK(torch::equal(nd.select(1, 0).select(1, 0), enc->no_mask_embed->weight[0]));
  // wrong resolution -> error
  PromptEntry bad = no_mask;
  bad.dense_mask = torch::zeros({32, 32});
  CHECK_THROWS_AS(enc->encode_dense(bad, 4, 4), ShapeError);
}

TEST_CASE("the decoder emits one triple per prompted object") {
  torch::manual_seed(6);
  DecoderRig rig;
  auto e1 = box_entry(0, 1, 1, 1, 10, 10);
  auto e2 = box_entry(0, 2, 20, 20, 40, 44);
  auto e3 = box_entry(0, 3, 5, 30, 25, 60);
  auto out = rig.decode({&e1, &e2, &e3});
  CHECK(out.mask_logits.sizes() == torch::IntArrayRef({3, 16, 16}));
  CHECK(out.object_scores.sizes() == torch::IntArrayRef({3}));
  CHECK(out.object_pointers.sizes() == torch::IntArrayRef({3, kC}));
}

TEST_CASE("logits sit at a quarter of the frame resolution") {
  torch::manual_seed(7);
  DecoderRig rig(8, 8);  // 128x128 frame -> 8x8 embedding
  auto e = box_entry(0, 1, 1, 1, 10, 10);
  auto ep = encode_frame_prompts(rig.enc, {&e}, 128, 128, 8, 8);
  auto out = rig.dec(rig.embedding, rig.skip1, rig.skip2, ep.sparse, ep.padding,
                     ep.dense);
  CHECK(out.mask_logits.sizes() == torch::IntArrayRef({1, 32, 32}));
}

TEST_CASE("zero-up adapters leave the decoder output untouched") {
  torch::manual_seed(8);
  DecoderRig rig;
  auto e1 = box_entry(0, 1, 1, 1, 10, 10);
  auto e2 = box_entry(0, 2, 3, 5, 30, 60);
  torch::NoGradGuard g;
  auto with = rig.decode({&e1, &e2});
  set_adapter_bypass(*rig.dec, true);
  auto without = rig.decode({&e1, &e2});
  CHECK(torch::max(torch::abs(with.mask_logits - without.mask_logits))
            .item<float>() <= 1e-6f);
  CHECK(torch::max(torch::abs(with.object_scores - without.object_scores))
            .item<float>() <= 1e-6f);
}

TEST_CASE("permuting the prompt list permutes the output triples") {
  torch::manual_seed(9);
  DecoderRig rig;
  auto e1 = box_entry(0, 1, 1, 1, 10, 10);
  auto e2 = box_entry(0, 2, 20, 20, 40, 44);
  PromptEntry e3;
  e3.frame = 0;
  e3.class_id = 3;  // no-object, exercises mixed token counts
  torch::NoGradGuard g;
  auto fwd = rig.decode({&e1, &e2, &e3});
  auto rev = rig.decode({&e3, &e2, &e1});
  CHECK(torch::allclose(fwd.mask_logits[0], rev.mask_logits[2], 1e-5, 1e-6));
  CHECK(torch::allclose(fwd.mask_logits[1], rev.mask_logits[1], 1e-5, 1e-6));
  CHECK(torch::allclose(fwd.mask_logits[2], rev.mask_logits[0], 1e-5, 1e-6));
  CHECK(torch::allclose(fwd.object_scores[0], rev.object_scores[2], 1e-5, 1e-6));
}

TEST_CASE("score gate: disabled passes through, floor score blanks the mask") {
  torch::manual_seed(10);
  DecoderOutput out;
  out.mask_logits = torch::randn({2, 8, 8});
  out.object_scores = torch::tensor({5.0f, -30.0f});
  out.object_pointers = torch::randn({2, 16});

  auto pass = object_score_gate(out, false, 0.5);
  CHECK(torch::equal(pass.mask_logits, out.mask_logits));

  auto gated = object_score_gate(out, true, 0.5);
  CHECK(torch::allclose(gated.mask_logits[0], out.mask_logits[0]));
  CHECK((torch::sigmoid(gated.mask_logits[1]).max().item<float>()) < 1e-3f);
  CHECK(torch::equal(gated.object_scores, out.object_scores));
}

TEST_CASE("decoder adapter gradients agree with central differences") {
  torch::manual_seed(11);
  std::mt19937_64 rng(11);
  DecoderRig rig;
  {
    torch::NoGradGuard g;  // move adapters off the zero init
    for (auto& p : rig.dec->named_parameters()) {
      if (is_adapter_parameter(p.key())) {
        p.value().add_(torch::randn_like(p.value()) * 0.05);
      }
    }
  }
  auto e1 = box_entry(0, 1, 1, 1, 10, 10);
  auto e2 = box_entry(0, 2, 20, 20, 40, 44);
  auto ep = encode_frame_prompts(rig.enc, {&e1, &e2}, 64, 64, 4, 4);
  auto gt = (torch::rand({2, 16, 16}) > 0.7).to(torch::kFloat32);

  // dice + cross-entropy on the decoder masks
  auto held = std::make_shared<std::vector<torch::Tensor>>(std::vector<torch::Tensor>{
      rig.embedding, rig.skip1, rig.skip2, ep.sparse, ep.dense, gt});
  FdTarget target;
  target.loss = [&rig, held, &ep] {
    const auto& in = *held;
    auto out = rig.dec(in[0], in[1], in[2], in[3], ep.padding, in[4]);
    auto prob = torch::sigmoid(out.mask_logits);
    auto ce = torch::binary_cross_entropy_with_logits(out.mask_logits, in[5]);
    auto inter = (prob * in[5]).sum();
    auto dice = 1.0 - (2.0 * inter + 1.0) / (prob.sum() + in[5].sum() + 1.0);
    return ce + dice;
  };
  target.set_dtype = [&rig, held](torch::ScalarType dtype) {
    rig.dec->to(dtype);
    for (auto& x : *held) {
      if (x.is_floating_point()) x = x.to(dtype);
    }
  };
  target.params = [&rig] {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (auto& p : rig.dec->named_parameters()) {
      if (is_adapter_parameter(p.key())) out.emplace_back(p.key(), p.value());
    }
    return out;
  };
  auto report = finite_difference_check(target, 2, rng);
  CHECK(report.all_ok());
  CHECK(report.samples.size() >= 20);
}
