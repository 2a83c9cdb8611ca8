#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "rfseg_doctest.hpp"

#include <random>

#include "rfseg/metrics.hpp"

using namespace rfseg;

namespace {

LabelVolume random_labels(std::mt19937_64& rng, int64_t k, int64_t d, int64_t h,
                          int64_t w) {
  std::uniform_int_distribution<int64_t> dist(0, k);
  auto t = torch::empty({d, h, w}, torch::kInt64);
  auto acc = t.accessor<int64_t, 3>();
  for (int64_t z = 0; z < d; ++z)
    for (int64_t r = 0; r < h; ++r)
      for (int64_t c = 0; c < w; ++c) acc[z][r][c] = dist(rng);
  return LabelVolume(t, k);
}

// Independent per-voxel counting, no tensor ops.
double counting_dice(const torch::Tensor& a, const torch::Tensor& b) {
  auto pa = a.to(torch::kBool).flatten();
  auto pb = b.to(torch::kBool).flatten();
  int64_t inter = 0, total = 0;
  for (int64_t i = 0; i < pa.numel(); ++i) {
    const bool x = pa[i].item<bool>();
    const bool y = pb[i].item<bool>();
    if (x && y) ++inter;
    if (x) ++total;
    if (y) ++total;
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / total;
}

}  // namespace

TEST_CASE("dice of identical nonempty masks is 1") {
  auto m = torch::zeros({4, 4}, torch::kBool);
  m[1][1] = true;
  m[2][3] = true;
  CHECK(dice_score(m, m) == doctest::Approx(1.0));
}

TEST_CASE("dice of disjoint nonempty masks is 0") {
  auto a = torch::zeros({4, 4}, torch::kBool);
  auto b = torch::zeros({4, 4}, torch::kBool);
  a[0][0] = true;
  b[3][3] = true;
  CHECK(dice_score(a, b) == doctest::Approx(0.0));
}

TEST_CASE("dice of half-overlapping 4-pixel masks is 0.5") {
  // P = {(0,0),(0,1),(1,0),(1,1)}, G = {(1,0),(1,1),(2,0),(2,1)}; |P∩G| = 2.
  auto p = torch::zeros({4, 4}, torch::kBool);
  auto g = torch::zeros({4, 4}, torch::kBool);
  p[0][0] = p[0][1] = p[1][0] = p[1][1] = true;
  g[1][0] = g[1][1] = g[2][0] = g[2][1] = true;
  CHECK(dice_score(p, g) == doctest::Approx(0.5));
}

TEST_CASE("dice of two empty masks is 1 by convention") {
  auto z = torch::zeros({3, 3}, torch::kBool);
  CHECK(dice_score(z, z) == doctest::Approx(1.0));
}

TEST_CASE("dice rejects shape mismatch") {
  auto a = torch::zeros({4, 4}, torch::kBool);
  auto b = torch::zeros({4, 5}, torch::kBool);
  CHECK_THROWS_AS(dice_score(a, b), ShapeError);
}

TEST_CASE("dice is symmetric on random masks") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto a = torch::rand({6, 6}) > 0.5;
    auto b = torch::rand({6, 6}) > 0.5;
    CHECK(dice_score(a, b) == doctest::Approx(dice_score(b, a)));
  }
}

TEST_CASE("multiclass dice of identical volumes is all ones") {
  std::mt19937_64 rng(11);
  auto v = random_labels(rng, 3, 4, 6, 6);
  auto r = multiclass_dice(v, v);
  REQUIRE(r.per_class.size() == 3);
  for (double d : r.per_class) CHECK(d == doctest::Approx(1.0));
  CHECK(r.mean == doctest::Approx(1.0));
}

TEST_CASE("one fully wrong class out of two gives mean 0.5") {
  auto gt = torch::zeros({1, 4, 4}, torch::kInt64);
  gt[0][0][0] = 1;
  gt[0][0][1] = 1;
  gt[0][2][2] = 2;
  auto pred = gt.clone();
  pred[0][2][2] = 0;      // class 2 dropped entirely
  pred[0][3][3] = 2;      // and predicted somewhere disjoint
  auto r = multiclass_dice(LabelVolume(pred, 2), LabelVolume(gt, 2));
  CHECK(r.per_class[0] == doctest::Approx(1.0));
  CHECK(r.per_class[1] == doctest::Approx(0.0));
  CHECK(r.mean == doctest::Approx(0.5));
}

TEST_CASE("multiclass dice matches per-voxel counting on random volumes") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    auto pred = random_labels(rng, 4, 8, 8, 8);
    auto gt = random_labels(rng, 4, 8, 8, 8);
    auto r = multiclass_dice(pred, gt);
    for (int64_t k = 1; k <= 4; ++k) {
      const double expect = counting_dice(pred.class_mask(k), gt.class_mask(k));
      CHECK(r.per_class[k - 1] == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("classes absent from both volumes are excluded from the mean") {
  auto gt = torch::zeros({1, 4, 4}, torch::kInt64);
  gt[0][1][1] = 1;
  auto pred = gt.clone();
  // class 2 never appears in either volume
  auto r = multiclass_dice(LabelVolume(pred, 2), LabelVolume(gt, 2));
  CHECK(r.per_class[1] == doctest::Approx(1.0));
  CHECK(r.mean == doctest::Approx(1.0));
}

TEST_CASE("multiclass dice rejects class-count mismatch") {
  auto t = torch::zeros({2, 4, 4}, torch::kInt64);
  CHECK_THROWS_AS(multiclass_dice(LabelVolume(t, 2), LabelVolume(t, 3)),
                  ValueError);
}
