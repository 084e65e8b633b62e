#include <doctest.h>

#include <cmath>

#include "coin/distill.hpp"
#include "coin/io.hpp"
#include "support/fixtures.hpp"

using namespace coin;
using namespace coin::testing;

namespace {

Grid<float> as_float(const BinaryMask& m) {
  Grid<float> g(m.height(), m.width(), 0.0f);
  for (std::size_t i = 0; i < m.size(); ++i) g.values()[i] = m.values()[i] == 1 ? 1.0f : 0.0f;
  return g;
}

// p_fg = sigmoid(10 x0 - 5), p_edge = sigmoid(10 x1 - 5).
StudentParams gate_params() {
  StudentParams p = StudentParams::zeros(2, 2);
  p.w1 = {1, 0, 0, 1};
  p.w_bin = {10, 0};
  p.b_bin = -5;
  p.w_edge = {0, 10};
  p.b_edge = -5;
  return p;
}

}  // namespace

TEST_CASE("loss at the perfect prediction limit") {
  Rng rng(1);
  const BinaryMask bin = random_mask(rng, 32, 32, 0.4), edge = random_mask(rng, 32, 32, 0.1);
  const auto l = loss_seg(as_float(bin), as_float(edge), bin, edge);
  CHECK(l.ce_bin <= 1e-6);
  CHECK(l.ce_edge <= 1e-6);
  CHECK(l.dice_bin <= 2e-3);
  CHECK(l.dice_edge <= 2e-3);
  CHECK(l.counted == 1024);
}

TEST_CASE("loss at p = 0.5 is ln 2 per pixel") {
  BinaryMask bin(4, 4, 0);
  for (int c = 0; c < 4; ++c) bin(0, c) = bin(1, c) = 1;
  const Grid<float> half(4, 4, 0.5f);
  const auto l = loss_seg(half, half, bin, bin);
  CHECK(l.ce_bin == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  CHECK(l.ce_edge == doctest::Approx(std::log(2.0)).epsilon(1e-6));
  // Dice: 1 - (2*4 + 1) / (8 + 8 + 1)
  CHECK(l.dice_bin == doctest::Approx(1.0 - 9.0 / 17.0).epsilon(1e-6));
  CHECK(l.total == l.ce_bin + l.dice_bin + l.ce_edge + l.dice_edge);
}

TEST_CASE("fully ignored targets give zero loss") {
  const Grid<float> half(3, 3, 0.5f);
  const BinaryMask ign(3, 3, kIgnore);
  const auto l = loss_seg(half, half, ign, ign);
  CHECK(l.all_ignored);
  CHECK(l.total == 0.0);
  CHECK(l.counted == 0);
  CHECK_THROWS_AS(loss_seg(half, half, BinaryMask(2, 2, 0), ign), ArgumentError);
}

TEST_CASE("analytic gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto r = gradient_check(seed);
    CAPTURE(seed);
    CHECK(r.max_rel_error < 1e-4);
    CHECK(r.parameters > 0);
  }
}

TEST_CASE("features under ignored pixels do not affect loss or gradients") {
  Rng rng(4);
  auto f = random_features(rng, 6, 6, 3);
  const auto params = StudentParams::random(3, 4, 9);
  BinaryMask bin = random_mask(rng, 6, 6, 0.5), edge = random_mask(rng, 6, 6, 0.2);
  for (int c = 0; c < 6; ++c) bin(2, c) = edge(2, c) = kIgnore;
  const auto a = loss_and_grads(params, f, bin, edge);
  for (int c = 0; c < 6; ++c) {
    for (auto& v : f.at(2, c)) v = 100.0f;
  }
  const auto b = loss_and_grads(params, f, bin, edge);
  CHECK(a.loss.total == b.loss.total);
  CHECK(a.grads.w1 == b.grads.w1);
  CHECK(a.grads.w_bin == b.grads.w_bin);
  CHECK(a.grads.b_edge == b.grads.b_edge);
  CHECK(a.loss.total == a.loss.ce_bin + a.loss.dice_bin + a.loss.ce_edge + a.loss.dice_edge);
}

TEST_CASE("parameter construction") {
  CHECK_THROWS_AS(StudentParams::zeros(0, 4), ArgumentError);
  CHECK_THROWS_AS(StudentParams::zeros(4, 0), ArgumentError);
  CHECK(StudentParams::random(4, 8, 1) == StudentParams::random(4, 8, 1));
  CHECK_FALSE(StudentParams::random(4, 8, 1) == StudentParams::random(4, 8, 2));
  auto p = StudentParams::zeros(2, 2);
  p.w1[1] = std::nanf("");
  CHECK_THROWS_AS(p.check_finite(), NumericError);
}

TEST_CASE("training is deterministic and reduces the loss") {
  Rng rng(5);
  std::vector<FeatureGrid> feats;
  std::vector<BinaryMask> bins, edges;
  for (int i = 0; i < 3; ++i) {
    FeatureGrid f(10, 10, 2);
    BinaryMask b(10, 10, 0), e(10, 10, 0);
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        const bool fg = (r - 5) * (r - 5) + (c - 5) * (c - 5) < 12;
        b(r, c) = fg ? 1 : 0;
        f.at(r, c)[0] = (fg ? 1.0f : -1.0f) + static_cast<float>(rng() % 100) / 500.0f;
        f.at(r, c)[1] = 0.5f;
      }
    }
    feats.push_back(f);
    bins.push_back(b);
    edges.push_back(e);
  }
  std::vector<TrainSample> data;
  for (int i = 0; i < 3; ++i) data.push_back({&feats[i], &bins[i], &edges[i]});
  auto p1 = StudentParams::random(2, 6, 3), p2 = p1;
  const auto first = train_epoch(p1, data, 0.1, 7, 0);
  train_epoch(p2, data, 0.1, 7, 0);
  CHECK(p1 == p2);
  CHECK(first.steps == 3);
  double last = first.mean_loss;
  for (int e = 1; e < 30; ++e) last = train_epoch(p1, data, 0.1, 7, e).mean_loss;
  CHECK(last < first.mean_loss);

  feats[0].at(0, 0)[0] = std::nanf("");
  auto p3 = StudentParams::random(2, 6, 3);
  CHECK_THROWS_AS(train_epoch(p3, data, 0.1, 7, 0), NumericError);
}

TEST_CASE("prediction splits on the foreground head") {
  FeatureGrid f(12, 20, 2);
  BinaryMask truth(12, 20, 0);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 20; ++c) {
      const bool a = (r - 5) * (r - 5) + (c - 5) * (c - 5) <= 9;
      const bool b = (r - 5) * (r - 5) + (c - 14) * (c - 14) <= 9;
      f.at(r, c)[0] = a || b ? 1.0f : 0.0f;
      truth(r, c) = a || b ? 1 : 0;
    }
  }
  const auto out = student_forward(gate_params(), f);
  CHECK(out.p_fg(5, 5) > 0.99f);
  CHECK(out.p_edge(5, 5) < 0.01f);
  const auto inst = predict_instances(gate_params(), f, MorphConfig{});
  CHECK(inst.count() == 2);
  CHECK(inst.foreground() == truth);
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("ckpt");
  const auto p = StudentParams::random(5, 7, 42);
  save_checkpoint(p, dir.path());
  CHECK(load_checkpoint(dir.path()) == p);
  CHECK(std::filesystem::exists(dir / "manifest.json"));

  // A tensor with the wrong shape is rejected.
  write_cgf(to_cgf(Grid<float>(3, 3, 0.0f)), dir / "w1.cgf");
  CHECK_THROWS_AS(load_checkpoint(dir.path()), FormatError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), Error);
}
