#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "coin/metrics.hpp"
#include "support/fixtures.hpp"

using namespace coin;
using namespace coin::testing;

namespace {

InstanceMap permuted(const InstanceMap& m, Rng& rng) {
  std::vector<std::uint32_t> perm(m.count());
  std::iota(perm.begin(), perm.end(), 1u);
  std::shuffle(perm.begin(), perm.end(), rng);
  LabelGrid g = m.labels();
  for (auto& v : g.values()) v = v == 0 ? 0 : perm[v - 1];
  return InstanceMap(g);
}

InstanceMap from_rows(int h, int w, std::vector<std::uint32_t> v) { return InstanceMap(LabelGrid(h, w, std::move(v))); }

}  // namespace

TEST_CASE("iou and dice arithmetic") {
  BinaryMask a(1, 4, std::vector<std::uint8_t>{1, 1, 1, 0});
  BinaryMask b(1, 4, std::vector<std::uint8_t>{0, 1, 1, 1});
  CHECK(mask_iou(a, b) == doctest::Approx(0.5));
  CHECK(mask_dice(a, b) == doctest::Approx(2.0 / 3.0));
  CHECK(mask_iou(a, a) == 1.0);
  BinaryMask c(1, 4, std::vector<std::uint8_t>{1, 0, 0, 0});
  BinaryMask d(1, 4, std::vector<std::uint8_t>{0, 0, 0, 1});
  CHECK(mask_iou(c, d) == 0.0);
  CHECK(mask_dice(c, d) == 0.0);
  CHECK(mask_iou(BinaryMask(2, 2, 0), BinaryMask(2, 2, 0)) == 1.0);
  CHECK_THROWS_AS(mask_iou(a, BinaryMask(2, 2, 0)), ArgumentError);
}

TEST_CASE("fp and fn rates") {
  BinaryMask gt(1, 4, std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(fp_fn_rates(gt, gt).fp == 0.0);
  CHECK(fp_fn_rates(gt, gt).fn == 0.0);
  CHECK(fp_fn_rates(BinaryMask(1, 4, 0), gt).fn == 1.0);
  CHECK(fp_fn_rates(BinaryMask(1, 4, 0), gt).fp == 0.0);
  CHECK(fp_fn_rates(BinaryMask(1, 4, 1), gt).fp == 1.0);
  CHECK(fp_fn_rates(BinaryMask(1, 4, 1), gt).fn == 0.0);
}

TEST_CASE("pq worked examples") {
  // One pair with IoU 0.6.
  const auto gt = from_rows(1, 5, {1, 1, 1, 1, 1});
  const auto pred = from_rows(1, 5, {1, 1, 1, 0, 0});
  const auto q = panoptic_quality(pred, gt);
  CHECK(q.sq == doctest::Approx(0.6));
  CHECK(q.rq == doctest::Approx(1.0));
  CHECK(q.pq == doctest::Approx(0.6));

  // Two GT, one matched at 0.8, one spurious prediction.
  const auto gt2 = from_rows(1, 12, {1, 1, 1, 1, 1, 0, 2, 2, 0, 0, 0, 0});
  const auto pr2 = from_rows(1, 12, {1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 2, 2});
  const auto q2 = panoptic_quality(pr2, gt2);
  CHECK(q2.sq == doctest::Approx(0.8));
  CHECK(q2.rq == doctest::Approx(0.5));
  CHECK(q2.pq == doctest::Approx(0.4));
}

TEST_CASE("aji examples") {
  Rng rng(1);
  const auto gt = random_instances(rng, 8, 8, 3);
  CHECK(aji(gt, gt) == 1.0);
  CHECK(aji(permuted(gt, rng), gt) == 1.0);
  CHECK(aji(InstanceMap(8, 8), gt) == 0.0);

  // Two GT cells; prediction matches one exactly and misses the other.
  LabelGrid g(8, 8, 0u), p(8, 8, 0u);
  for (int r = 1; r < 4; ++r) {
    for (int c = 1; c < 4; ++c) g(r, c) = p(r, c) = 1;
  }
  for (int r = 5; r < 7; ++r) {
    for (int c = 5; c < 8; ++c) g(r, c) = 2;
  }
  const double v = aji(InstanceMap(p), InstanceMap(g));
  CHECK(v == reference_aji(InstanceMap(p), InstanceMap(g)));
  CHECK(v == doctest::Approx(9.0 / 15.0));
}

TEST_CASE("aji and pq equal the exhaustive references on random small cases") {
  Rng rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 8), w = 1 + static_cast<int>(rng() % 8);
    const auto gt = random_instances(rng, h, w, static_cast<int>(rng() % 4));
    const auto pred = random_instances(rng, h, w, static_cast<int>(rng() % 4));
    CHECK(aji(pred, gt) == reference_aji(pred, gt));
    const auto a = panoptic_quality(pred, gt), b = reference_pq(pred, gt);
    CHECK(a.tp == b.tp);
    CHECK(a.pq == doctest::Approx(b.pq).epsilon(1e-12));
    CHECK(a.sq == doctest::Approx(b.sq).epsilon(1e-12));
  }
}

TEST_CASE("metrics are invariant to relabeling and bounded by binary iou") {
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const auto gt = random_instances(rng, 10, 10, 4);
    const auto pred = random_instances(rng, 10, 10, 4);
    const auto base = metric_set(pred, gt);
    const auto perm = metric_set(permuted(pred, rng), permuted(gt, rng));
    CHECK(base.pq == doctest::Approx(perm.pq));
    CHECK(base.iou == perm.iou);
    CHECK(base.aji <= base.iou + 1e-12);
    for (double v : {base.aji, base.pq, base.sq, base.rq, base.iou, base.dice, base.fp, base.fn}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("adjacency split") {
  // Two touching cells and one isolated cell.
  LabelGrid g(10, 12, 0u);
  g(1, 1) = g(1, 2) = 1;
  g(1, 3) = g(1, 4) = 2;
  g(8, 10) = 3;
  const auto s = split_adjacent(InstanceMap(g), 2);
  CHECK(s.adjacent == std::vector<std::uint32_t>{1, 2});
  CHECK(s.non_adjacent == std::vector<std::uint32_t>{3});

  LabelGrid chain(3, 12, 0u);
  chain(1, 1) = 1;
  chain(1, 4) = 2;
  chain(1, 7) = 3;
  CHECK(split_adjacent(InstanceMap(chain), 2).adjacent.size() == 3);
  CHECK(split_adjacent(InstanceMap(chain), 2, 2).adjacent == std::vector<std::uint32_t>{2});
  CHECK_THROWS_AS(split_adjacent(InstanceMap(chain), 0), ArgumentError);
}

TEST_CASE("evaluate composes the individual metrics and round trips through json") {
  Rng rng(5);
  const auto gt = random_instances(rng, 16, 16, 5);
  const auto pred = random_instances(rng, 16, 16, 5);
  const auto rep = evaluate(pred, gt);
  CHECK(rep.overall.aji == aji(pred, gt));
  CHECK(rep.overall.pq == panoptic_quality(pred, gt).pq);
  CHECK(rep.overall.iou == mask_iou(pred.foreground(), gt.foreground()));
  CHECK(rep.gt_count == gt.count());
  const auto j = to_json(rep);
  CHECK(j.contains("overall"));
  CHECK(j["counts"].contains("matched"));
  const auto back = report_from_json(j);
  CHECK(back.overall.aji == rep.overall.aji);
  CHECK(back.adjacent.pq == rep.adjacent.pq);
  CHECK(back.matched == rep.matched);
}

TEST_CASE("perfect prediction scores one everywhere") {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto gt = random_instances(rng, 12, 12, 3);
    const auto rep = evaluate(gt, gt);
    for (const MetricSet* m : {&rep.overall}) {
      CHECK(m->aji == 1.0);
      CHECK(m->pq == 1.0);
      CHECK(m->sq == 1.0);
      CHECK(m->rq == 1.0);
      CHECK(m->iou == 1.0);
      CHECK(m->dice == 1.0);
      CHECK(m->fp == 0.0);
      CHECK(m->fn == 0.0);
    }
  }
}

TEST_CASE("mean report averages sets and sums counts") {
  MetricsReport a, b;
  a.overall.aji = 0.2;
  b.overall.aji = 0.6;
  a.gt_count = 3;
  b.gt_count = 4;
  const auto m = mean_report({a, b});
  CHECK(m.overall.aji == doctest::Approx(0.4));
  CHECK(m.gt_count == 7);
}
