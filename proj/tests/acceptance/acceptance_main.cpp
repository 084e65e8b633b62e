// Acceptance run: one PASS/FAIL line per primary criterion. Exit status is
// nonzero when any criterion fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "coin/cli.hpp"
#include "coin/distill.hpp"
#include "coin/metrics.hpp"
#include "coin/morphology.hpp"
#include "coin/propagation.hpp"
#include "coin/scoring.hpp"
#include "coin/synth.hpp"
#include "support/fixtures.hpp"

using namespace coin;
using namespace coin::testing;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// Standard fixture: library defaults throughout.
const std::vector<ImageRecord>& standard_records() {
  static const std::vector<ImageRecord> recs = gen_dataset(SynthConfig{});
  return recs;
}

SimilarityMap random_sim(Rng& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SimilarityMap s{Grid<float>(1, n, 0.0f), Grid<float>(1, n, 0.0f)};
  for (int i = 0; i < n; ++i) {
    s.cell(0, i) = static_cast<float>(u(rng));
    s.tissue(0, i) = static_cast<float>(u(rng));
  }
  return s;
}

Verdict c1_ot() {
  const auto t0 = Clock::now();
  Rng rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lambdas[] = {0.01, 0.05, 0.1, 0.2, 0.45};

  double worst_marginal = 0.0;
  int unconverged = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int h = 2 + static_cast<int>(rng() % 30), w = 2 + static_cast<int>(rng() % 30);
    SimilarityMap s{Grid<float>(h, w, 0.0f), Grid<float>(h, w, 0.0f)};
    for (auto& v : s.cell.values()) v = static_cast<float>(2 * u(rng) - 1);
    for (auto& v : s.tissue.values()) v = static_cast<float>(2 * u(rng) - 1);
    SinkhornOptions opt;
    opt.lambda = lambdas[trial % 5];
    const auto plan = sinkhorn_plan(s, opt);
    if (!plan.converged) {
      ++unconverged;
      continue;
    }
    double s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
      worst_marginal = std::max(worst_marginal, std::abs(plan.t0[i] + plan.t1[i] - plan.r[i]));
      s0 += plan.t0[i];
      s1 += plan.t1[i];
    }
    worst_marginal = std::max({worst_marginal, std::abs(s0 - plan.c0), std::abs(s1 - plan.c1)});
  }

  double worst_gap = 0.0;
  const int steps_for[] = {0, 2, 2001, 201, 41};
  for (int n = 1; n <= 4; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto sim = random_sim(rng, n);
      std::vector<double> r(n);
      double total = 0.0;
      for (auto& x : r) total += (x = 0.2 + u(rng));
      for (auto& x : r) x /= total;
      const double c0 = 0.05 + 0.9 * u(rng);
      const double lambda = lambdas[trial % 5];
      const auto plan = sinkhorn_plan(sim, r, c0, 1.0 - c0, {lambda, 1e-12, 100000, 0.05});
      const double grid = grid_search_objective(sim, r, c0, 1.0 - c0, lambda, steps_for[n], 12);
      worst_gap = std::max(worst_gap, std::abs(plan.objective(sim) - grid));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_marginal <= 1e-6 && worst_gap <= 1e-4 && secs < 5.0,
          fmt::format("max marginal error {:.2e} (<= 1e-6; {} of 200 hit max_iter and are excluded), max objective gap vs grid {:.2e} "
                      "(<= 1e-4), {:.2f} s (< 5)",
                      worst_marginal, unconverged, worst_gap, secs)};
}

struct Step1Stats {
  double seed_fn = 0.0, prop_fn = 0.0, prop_fp = 0.0, ot_fn = 0.0, ot_fp = 0.0;
};

Verdict c2_step1() {
  const auto t0 = Clock::now();
  const auto& recs = standard_records();
  Step1Stats s;
  PropagationConfig cfg;
  for (const auto& r : recs) {
    const auto gt = r.gt_instances->foreground();
    s.seed_fn += fp_fn_rates(r.seed, gt).fn;
    cfg.use_ot = false;
    const auto p = fp_fn_rates(propagate_image(r.features, r.seed, cfg, jobs()).mask.foreground, gt);
    cfg.use_ot = true;
    const auto o = fp_fn_rates(propagate_image(r.features, r.seed, cfg, jobs()).mask.foreground, gt);
    s.prop_fn += p.fn;
    s.prop_fp += p.fp;
    s.ot_fn += o.fn;
    s.ot_fp += o.fp;
  }
  const double n = static_cast<double>(recs.size());
  const double fn_cut = 1.0 - s.prop_fn / s.seed_fn;
  const double fp_cut = 1.0 - s.ot_fp / s.prop_fp;
  const double secs = seconds_since(t0);
  return {fn_cut >= 0.5 && fp_cut >= 0.3 && secs < 30.0,
          fmt::format("FN seed {:.4f} -> propagation {:.4f} (cut {:.1f}%, >= 50%); FP propagation {:.4f} -> OT "
                      "{:.4f} (cut {:.1f}%, >= 30%); {:.1f} s (< 30)",
                      s.seed_fn / n, s.prop_fn / n, 100 * fn_cut, s.prop_fp / n, s.ot_fp / n, 100 * fp_cut, secs)};
}

Verdict c3_lambda() {
  const auto& recs = standard_records();
  std::vector<double> ious;
  for (double lambda : {0.01, 0.05, 0.1, 0.2, 0.45}) {
    PropagationConfig cfg;
    cfg.ot.lambda = lambda;
    double acc = 0.0;
    for (const auto& r : recs) {
      acc += mask_iou(propagate_image(r.features, r.seed, cfg, jobs()).mask.foreground,
                      r.gt_instances->foreground());
    }
    ious.push_back(acc / static_cast<double>(recs.size()));
  }
  const auto [lo, hi] = std::minmax_element(ious.begin(), ious.end());
  const double spread = *hi - *lo;
  return {spread < 0.02, fmt::format("IoU at lambda 0.01..0.45: {:.4f}; spread {:.4f} (< 0.02)",
                                     fmt::join(ious, " "), spread)};
}

Verdict c4_topk() {
  const auto& recs = standard_records();
  OracleConfig oc;
  oc.failure_rate = 0.3;
  auto oracle = SyntheticOracle::from_records(recs, oc);
  CoinConfig cc;
  std::vector<InstanceMap> inst(recs.size());
  std::vector<ImageScores> scores(recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    inst[i] = step1_instances(recs[i], cc, jobs());
    scores[i] = score_image(recs[i].id, inst[i], *oracle);
  }
  std::vector<ScoredImage> pool;
  for (std::size_t i = 0; i < recs.size(); ++i) pool.push_back({&scores[i], &inst[i], &*recs[i].gt_instances});
  const auto curve = topk_confidence_curve(pool, {0.01, 0.1}, 17);
  const auto& top1 = curve[0];
  const auto& top10 = curve[1];
  return {top1.scored >= 0.95 && top10.scored - top10.random >= 0.3,
          fmt::format("failure rate 0.3: top-1% (k={}) AJI {:.4f} (>= 0.95); top-10% (k={}) {:.4f} vs random "
                      "{:.4f}, margin {:.4f} (>= 0.3); pooled top-10% {:.4f} vs random {:.4f}",
                      top1.k, top1.scored, top10.k, top10.scored, top10.random, top10.scored - top10.random,
                      top10.scored_pooled, top10.random_pooled)};
}

struct PipelineRuns {
  CoinResult scored;
  CoinResult bypass;
  double scored_seconds = 0.0;
};

const PipelineRuns& pipeline_runs() {
  static const PipelineRuns runs = [] {
    PipelineRuns out;
    const auto& recs = standard_records();
    {
      CachingOracle oracle(SyntheticOracle::from_records(recs, OracleConfig{}));
      const auto t0 = Clock::now();
      out.scored = run_coin(recs, oracle, CoinConfig{}, jobs());
      out.scored_seconds = seconds_since(t0);
    }
    CachingOracle oracle(SyntheticOracle::from_records(recs, OracleConfig{}));
    CoinConfig bypass;
    bypass.scoring.bypass = true;
    out.bypass = run_coin(recs, oracle, bypass, jobs());
    return out;
  }();
  return runs;
}

Verdict c5_naive() {
  const auto& runs = pipeline_runs();
  const double naive = runs.bypass.rounds.back().test.overall.aji;
  const double scored = runs.scored.rounds.back().test.overall.aji;
  return {naive < 0.05 && scored > 0.5,
          fmt::format("bypass AJI {:.4f} (< 0.05); scored AJI {:.4f} (> 0.5)", naive, scored)};
}

Verdict c6_trichotomy() {
  Rng rng(606);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> c(1 + rng() % 50);
    for (auto& x : c) {
      const auto kind = rng() % 5;
      x = kind == 0 ? 0.0 : kind == 1 ? std::round(u(rng) * 8) / 8 : u(rng);
    }
    if (classify_scores(c) != brute_force_labels(c)) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} mismatches over 1000 score vectors", mismatches)};
}

Verdict c7_gradients() {
  double worst = 0.0;
  int resamples = 0;
  std::size_t params = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto r = gradient_check(1000 + seed);
    worst = std::max(worst, r.max_rel_error);
    resamples += r.resamples;
    params += r.parameters;
  }
  return {worst < 1e-4, fmt::format("max relative error {:.2e} (< 1e-4) over 100 fixtures, {} parameters, "
                                    "{} kink resamples",
                                    worst, params, resamples)};
}

Verdict c8_distill() {
  const auto& runs = pipeline_runs();
  const auto& rounds = runs.scored.rounds;
  std::vector<double> ious;
  std::vector<std::size_t> accepted;
  for (const auto& r : rounds) {
    ious.push_back(r.test.overall.iou);
    if (r.round > 0) accepted.push_back(r.accepted);
  }
  const double gain = ious.back() - ious.front();
  const bool monotone = std::is_sorted(accepted.begin(), accepted.end());
  return {rounds.size() == 4 && gain >= 0.05 && monotone && runs.scored_seconds < 60.0,
          fmt::format("test IoU by round {:.4f}; gain {:+.4f} (>= 0.05); accepted {} (non-decreasing); "
                      "{:.1f} s (< 60)",
                      fmt::join(ious, " "), gain, fmt::join(accepted, " "), runs.scored_seconds)};
}

Verdict c9_metrics() {
  Rng rng(909);
  int aji_bad = 0, pq_bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 8), w = 1 + static_cast<int>(rng() % 8);
    const auto gt = random_instances(rng, h, w, static_cast<int>(rng() % 4));
    const auto pred = random_instances(rng, h, w, static_cast<int>(rng() % 4));
    if (aji(pred, gt) != reference_aji(pred, gt)) ++aji_bad;
    const auto a = panoptic_quality(pred, gt), b = reference_pq(pred, gt);
    if (a.tp != b.tp || std::abs(a.pq - b.pq) > 1e-12 || std::abs(a.sq - b.sq) > 1e-12) ++pq_bad;
  }
  int identity_bad = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto gt = random_instances(rng, 8, 8, 3);
    if (gt.count() == 0) continue;
    const auto m = evaluate(gt, gt).overall;
    for (double v : {m.aji, m.pq, m.sq, m.rq, m.iou, m.dice}) identity_bad += v != 1.0;
    identity_bad += m.fp != 0.0 || m.fn != 0.0;
  }
  return {aji_bad == 0 && pq_bad == 0 && identity_bad == 0,
          fmt::format("10000 trials: {} AJI and {} PQ mismatches; pred == gt off by {} values", aji_bad, pq_bad,
                      identity_bad)};
}

Verdict c10_morphology() {
  BinaryMask m = disc(21, 31, 10, 9, 6);
  const BinaryMask b = disc(21, 31, 10, 20, 6);
  for (std::size_t i = 0; i < m.size(); ++i) m.values()[i] |= b.values()[i];
  const auto inst = split_instances(m, MorphConfig{});
  bool partition = true;
  for (std::size_t i = 0; i < m.size(); ++i) {
    partition = partition && (inst.labels().values()[i] != 0) == (m.values()[i] != 0);
  }
  Rng rng(1010);
  int edt_bad = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto mask = random_mask(rng, 8, 8, 0.2 + 0.7 * static_cast<double>(rng() % 100) / 100.0);
    if (distance_transform(mask) != brute_force_edt(mask)) ++edt_bad;
  }
  return {inst.count() == 2 && partition && edt_bad == 0,
          fmt::format("touching discs -> {} instances, partition {}; EDT mismatches {} / 2000", inst.count(),
                      partition ? "yes" : "no", edt_bad)};
}

Verdict c11_determinism() {
  TempDir tmp("acceptance_det");
  const auto data = tmp / "data";
  if (run_cli({"--output", data.string(), "synth"}) != kExitOk) return {false, "synth failed"};
  const auto a = tmp / "a", b = tmp / "b";
  for (const auto& out : {a, b}) {
    if (run_cli({"--dataset", data.string(), "--output", out.string(), "run"}) != kExitOk) {
      return {false, "run failed"};
    }
  }
  const auto ta = read_tree(a), tb = read_tree(b);
  std::size_t differing = ta.size() == tb.size() ? 0 : std::max(ta.size(), tb.size());
  for (std::size_t i = 0; i < std::min(ta.size(), tb.size()); ++i) differing += ta[i] != tb[i];
  return {differing == 0 && !ta.empty(),
          fmt::format("{} files per tree, {} differ", ta.size(), differing)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"C1 OT correctness", c1_ot},
      {"C2 Step-1 direction", c2_step1},
      {"C3 lambda robustness", c3_lambda},
      {"C4 scoring separates", c4_topk},
      {"C5 naive oracle failure", c5_naive},
      {"C6 trichotomy", c6_trichotomy},
      {"C7 gradient check", c7_gradients},
      {"C8 distillation progress", c8_distill},
      {"C9 metric oracles", c9_metrics},
      {"C10 morphology", c10_morphology},
      {"C11 determinism", c11_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
