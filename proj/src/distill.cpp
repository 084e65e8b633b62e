#include "coin/distill.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "coin/io.hpp"
#include "coin/parallel.hpp"
#include "coin/simd.hpp"
#include "coin/synth.hpp"

namespace coin {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_depth(const StudentParams& p, const FeatureGrid& f) {
  if (p.depth != f.depth()) {
    throw ArgumentError("student expects depth " + std::to_string(p.depth) + ", features have " +
                        std::to_string(f.depth()));
  }
}

// Loss terms of one head plus dL/dz per pixel (z = pre-sigmoid logit).
struct HeadLoss {
  double ce = 0.0;
  double dice = 0.0;
  std::size_t counted = 0;
};

HeadLoss head_loss(const std::vector<double>& p, const BinaryMask& target, std::vector<double>* dz) {
  auto y = target.values();
  const std::size_t n = p.size();
  HeadLoss out;
  double inter = 0.0, sp = 0.0, sy = 0.0, ce = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] == kIgnore) continue;
    const double yi = y[i] != 0 ? 1.0 : 0.0;
    const double pc = std::clamp(p[i], kCeClamp, 1.0 - kCeClamp);
    ce -= yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc);
    inter += p[i] * yi;
    sp += p[i];
    sy += yi;
    ++out.counted;
  }
  if (dz != nullptr) dz->assign(n, 0.0);
  if (out.counted == 0) return out;
  const double m = static_cast<double>(out.counted);
  const double den = sp + sy + kDiceEps;
  const double num = 2.0 * inter + kDiceEps;
  out.ce = ce / m;
  out.dice = 1.0 - num / den;
  if (dz != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      if (y[i] == kIgnore) continue;
      const double yi = y[i] != 0 ? 1.0 : 0.0;
      const double pi = p[i];
      const double sg = pi * (1.0 - pi);
      const bool clamped = pi < kCeClamp || pi > 1.0 - kCeClamp;
      const double d_ce = clamped ? 0.0 : (pi - yi) / m;
      const double d_dice_dp = -(2.0 * yi * den - num) / (den * den);
      (*dz)[i] = d_ce + d_dice_dp * sg;
    }
  }
  return out;
}

LossReport combine(const HeadLoss& b, const HeadLoss& e) {
  LossReport r;
  r.ce_bin = b.ce;
  r.dice_bin = b.dice;
  r.ce_edge = e.ce;
  r.dice_edge = e.dice;
  r.total = r.ce_bin + r.dice_bin + r.ce_edge + r.dice_edge;
  r.counted = b.counted;
  r.all_ignored = b.counted == 0 && e.counted == 0;
  return r;
}

std::vector<float> normal_vec(std::size_t n, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(nd(rng));
  return v;
}

}  // namespace

StudentParams StudentParams::zeros(int depth, int hidden) {
  if (depth < 1 || hidden < 1) throw ArgumentError("student depth and hidden width must be >= 1");
  StudentParams p;
  p.depth = depth;
  p.hidden = hidden;
  p.w1.assign(static_cast<std::size_t>(depth) * hidden, 0.0f);
  p.b1.assign(static_cast<std::size_t>(hidden), 0.0f);
  p.w_bin.assign(static_cast<std::size_t>(hidden), 0.0f);
  p.w_edge.assign(static_cast<std::size_t>(hidden), 0.0f);
  return p;
}

StudentParams StudentParams::random(int depth, int hidden, std::uint64_t seed) {
  StudentParams p = zeros(depth, hidden);
  std::mt19937_64 rng(mix64(seed ^ 0x5747u));
  p.w1 = normal_vec(p.w1.size(), 1.0 / std::sqrt(static_cast<double>(depth)), rng);
  p.w_bin = normal_vec(p.w_bin.size(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  p.w_edge = normal_vec(p.w_edge.size(), 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return p;
}

void StudentParams::check_finite() const {
  auto ok = [](const std::vector<float>& v) {
    return std::all_of(v.begin(), v.end(), [](float x) { return std::isfinite(x); });
  };
  if (!ok(w1) || !ok(b1) || !ok(w_bin) || !ok(w_edge) || !std::isfinite(b_bin) ||
      !std::isfinite(b_edge)) {
    throw NumericError("student parameters are not finite");
  }
}

StudentOutput student_forward(const StudentParams& params, const FeatureGrid& features) {
  check_depth(params, features);
  const auto& K = simd::active();
  const int h = features.height(), w = features.width();
  const auto d = static_cast<std::size_t>(params.depth);
  StudentOutput out{Grid<float>(h, w, 0.0f), Grid<float>(h, w, 0.0f)};
  std::vector<double> hid(static_cast<std::size_t>(params.hidden));
  for (std::size_t i = 0; i < features.pixel_count(); ++i) {
    const float* x = features.pixel(i).data();
    double zb = params.b_bin, ze = params.b_edge;
    for (int j = 0; j < params.hidden; ++j) {
      const double z = K.dot(params.w1.data() + static_cast<std::size_t>(j) * d, x, d) + params.b1[j];
      const double a = z > 0.0 ? z : 0.0;
      zb += a * params.w_bin[j];
      ze += a * params.w_edge[j];
    }
    out.p_fg.values()[i] = static_cast<float>(sigmoid(zb));
    out.p_edge.values()[i] = static_cast<float>(sigmoid(ze));
  }
  return out;
}

LossReport loss_seg(const Grid<float>& p_fg, const Grid<float>& p_edge, const BinaryMask& bin_target,
                    const BinaryMask& edge_target) {
  if (!p_fg.same_shape(bin_target) || !p_edge.same_shape(edge_target) || !p_fg.same_shape(p_edge)) {
    throw ArgumentError("loss_seg: shape mismatch");
  }
  const std::vector<double> pb(p_fg.values().begin(), p_fg.values().end());
  const std::vector<double> pe(p_edge.values().begin(), p_edge.values().end());
  return combine(head_loss(pb, bin_target, nullptr), head_loss(pe, edge_target, nullptr));
}

LossAndGrads loss_and_grads(const StudentParams& params, const FeatureGrid& features,
                            const BinaryMask& bin_target, const BinaryMask& edge_target) {
  check_depth(params, features);
  if (!bin_target.same_shape(features.height(), features.width()) ||
      !edge_target.same_shape(features.height(), features.width())) {
    throw ArgumentError("loss_and_grads: target shape differs from features");
  }
  const auto& K = simd::active();
  const std::size_t n = features.pixel_count();
  const auto d = static_cast<std::size_t>(params.depth);
  const auto hw = static_cast<std::size_t>(params.hidden);
  std::vector<double> pre(n * hw), pb(n), pe(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float* x = features.pixel(i).data();
    double zb = params.b_bin, ze = params.b_edge;
    for (std::size_t j = 0; j < hw; ++j) {
      const double z = K.dot(params.w1.data() + j * d, x, d) + params.b1[j];
      pre[i * hw + j] = z;
      const double a = z > 0.0 ? z : 0.0;
      zb += a * params.w_bin[j];
      ze += a * params.w_edge[j];
    }
    pb[i] = sigmoid(zb);
    pe[i] = sigmoid(ze);
  }
  std::vector<double> dzb, dze;
  const HeadLoss lb = head_loss(pb, bin_target, &dzb);
  const HeadLoss le = head_loss(pe, edge_target, &dze);

  LossAndGrads out;
  out.loss = combine(lb, le);
  StudentGrads& g = out.grads;
  g.w1.assign(hw * d, 0.0);
  g.b1.assign(hw, 0.0);
  g.w_bin.assign(hw, 0.0);
  g.w_edge.assign(hw, 0.0);
  if (out.loss.all_ignored) return out;
  std::vector<double> dh(hw);
  for (std::size_t i = 0; i < n; ++i) {
    const double gb = dzb[i], ge = dze[i];
    if (gb == 0.0 && ge == 0.0) continue;
    g.b_bin += gb;
    g.b_edge += ge;
    const float* x = features.pixel(i).data();
    for (std::size_t j = 0; j < hw; ++j) {
      const double z = pre[i * hw + j];
      if (z <= 0.0) continue;
      g.w_bin[j] += gb * z;
      g.w_edge[j] += ge * z;
      const double dz = gb * params.w_bin[j] + ge * params.w_edge[j];
      g.b1[j] += dz;
      K.axpy(dz, x, g.w1.data() + j * d, d);
    }
  }
  return out;
}

EpochReport train_epoch(StudentParams& params, const std::vector<TrainSample>& data, double lr,
                        std::uint64_t seed, int epoch) {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError("learning rate must be >= 0");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(mix64(seed ^ mix64(static_cast<std::uint64_t>(epoch) + 1)));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  EpochReport rep;
  double sum = 0.0;
  for (std::size_t k : order) {
    const TrainSample& s = data[k];
    const LossAndGrads lg = loss_and_grads(params, *s.features, *s.bin_target, *s.edge_target);
    if (!std::isfinite(lg.loss.total)) {
      throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch) +
                         " (ce_bin=" + std::to_string(lg.loss.ce_bin) +
                         ", dice_bin=" + std::to_string(lg.loss.dice_bin) + ")");
    }
    sum += lg.loss.total;
    ++rep.steps;
    if (lr == 0.0 || lg.loss.all_ignored) continue;
    auto step = [lr](std::vector<float>& p, const std::vector<double>& gr) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = static_cast<float>(p[i] - lr * gr[i]);
    };
    step(params.w1, lg.grads.w1);
    step(params.b1, lg.grads.b1);
    step(params.w_bin, lg.grads.w_bin);
    step(params.w_edge, lg.grads.w_edge);
    params.b_bin = static_cast<float>(params.b_bin - lr * lg.grads.b_bin);
    params.b_edge = static_cast<float>(params.b_edge - lr * lg.grads.b_edge);
  }
  params.check_finite();
  rep.mean_loss = rep.steps == 0 ? 0.0 : sum / static_cast<double>(rep.steps);
  return rep;
}

InstanceMap predict_instances(const StudentParams& params, const FeatureGrid& features,
                              const MorphConfig& morph) {
  const StudentOutput o = student_forward(params, features);
  const int h = features.height(), w = features.width();
  BinaryMask binary(h, w, 0), sep(h, w, 0);
  for (std::size_t i = 0; i < binary.size(); ++i) {
    binary.values()[i] = o.p_fg.values()[i] > 0.5f ? 1 : 0;
    sep.values()[i] = o.p_edge.values()[i] > 0.5f ? 1 : 0;
  }
  if (count_foreground(binary) == 0) return InstanceMap(h, w);
  const BinaryMask thick = dilate(sep, morph.edge_dilate);
  BinaryMask core(h, w, 0);
  for (std::size_t i = 0; i < core.size(); ++i) {
    core.values()[i] = binary.values()[i] != 0 && thick.values()[i] == 0 ? 1 : 0;
  }
  const InstanceMap seeds = connected_components(core, morph.connectivity);
  MarkerSet markers;
  for (std::uint32_t id = 1; id <= seeds.count(); ++id) {
    markers.push_back({center_point(seeds.mask_of(id)), id});
  }
  return watershed_split(binary, markers, morph.connectivity);
}

InstanceMap step1_instances(const ImageRecord& record, const CoinConfig& config, int jobs) {
  const PropagationResult p = propagate_image(record.features, record.seed, config.propagation, jobs);
  return split_instances(p.mask.foreground, config.morph);
}

namespace {

MetricsReport evaluate_set(const std::vector<const ImageRecord*>& eval,
                           const std::vector<InstanceMap>& preds, const MetricsConfig& mc) {
  std::vector<MetricsReport> reps;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    reps.push_back(evaluate(preds[i], *eval[i]->gt_instances, mc));
  }
  return mean_report(reps);
}

}  // namespace

CoinResult run_coin(const std::vector<ImageRecord>& records, MaskProposalOracle& oracle,
                    const CoinConfig& config, int jobs) {
  if (records.empty()) throw DataError("run_coin: empty dataset");
  const DistillConfig& dc = config.distill;
  if (dc.rounds < 0 || dc.epochs < 0) throw ConfigError("rounds and epochs must be >= 0");
  std::vector<std::size_t> train_idx, eval_idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].validate();
    (records[i].split == "test" ? eval_idx : train_idx).push_back(i);
  }
  if (eval_idx.empty()) eval_idx = train_idx;
  if (train_idx.empty()) train_idx = eval_idx;
  std::vector<const ImageRecord*> eval;
  bool have_gt = true;
  for (std::size_t i : eval_idx) {
    eval.push_back(&records[i]);
    have_gt = have_gt && records[i].gt_instances.has_value();
  }

  const int depth = records.front().features.depth();
  CoinResult result;
  result.params = StudentParams::random(depth, dc.hidden, dc.seed);

  std::vector<InstanceMap> current(records.size());
  parallel_for(records.size(), jobs, [&](std::size_t i) {
    current[i] = step1_instances(records[i], config, 1);
  });

  auto snapshot = [&](RoundSummary& s, const std::vector<InstanceMap>& all) {
    if (!have_gt) return;
    std::vector<InstanceMap> preds;
    for (std::size_t i : eval_idx) preds.push_back(all[i]);
    s.test = evaluate_set(eval, preds, config.metrics);
    s.has_metrics = true;
  };

  RoundSummary r0;
  r0.round = 0;
  for (std::size_t i : train_idx) r0.instances += current[i].count();
  snapshot(r0, current);
  result.rounds.push_back(std::move(r0));

  int epoch_counter = 0;
  for (int t = 1; t <= dc.rounds; ++t) {
    RoundSummary s;
    s.round = t;
    std::vector<ImageScores> scores(train_idx.size());
    std::vector<PseudoLabelPair> targets(train_idx.size());
    parallel_for(train_idx.size(), jobs, [&](std::size_t k) {
      const ImageRecord& rec = records[train_idx[k]];
      const InstanceMap& inst = current[train_idx[k]];
      if (config.scoring.bypass) {
        scores[k].image_id = rec.id;
        targets[k] = naive_pseudo_masks(rec.id, inst, oracle);
      } else {
        scores[k] = score_image(rec.id, inst, oracle, config.scoring);
        targets[k] = build_pseudo_masks(inst, scores[k]);
      }
    });
    std::vector<TrainSample> data;
    for (std::size_t k = 0; k < train_idx.size(); ++k) {
      s.instances += current[train_idx[k]].count();
      s.accepted += scores[k].accepted();
      s.rejected += scores[k].rejected();
      data.push_back({&records[train_idx[k]].features, &targets[k].binary, &targets[k].edge});
    }
    for (int e = 0; e < dc.epochs; ++e) {
      s.train_loss = train_epoch(result.params, data, dc.lr, dc.seed, epoch_counter++).mean_loss;
    }
    parallel_for(records.size(), jobs, [&](std::size_t i) {
      current[i] = predict_instances(result.params, records[i].features, config.morph);
    });
    snapshot(s, current);
    s.scores = std::move(scores);
    spdlog::info("round {}: accepted {} / {} instances, train loss {:.4f}", t, s.accepted,
                 s.instances, s.train_loss);
    result.rounds.push_back(std::move(s));
  }
  result.predictions = std::move(current);
  return result;
}

void save_checkpoint(const StudentParams& p, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto put = [&](const std::string& name, int rows, int cols, std::vector<float> v) {
    write_cgf(to_cgf(Grid<float>(rows, cols, std::move(v))), dir / (name + ".cgf"));
  };
  put("w1", p.hidden, p.depth, p.w1);
  put("b1", p.hidden, 1, p.b1);
  put("w_bin", p.hidden, 1, p.w_bin);
  put("b_bin", 1, 1, {p.b_bin});
  put("w_edge", p.hidden, 1, p.w_edge);
  put("b_edge", 1, 1, {p.b_edge});
  nlohmann::json m = {{"depth", p.depth},
                      {"hidden", p.hidden},
                      {"tensors", {"w1", "b1", "w_bin", "b_bin", "w_edge", "b_edge"}}};
  write_text(dir / "manifest.json", m.dump(1) + "\n");
}

StudentParams load_checkpoint(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "manifest.json");
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                              reinterpret_cast<const char*>(bytes.data() + bytes.size()));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "manifest.json").string() + ": " + e.what());
  }
  const int depth = m.value("depth", 0), hidden = m.value("hidden", 0);
  StudentParams p = StudentParams::zeros(depth, hidden);
  auto get = [&](const std::string& name, int rows, int cols) {
    const Grid<float> g = float_grid_from_cgf(read_cgf(dir / (name + ".cgf")));
    if (!g.same_shape(rows, cols)) throw FormatError(name + ".cgf: unexpected shape");
    return g.vector();
  };
  p.w1 = get("w1", hidden, depth);
  p.b1 = get("b1", hidden, 1);
  p.w_bin = get("w_bin", hidden, 1);
  p.b_bin = get("b_bin", 1, 1)[0];
  p.w_edge = get("w_edge", hidden, 1);
  p.b_edge = get("b_edge", 1, 1)[0];
  p.check_finite();
  return p;
}

}  // namespace coin
