#include "coin/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <numeric>
#include <random>

#include <boost/multiprecision/cpp_int.hpp>
#include <spdlog/spdlog.h>

#include "coin/metrics.hpp"
#include "coin/morphology.hpp"

namespace coin {

std::size_t ImageScores::accepted() const {
  return static_cast<std::size_t>(std::count_if(instances.begin(), instances.end(),
                                                [](const ScoredInstance& s) { return s.label != -1; }));
}

std::size_t ImageScores::rejected() const {
  return static_cast<std::size_t>(std::count_if(instances.begin(), instances.end(),
                                                [](const ScoredInstance& s) { return s.label == -1; }));
}

double score_instance(const BinaryMask& instance, const BinaryMask& proposal) {
  if (!instance.same_shape(proposal)) throw ArgumentError("score_instance: shape mismatch");
  std::size_t inter = 0, uni = 0;
  auto a = instance.values();
  auto b = proposal.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += x && y;
    uni += x || y;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ThresholdReport adaptive_threshold(const std::vector<double>& c, ThresholdMode mode) {
  if (c.empty()) throw ArgumentError("adaptive_threshold needs at least one confidence");
  ThresholdReport t;
  const double n = static_cast<double>(c.size());
  t.mean = std::accumulate(c.begin(), c.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : c) ss += (x - t.mean) * (x - t.mean);
  t.std = std::sqrt(ss / n);
  if (mode == ThresholdMode::kMeanPlusStd) {
    t.delta = t.mean + t.std;
  } else {
    t.delta = t.mean > 0.0 ? t.std / t.mean : 0.0;
  }
  return t;
}

int classify_confidence(double confidence, double delta) {
  if (confidence > delta) return 1;
  if (confidence > 0.0) return -1;
  return 0;
}

std::vector<int> classify_instances(const std::vector<double>& confidences, double delta) {
  std::vector<int> out;
  out.reserve(confidences.size());
  for (double c : confidences) out.push_back(classify_confidence(c, delta));
  return out;
}

std::vector<int> classify_scores(const std::vector<double>& c, ThresholdMode mode) {
  if (c.empty()) return {};
  const ThresholdReport t = adaptive_threshold(c, mode);
  std::vector<int> out = classify_instances(c, t.delta);
  if (mode != ThresholdMode::kMeanPlusStd) return out;
  double scale = 1.0;
  for (double x : c) scale = std::max(scale, std::abs(x));
  const double tol = (4.0 * static_cast<double>(c.size()) + 16.0) *
                     std::numeric_limits<double>::epsilon() * scale;
  // With d_i = n c_i - sum c: c_i > mean + std  <=>  d_i > 0 and n d_i^2 > sum d_j^2.
  using boost::multiprecision::cpp_rational;
  std::optional<std::pair<cpp_rational, cpp_rational>> sums;
  const cpp_rational n(static_cast<long long>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0.0 || std::abs(c[i] - t.delta) > tol) continue;
    if (!sums) {
      cpp_rational s = 0, ss = 0;
      for (double x : c) s += cpp_rational(x);
      for (double x : c) {
        const cpp_rational d = n * cpp_rational(x) - s;
        ss += d * d;
      }
      sums.emplace(s, ss);
    }
    const cpp_rational d = n * cpp_rational(c[i]) - sums->first;
    out[i] = d > 0 && n * d * d > sums->second ? 1 : -1;
  }
  return out;
}

ImageScores score_image(const std::string& image_id, const InstanceMap& instances,
                        MaskProposalOracle& oracle, const ScoringConfig& config) {
  ImageScores out;
  out.image_id = image_id;
  const auto areas = instances.areas();
  std::vector<double> conf;
  for (std::uint32_t id = 1; id <= instances.count(); ++id) {
    const BinaryMask m = instances.mask_of(id);
    ScoredInstance s;
    s.id = id;
    s.area = areas[id];
    s.prompt = center_point(m);
    try {
      const BinaryMask p = oracle.propose(image_id, s.prompt);
      s.confidence = score_instance(m, p);
    } catch (const Error& e) {
      spdlog::warn("{}: instance {} at ({}, {}): {}; confidence set to 0", image_id, id,
                   s.prompt.row, s.prompt.col, e.what());
      s.oracle_error = true;
      s.confidence = 0.0;
    }
    conf.push_back(s.confidence);
    out.instances.push_back(s);
  }
  if (conf.empty()) return out;
  out.threshold = adaptive_threshold(conf, config.mode);
  const std::vector<int> labels = classify_scores(conf, config.mode);
  for (std::size_t i = 0; i < labels.size(); ++i) out.instances[i].label = labels[i];
  return out;
}

PseudoLabelPair build_pseudo_masks(const InstanceMap& instances, const std::vector<int>& labels) {
  if (labels.size() != instances.count()) {
    throw ArgumentError("build_pseudo_masks: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(instances.count()) + " instances");
  }
  const int h = instances.height(), w = instances.width();
  PseudoLabelPair out{BinaryMask(h, w, 0), BinaryMask(h, w, 0)};
  // Edges of accepted instances, each taken alone.
  LabelGrid accepted(h, w, 0u);
  auto src = instances.labels().values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] != 0 && labels[src[i] - 1] == 1) accepted.values()[i] = src[i];
  }
  const BinaryMask edges = instance_edges(InstanceMap::compact(accepted));
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i] == 0) continue;
    switch (labels[src[i] - 1]) {
      case 1:
        out.binary.values()[i] = 1;
        out.edge.values()[i] = edges.values()[i];
        break;
      case -1:
        out.binary.values()[i] = kIgnore;
        out.edge.values()[i] = kIgnore;
        break;
      default:
        break;
    }
  }
  return out;
}

PseudoLabelPair build_pseudo_masks(const InstanceMap& instances, const ImageScores& scores) {
  std::vector<int> labels(instances.count(), 0);
  for (const auto& s : scores.instances) labels.at(s.id - 1) = s.label;
  return build_pseudo_masks(instances, labels);
}

PseudoLabelPair naive_pseudo_masks(const std::string& image_id, const InstanceMap& instances,
                                   MaskProposalOracle& oracle) {
  const int h = instances.height(), w = instances.width();
  PseudoLabelPair out{BinaryMask(h, w, 0), BinaryMask(h, w, 0)};
  for (std::uint32_t id = 1; id <= instances.count(); ++id) {
    BinaryMask p;
    try {
      p = oracle.propose(image_id, center_point(instances.mask_of(id)));
    } catch (const Error& e) {
      spdlog::warn("{}: instance {}: {}", image_id, id, e.what());
      continue;
    }
    const BinaryMask e = boundary_edges(p);
    for (std::size_t i = 0; i < p.size(); ++i) {
      out.binary.values()[i] |= p.values()[i];
      out.edge.values()[i] |= e.values()[i];
    }
  }
  return out;
}

std::vector<double> default_topk_fractions() {
  return {0.01, 0.02, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
}

std::vector<TopKPoint> topk_confidence_curve(const std::vector<ScoredImage>& images,
                                             const std::vector<double>& fractions,
                                             std::uint64_t seed, int random_draws) {
  struct Entry {
    double confidence;
    std::size_t inter;
    std::size_t uni;
    std::size_t order;
  };
  std::vector<Entry> pool;
  for (const auto& im : images) {
    if (im.gt == nullptr) throw UnsupportedError("top-k curve needs ground truth");
    const Overlap o = compute_overlap(*im.instances, *im.gt);
    for (const auto& s : im.scores->instances) {
      std::uint32_t best = 0;
      double best_iou = 0.0;
      for (std::uint32_t g = 1; g <= o.gt_count; ++g) {
        const double v = o.iou(g, s.id);
        if (v > best_iou) {
          best_iou = v;
          best = g;
        }
      }
      Entry e{s.confidence, 0, o.pred_area[s.id], pool.size()};
      if (best != 0) {
        e.inter = o.at(best, s.id);
        e.uni = o.gt_area[best] + o.pred_area[s.id] - e.inter;
      }
      pool.push_back(e);
    }
  }
  std::vector<TopKPoint> out;
  if (pool.empty()) return out;
  std::vector<Entry> ranked = pool;
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Entry& a, const Entry& b) { return a.confidence > b.confidence; });
  auto ratio = [](std::size_t i, std::size_t u) { return u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u); };
  auto summarize = [&](auto first, auto last, double& mean, double& pooled) {
    std::size_t i = 0, u = 0, n = 0;
    double acc = 0.0;
    for (auto it = first; it != last; ++it, ++n) {
      const Entry& e = *it;
      i += e.inter;
      u += e.uni;
      acc += ratio(e.inter, e.uni);
    }
    mean = n == 0 ? 0.0 : acc / static_cast<double>(n);
    pooled = ratio(i, u);
  };
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> idx(pool.size());
  for (double f : fractions) {
    TopKPoint p;
    p.fraction = f;
    p.k = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(f * pool.size())), 1, pool.size());
    summarize(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(p.k), p.scored, p.scored_pooled);
    std::vector<Entry> sample(p.k);
    double acc = 0.0, acc_pooled = 0.0;
    for (int d = 0; d < random_draws; ++d) {
      std::iota(idx.begin(), idx.end(), 0);
      // Partial Fisher-Yates: the first k slots are a uniform sample.
      for (std::size_t i = 0; i < p.k; ++i) {
        const std::size_t j = i + rng() % (idx.size() - i);
        std::swap(idx[i], idx[j]);
      }
      for (std::size_t i = 0; i < p.k; ++i) sample[i] = pool[idx[i]];
      double mean = 0.0, pooled = 0.0;
      summarize(sample.begin(), sample.end(), mean, pooled);
      acc += mean;
      acc_pooled += pooled;
    }
    p.random = acc / std::max(1, random_draws);
    p.random_pooled = acc_pooled / std::max(1, random_draws);
    out.push_back(p);
  }
  return out;
}

nlohmann::json to_json(const ThresholdReport& t) {
  return {{"mean", t.mean}, {"std", t.std}, {"delta", t.delta}};
}

nlohmann::json to_json(const ImageScores& scores) {
  nlohmann::json inst = nlohmann::json::array();
  for (const auto& s : scores.instances) {
    inst.push_back({{"id", s.id},
                    {"prompt", {s.prompt.row, s.prompt.col}},
                    {"confidence", s.confidence},
                    {"label", s.label}});
  }
  return {{"image_id", scores.image_id}, {"threshold", to_json(scores.threshold)}, {"instances", inst}};
}

}  // namespace coin
