#include "coin/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "coin/morphology.hpp"

namespace coin {
namespace {

void check_shape(int h1, int w1, int h2, int w2, const char* what) {
  if (h1 != h2 || w1 != w2) {
    throw ArgumentError(std::string(what) + ": shape mismatch " + std::to_string(h1) + "x" +
                        std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                        std::to_string(w2));
  }
}

struct Counts {
  std::size_t inter = 0, pred = 0, gt = 0, total = 0;
};

Counts count(const BinaryMask& pred, const BinaryMask& gt, const char* what) {
  check_shape(pred.height(), pred.width(), gt.height(), gt.width(), what);
  Counts c;
  auto p = pred.values();
  auto g = gt.values();
  c.total = p.size();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool a = p[i] != 0, b = g[i] != 0;
    c.pred += a;
    c.gt += b;
    c.inter += a && b;
  }
  return c;
}

InstanceMap restrict_to(const InstanceMap& map, const std::vector<bool>& keep) {
  LabelGrid out(map.height(), map.width(), 0u);
  auto src = map.labels().values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = keep[src[i]] ? src[i] : 0u;
  return InstanceMap::compact(out);
}

}  // namespace

double mask_iou(const BinaryMask& pred, const BinaryMask& gt) {
  const Counts c = count(pred, gt, "iou");
  const std::size_t uni = c.pred + c.gt - c.inter;
  return uni == 0 ? 1.0 : static_cast<double>(c.inter) / static_cast<double>(uni);
}

double mask_dice(const BinaryMask& pred, const BinaryMask& gt) {
  const Counts c = count(pred, gt, "dice");
  const std::size_t den = c.pred + c.gt;
  return den == 0 ? 1.0 : 2.0 * static_cast<double>(c.inter) / static_cast<double>(den);
}

PixelRates fp_fn_rates(const BinaryMask& pred, const BinaryMask& gt) {
  const Counts c = count(pred, gt, "fp_fn_rates");
  PixelRates r;
  const std::size_t bg = c.total - c.gt;
  r.fp = bg == 0 ? 0.0 : static_cast<double>(c.pred - c.inter) / static_cast<double>(bg);
  r.fn = c.gt == 0 ? 0.0 : static_cast<double>(c.gt - c.inter) / static_cast<double>(c.gt);
  return r;
}

double Overlap::iou(std::uint32_t g, std::uint32_t p) const {
  const std::size_t i = at(g, p);
  const std::size_t u = gt_area[g] + pred_area[p] - i;
  return u == 0 ? 0.0 : static_cast<double>(i) / static_cast<double>(u);
}

Overlap compute_overlap(const InstanceMap& pred, const InstanceMap& gt) {
  check_shape(pred.height(), pred.width(), gt.height(), gt.width(), "instance overlap");
  Overlap o;
  o.gt_count = gt.count();
  o.pred_count = pred.count();
  o.gt_area.assign(o.gt_count + 1, 0);
  o.pred_area.assign(o.pred_count + 1, 0);
  o.gt_first.assign(o.gt_count + 1, SIZE_MAX);
  o.pred_first.assign(o.pred_count + 1, SIZE_MAX);
  o.inter.assign(static_cast<std::size_t>(o.gt_count + 1) * (o.pred_count + 1), 0);
  auto g = gt.labels().values();
  auto p = pred.labels().values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    ++o.gt_area[g[i]];
    ++o.pred_area[p[i]];
    o.gt_first[g[i]] = std::min(o.gt_first[g[i]], i);
    o.pred_first[p[i]] = std::min(o.pred_first[p[i]], i);
    ++o.inter[static_cast<std::size_t>(g[i]) * (o.pred_count + 1) + p[i]];
  }
  return o;
}

double aji(const InstanceMap& pred, const InstanceMap& gt) {
  const Overlap o = compute_overlap(pred, gt);
  if (o.gt_count == 0 && o.pred_count == 0) return 1.0;
  std::vector<std::uint32_t> order(o.gt_count);
  std::iota(order.begin(), order.end(), 1u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (o.gt_area[a] != o.gt_area[b]) return o.gt_area[a] > o.gt_area[b];
    return o.gt_first[a] < o.gt_first[b];
  });
  std::vector<bool> used(o.pred_count + 1, false);
  std::size_t inter = 0, uni = 0;
  for (std::uint32_t g : order) {
    std::uint32_t best = 0;
    double best_iou = 0.0;
    for (std::uint32_t p = 1; p <= o.pred_count; ++p) {
      if (used[p] || o.at(g, p) == 0) continue;
      const double v = o.iou(g, p);
      if (v > best_iou || (v == best_iou && best != 0 && o.pred_first[p] < o.pred_first[best])) {
        best_iou = v;
        best = p;
      }
    }
    if (best == 0) {
      uni += o.gt_area[g];
      continue;
    }
    used[best] = true;
    const std::size_t i = o.at(g, best);
    inter += i;
    uni += o.gt_area[g] + o.pred_area[best] - i;
  }
  for (std::uint32_t p = 1; p <= o.pred_count; ++p) {
    if (!used[p]) uni += o.pred_area[p];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

PanopticQuality panoptic_quality(const InstanceMap& pred, const InstanceMap& gt) {
  const Overlap o = compute_overlap(pred, gt);
  PanopticQuality q;
  if (o.gt_count == 0 && o.pred_count == 0) {
    q.pq = q.sq = q.rq = 1.0;
    return q;
  }
  std::vector<bool> pred_matched(o.pred_count + 1, false);
  double iou_sum = 0.0;
  for (std::uint32_t g = 1; g <= o.gt_count; ++g) {
    for (std::uint32_t p = 1; p <= o.pred_count; ++p) {
      if (o.at(g, p) == 0) continue;
      const double v = o.iou(g, p);
      if (v > 0.5) {
        if (pred_matched[p]) throw NumericError("panoptic matching is not unique");
        pred_matched[p] = true;
        ++q.tp;
        iou_sum += v;
      }
    }
  }
  q.fn = o.gt_count - q.tp;
  q.fp = o.pred_count - q.tp;
  q.sq = q.tp == 0 ? 0.0 : iou_sum / static_cast<double>(q.tp);
  q.rq = static_cast<double>(q.tp) /
         (static_cast<double>(q.tp) + 0.5 * static_cast<double>(q.fp + q.fn));
  q.pq = q.sq * q.rq;
  return q;
}

AdjacencySplit split_adjacent(const InstanceMap& gt, int dilate_radius, int min_neighbors) {
  if (dilate_radius < 1) throw ArgumentError("adjacency dilation radius must be >= 1");
  const int h = gt.height(), w = gt.width();
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -dilate_radius; dr <= dilate_radius; ++dr) {
    for (int dc = -dilate_radius; dc <= dilate_radius; ++dc) {
      if (dr * dr + dc * dc <= dilate_radius * dilate_radius) offsets.emplace_back(dr, dc);
    }
  }
  const std::uint32_t n = gt.count();
  std::vector<std::vector<std::uint32_t>> neighbors(n + 1);
  std::vector<std::uint32_t> here;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      here.clear();
      for (auto [dr, dc] : offsets) {
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
        const std::uint32_t id = gt(rr, cc);
        if (id != 0 && std::find(here.begin(), here.end(), id) == here.end()) here.push_back(id);
      }
      if (here.size() < 2) continue;
      for (std::uint32_t a : here) {
        for (std::uint32_t b : here) {
          if (a != b && std::find(neighbors[a].begin(), neighbors[a].end(), b) == neighbors[a].end()) {
            neighbors[a].push_back(b);
          }
        }
      }
    }
  }
  AdjacencySplit out;
  for (std::uint32_t id = 1; id <= n; ++id) {
    if (static_cast<int>(neighbors[id].size()) >= min_neighbors) {
      out.adjacent.push_back(id);
    } else {
      out.non_adjacent.push_back(id);
    }
  }
  return out;
}

MetricSet metric_set(const InstanceMap& pred, const InstanceMap& gt) {
  MetricSet m;
  const BinaryMask pf = pred.foreground(), gf = gt.foreground();
  m.aji = aji(pred, gt);
  const PanopticQuality q = panoptic_quality(pred, gt);
  m.pq = q.pq;
  m.sq = q.sq;
  m.rq = q.rq;
  m.iou = mask_iou(pf, gf);
  m.dice = mask_dice(pf, gf);
  const PixelRates r = fp_fn_rates(pf, gf);
  m.fp = r.fp;
  m.fn = r.fn;
  return m;
}

MetricsReport evaluate(const InstanceMap& pred, const InstanceMap& gt, const MetricsConfig& config) {
  check_shape(pred.height(), pred.width(), gt.height(), gt.width(), "evaluate");
  MetricsReport rep;
  rep.overall = metric_set(pred, gt);
  rep.gt_count = gt.count();
  rep.pred_count = pred.count();
  rep.matched = panoptic_quality(pred, gt).tp;

  const AdjacencySplit split =
      split_adjacent(gt, config.adjacent_radius, config.adjacent_min_neighbors);
  std::vector<bool> gt_adj(gt.count() + 1, false), gt_non(gt.count() + 1, false);
  for (auto id : split.adjacent) gt_adj[id] = true;
  for (auto id : split.non_adjacent) gt_non[id] = true;
  const Overlap o = compute_overlap(pred, gt);
  std::vector<bool> pred_adj(pred.count() + 1, false), pred_non(pred.count() + 1, false);
  for (std::uint32_t p = 1; p <= o.pred_count; ++p) {
    std::uint32_t best = 0;
    std::size_t best_i = 0;
    for (std::uint32_t g = 1; g <= o.gt_count; ++g) {
      if (o.at(g, p) > best_i) {
        best_i = o.at(g, p);
        best = g;
      }
    }
    if (best == 0) continue;
    (gt_adj[best] ? pred_adj : pred_non)[p] = true;
  }
  rep.adjacent = metric_set(restrict_to(pred, pred_adj), restrict_to(gt, gt_adj));
  rep.non_adjacent = metric_set(restrict_to(pred, pred_non), restrict_to(gt, gt_non));
  return rep;
}

MetricsReport mean_report(const std::vector<MetricsReport>& reports) {
  MetricsReport out;
  if (reports.empty()) return out;
  auto acc = [&](MetricSet MetricsReport::*part) {
    MetricSet s;
    for (const auto& r : reports) {
      const MetricSet& m = r.*part;
      s.aji += m.aji;
      s.pq += m.pq;
      s.sq += m.sq;
      s.rq += m.rq;
      s.iou += m.iou;
      s.dice += m.dice;
      s.fp += m.fp;
      s.fn += m.fn;
    }
    const double n = static_cast<double>(reports.size());
    s.aji /= n;
    s.pq /= n;
    s.sq /= n;
    s.rq /= n;
    s.iou /= n;
    s.dice /= n;
    s.fp /= n;
    s.fn /= n;
    return s;
  };
  out.overall = acc(&MetricsReport::overall);
  out.adjacent = acc(&MetricsReport::adjacent);
  out.non_adjacent = acc(&MetricsReport::non_adjacent);
  for (const auto& r : reports) {
    out.gt_count += r.gt_count;
    out.pred_count += r.pred_count;
    out.matched += r.matched;
  }
  return out;
}

nlohmann::json to_json(const MetricSet& m) {
  return {{"aji", m.aji}, {"pq", m.pq},     {"sq", m.sq}, {"rq", m.rq},
          {"iou", m.iou}, {"dice", m.dice}, {"fp", m.fp}, {"fn", m.fn}};
}

nlohmann::json to_json(const MetricsReport& r) {
  return {{"overall", to_json(r.overall)},
          {"adjacent", to_json(r.adjacent)},
          {"non_adjacent", to_json(r.non_adjacent)},
          {"counts", {{"gt", r.gt_count}, {"pred", r.pred_count}, {"matched", r.matched}}}};
}

namespace {
MetricSet set_from_json(const nlohmann::json& j) {
  MetricSet m;
  m.aji = j.at("aji").get<double>();
  m.pq = j.at("pq").get<double>();
  m.sq = j.at("sq").get<double>();
  m.rq = j.at("rq").get<double>();
  m.iou = j.at("iou").get<double>();
  m.dice = j.at("dice").get<double>();
  m.fp = j.at("fp").get<double>();
  m.fn = j.at("fn").get<double>();
  return m;
}
}  // namespace

MetricsReport report_from_json(const nlohmann::json& j) {
  try {
    MetricsReport r;
    r.overall = set_from_json(j.at("overall"));
    r.adjacent = set_from_json(j.at("adjacent"));
    r.non_adjacent = set_from_json(j.at("non_adjacent"));
    const auto& c = j.at("counts");
    r.gt_count = c.at("gt").get<std::size_t>();
    r.pred_count = c.at("pred").get<std::size_t>();
    r.matched = c.at("matched").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("metrics report: ") + e.what());
  }
}

}  // namespace coin
