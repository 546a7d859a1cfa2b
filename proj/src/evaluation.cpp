#include "idn/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include <fmt/format.h>

#include "idn/autoencoder.hpp"

namespace idn {

Real iou(const Box& a, const Box& b) {
  const Real iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const Real ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0;
  const Real inter = iw * ih;
  const Real uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : 0;
}

Real average_precision(const std::vector<bool>& tp, std::size_t n_gt) {
  if (n_gt == 0) throw ContractError("average precision is undefined without ground truth");
  const std::size_t n = tp.size();
  std::vector<Real> recall(n), precision(n);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (tp[i]) ++hits;
    recall[i] = static_cast<Real>(hits) / static_cast<Real>(n_gt);
    precision[i] = static_cast<Real>(hits) / static_cast<Real>(i + 1);
  }
  // Precision envelope from the right, then sum precision over recall steps.
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  Real ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (recall[i] > prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

namespace {
std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return dets[a].score > dets[b].score; });
  return order;
}
}  // namespace

std::vector<bool> match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts, Real thr) {
  std::unordered_map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) by_image[gts[g].image].push_back(g);
  std::vector<bool> used(gts.size(), false);
  std::vector<bool> out;
  out.reserve(dets.size());
  for (std::size_t i : score_order(dets)) {
    const Detection& d = dets[i];
    std::optional<std::size_t> best;
    Real best_overlap = -1;
    if (auto it = by_image.find(d.image); it != by_image.end()) {
      for (std::size_t g : it->second) {
        if (used[g]) continue;
        const Real oh = iou(d.human, gts[g].human);
        const Real oo = iou(d.object, gts[g].object);
        if (oh < thr || oo < thr) continue;
        const Real overlap = std::min(oh, oo);
        if (overlap > best_overlap) {
          best_overlap = overlap;
          best = g;
        }
      }
    }
    if (best) used[*best] = true;
    out.push_back(best.has_value());
  }
  return out;
}

MapResult compute_map(std::span<const Detection> detections, std::span<const GroundTruth> groundtruth,
                      const HoiCatalog& catalog, Real iou_threshold) {
  const std::size_t nc = catalog.size();
  std::vector<std::vector<Detection>> dets(nc);
  std::vector<std::vector<GroundTruth>> gts(nc);
  for (const auto& d : detections) {
    if (d.composition >= nc) throw ContractError(fmt::format("detection for unknown composition {}", d.composition));
    dets[d.composition].push_back(d);
  }
  for (const auto& g : groundtruth) {
    if (g.composition >= nc) throw ContractError(fmt::format("ground truth for unknown composition {}", g.composition));
    gts[g.composition].push_back(g);
  }
  MapResult result;
  result.ap.resize(nc);
  std::map<std::string, std::pair<Real, std::size_t>> split_sums;
  Real full_sum = 0;
  std::size_t full_count = 0;
  for (std::size_t c = 0; c < nc; ++c) {
    if (gts[c].empty()) continue;
    const Real ap = average_precision(match_detections(dets[c], gts[c], iou_threshold), gts[c].size());
    result.ap[c] = ap;
    full_sum += ap;
    ++full_count;
    const auto& split = catalog.compositions()[c].split;
    if (!split.empty()) {
      auto& s = split_sums[split];
      s.first += ap;
      ++s.second;
    }
  }
  result.full = full_count ? full_sum / static_cast<Real>(full_count) : 0;
  for (const auto& [name, s] : split_sums) result.splits[name] = s.first / static_cast<Real>(s.second);
  return result;
}

std::vector<Detection> to_detections(std::span<const DetectionRecord> records) {
  std::vector<Detection> out;
  for (const auto& r : records) {
    for (const auto& [comp, score] : r.p_hoi) out.push_back({r.image, r.human, r.object, comp, score});
  }
  return out;
}

std::vector<GroundTruth> groundtruth_from(const Dataset& dataset, const HoiCatalog& catalog) {
  std::vector<GroundTruth> out;
  for (std::size_t i = 0; i < dataset.pairs().size(); ++i) {
    const auto& p = dataset.pairs()[i];
    const auto& o = dataset.instance(p.object_id);
    for (int v : p.verbs()) {
      const auto comp = catalog.find(v, o.category);
      if (!comp) continue;
      out.push_back({static_cast<std::int64_t>(i), dataset.instance(p.human_id).box, o.box, *comp});
    }
  }
  return out;
}

std::string format_map_csv(const MapResult& result, const HoiCatalog& catalog) {
  std::string out = "composition,verb,category,split,ap\n";
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    const auto& comp = catalog.compositions()[c];
    out += fmt::format("{},{},{},{},{}\n", c, comp.verb, comp.category, comp.split,
                       result.ap[c] ? fmt::format("{:.9g}", *result.ap[c]) : std::string("absent"));
  }
  out += fmt::format("mean,full,{:.9g}\n", result.full);
  for (const auto& [name, v] : result.splits) out += fmt::format("mean,{},{:.9g}\n", name, v);
  return out;
}

VerbMap verb_classification_map(const Tensor& scores, const Dataset& dataset,
                                std::span<const std::size_t> pair_indices) {
  const auto n = static_cast<std::size_t>(dataset.n_verbs());
  if (scores.rows() != pair_indices.size() || scores.cols() != n) {
    throw DimensionError(fmt::format("scores {} for {} pairs and {} verbs", shape_string(scores.shape()),
                                     pair_indices.size(), n));
  }
  VerbMap out;
  out.ap.resize(n);
  Real sum = 0;
  std::size_t count = 0;
  for (std::size_t v = 0; v < n; ++v) {
    std::vector<std::size_t> order(pair_indices.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores.at(a, v) > scores.at(b, v); });
    std::size_t positives = 0;
    std::vector<bool> tp(order.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      tp[k] = dataset.pairs().at(pair_indices[order[k]]).has_verb(static_cast<int>(v));
      if (tp[k]) ++positives;
    }
    if (positives == 0) continue;
    out.ap[v] = average_precision(tp, positives);
    sum += *out.ap[v];
    ++count;
  }
  out.mean = count ? sum / static_cast<Real>(count) : 0;
  return out;
}

IptDiagnostic ipt_diagnostic(const IdnModel& model, const Dataset& dataset, int verb) {
  IptDiagnostic out;
  out.verb = verb;
  std::vector<std::size_t> with_verb;
  for (std::size_t i = 0; i < dataset.pairs().size(); ++i) {
    if (dataset.pairs()[i].has_verb(verb)) with_verb.push_back(i);
  }
  if (with_verb.size() < 2) return out;

  const auto& anchor = dataset.pairs()[with_verb[0]];
  const std::vector<std::size_t> others(with_verb.begin() + 1, with_verb.end());
  const auto m = others.size();
  const auto plain = plain_views(dataset, others);
  std::vector<PairView> swap_object, swap_human;
  for (const auto& v : plain) {
    swap_object.push_back({v.pair_index, anchor.human_id, v.object_id});  // f_h ⊕ f_o^i
    swap_human.push_back({v.pair_index, v.human_id, anchor.object_id});   // f_h^i ⊕ f_o
  }

  Graph g(&model.params);
  const auto& cfg = model.config;
  const PairView anchor_view{with_verb[0], anchor.human_id, anchor.object_id};
  const Tensor f_u = ae_encode(g, cfg, assemble_batch(g, cfg, dataset, std::span(&anchor_view, 1)).union_input).value();
  const Tensor f_ui = ae_encode(g, cfg, assemble_batch(g, cfg, dataset, plain).union_input).value();
  auto transformed = [&](std::span<const PairView> views) {
    const Var code = ae_encode(g, cfg, assemble_batch(g, cfg, dataset, views).pair_input);
    return mlp_forward(g, cfg.integration_spec(), names::integration(verb), code).value();
  };
  const Tensor t_o = transformed(swap_object);
  const Tensor t_h = transformed(swap_human);

  Real d1 = 0, d2 = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const Real d = l2_distance(f_u.row_span(0), f_ui.row_span(i));
    d1 += d * d;
    d2 += l2_distance(t_o.row_span(i), f_ui.row_span(i)) + l2_distance(t_h.row_span(i), f_ui.row_span(i));
  }
  out.d1 = d1 / static_cast<Real>(m);
  out.d2 = d2 / static_cast<Real>(2 * m);
  return out;
}

std::vector<IptDiagnostic> ipt_diagnostics(const IdnModel& model, const Dataset& dataset) {
  std::vector<IptDiagnostic> out;
  for (int v = 0; v < model.config.n_verbs; ++v) out.push_back(ipt_diagnostic(model, dataset, v));
  return out;
}

std::string format_diagnostic_csv(std::span<const IptDiagnostic> rows) {
  std::string out = "verb,D1,D2\n";
  for (const auto& r : rows) {
    if (r.d1 && r.d2) {
      out += fmt::format("{},{:.9g},{:.9g}\n", r.verb, *r.d1, *r.d2);
    } else {
      out += fmt::format("{},absent,absent\n", r.verb);
    }
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot write " + path.string());
  out << content;
}

}  // namespace idn
