#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. They are written from the definitions, not from the
// library code, and favour obviousness over speed.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "idn/evaluation.hpp"
#include "idn/objectives.hpp"
#include "idn/rng.hpp"
#include "idn/scoring.hpp"

namespace oracle {

using idn::Real;

inline Real box_iou(const idn::Box& a, const idn::Box& b) {
  const Real ix = std::max<Real>(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const Real iy = std::max<Real>(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const Real inter = ix * iy;
  const Real uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0 ? inter / uni : 0;
}

// AP straight from the definition: sum over recall increments of the best
// precision achieved at any rank with at least that recall.
inline Real ap_from_flags(const std::vector<bool>& tp, std::size_t n_gt) {
  const std::size_t n = tp.size();
  Real ap = 0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!tp[i]) continue;
    ++hits;
    Real best = 0;
    std::size_t h = hits;
    for (std::size_t j = i; j < n; ++j) {
      if (j > i && tp[j]) ++h;
      best = std::max(best, static_cast<Real>(h) / static_cast<Real>(j + 1));
    }
    ap += best / static_cast<Real>(n_gt);
  }
  return ap;
}

// Every composition scanned separately; every detection compared against
// every ground truth of the whole set.
inline idn::MapResult brute_map(std::span<const idn::Detection> dets, std::span<const idn::GroundTruth> gts,
                                const idn::HoiCatalog& catalog, Real thr) {
  idn::MapResult out;
  out.ap.resize(catalog.size());
  Real sum = 0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < catalog.size(); ++c) {
    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].composition == c) mine.push_back(i);
    }
    // Insertion sort by score, earlier input first on ties.
    for (std::size_t a = 1; a < mine.size(); ++a) {
      for (std::size_t b = a; b > 0 && dets[mine[b]].score > dets[mine[b - 1]].score; --b) {
        std::swap(mine[b], mine[b - 1]);
      }
    }
    std::size_t n_gt = 0;
    for (const auto& g : gts) n_gt += g.composition == c;
    if (n_gt == 0) continue;
    std::vector<bool> taken(gts.size(), false), tp;
    for (std::size_t i : mine) {
      std::optional<std::size_t> pick;
      Real pick_overlap = 0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (taken[g] || gts[g].composition != c || gts[g].image != dets[i].image) continue;
        const Real o = std::min(box_iou(dets[i].human, gts[g].human), box_iou(dets[i].object, gts[g].object));
        if (o >= thr && (!pick || o > pick_overlap)) {
          pick = g;
          pick_overlap = o;
        }
      }
      if (pick) taken[*pick] = true;
      tp.push_back(pick.has_value());
    }
    out.ap[c] = ap_from_flags(tp, n_gt);
    sum += *out.ap[c];
    ++count;
  }
  out.full = count ? sum / static_cast<Real>(count) : 0;
  return out;
}

struct RandomScene {
  std::vector<idn::Detection> detections;
  std::vector<idn::GroundTruth> groundtruth;
  idn::HoiCatalog catalog;
};

// A few images, 3 compositions, at most max_dets detections, boxes jittered
// around ground truth so that IoU near 0.5 and duplicate matches both occur.
// Scores come from a small set so ties are common.
inline RandomScene random_scene(idn::Rng& rng, std::size_t max_dets) {
  RandomScene s;
  s.catalog = idn::HoiCatalog(2, {{0, 0, "a"}, {1, 0, "a"}, {0, 1, "b"}});
  auto jitter = [&](const idn::Box& b, Real amount) {
    const Real w = b.width(), h = b.height();
    idn::Box o{b.x1 + rng.uniform(-amount, amount) * w, b.y1 + rng.uniform(-amount, amount) * h,
               b.x2 + rng.uniform(-amount, amount) * w, b.y2 + rng.uniform(-amount, amount) * h};
    if (o.x2 <= o.x1) o.x2 = o.x1 + 1;
    if (o.y2 <= o.y1) o.y2 = o.y1 + 1;
    return o;
  };
  const std::size_t images = 1 + rng.index(3);
  for (std::size_t im = 0; im < images; ++im) {
    const std::size_t n = rng.index(4);
    for (std::size_t k = 0; k < n; ++k) {
      const Real x = rng.uniform(0, 50), y = rng.uniform(0, 50);
      idn::GroundTruth g;
      g.image = static_cast<std::int64_t>(im);
      g.human = {x, y, x + rng.uniform(10, 40), y + rng.uniform(10, 40)};
      g.object = {x + 5, y + 5, x + 5 + rng.uniform(10, 40), y + 5 + rng.uniform(10, 40)};
      g.composition = rng.index(3);
      s.groundtruth.push_back(g);
    }
  }
  const std::size_t n_dets = rng.index(max_dets + 1);
  for (std::size_t k = 0; k < n_dets; ++k) {
    idn::Detection d;
    if (!s.groundtruth.empty() && rng.bernoulli(0.8)) {
      const auto& g = s.groundtruth[rng.index(s.groundtruth.size())];
      d.image = g.image;
      d.human = jitter(g.human, 0.25);
      d.object = jitter(g.object, 0.25);
      d.composition = rng.bernoulli(0.8) ? g.composition : rng.index(3);
    } else {
      d.image = static_cast<std::int64_t>(rng.index(images));
      const Real x = rng.uniform(0, 80), y = rng.uniform(0, 80);
      d.human = {x, y, x + 20, y + 20};
      d.object = {x, y, x + 15, y + 25};
      d.composition = rng.index(3);
    }
    d.score = static_cast<Real>(rng.index(5)) / 4;
    s.detections.push_back(d);
  }
  return s;
}

// Thresholds by scanning every entry of each column.
inline idn::Thresholds scan_thresholds(const idn::Tensor& d, const idn::Tensor& y) {
  idn::Thresholds t;
  for (std::size_t v = 0; v < d.cols(); ++v) {
    std::optional<Real> t0, t1;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      const Real x = d.at(r, v);
      if (y.at(r, v) != 0) {
        if (!t0 || x > *t0) t0 = x;
      } else if (!t1 || x < *t1) {
        t1 = x;
      }
    }
    t.t0.push_back(t0);
    t.t1.push_back(t1);
  }
  return t;
}

// Random distances / labels with ties and empty sides mixed in.
inline std::pair<idn::Tensor, idn::Tensor> random_batch(idn::Rng& rng) {
  const std::size_t rows = 1 + rng.index(12), cols = 1 + rng.index(5);
  idn::Tensor d({rows, cols}), y({rows, cols});
  const Real p = rng.uniform();
  for (std::size_t i = 0; i < d.size(); ++i) {
    d[i] = rng.bernoulli(0.2) ? static_cast<Real>(rng.index(3)) : rng.uniform(0, 5);
    y[i] = rng.bernoulli(p) ? 1 : 0;
  }
  return {d, y};
}

// Per-verb AP of a score column ranked against labels, by the definition,
// worst-case ordering on ties avoided by the same stable order as the input.
inline Real ranking_ap(const std::vector<Real>& scores, const std::vector<bool>& positive) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  std::vector<bool> tp;
  std::size_t n_pos = 0;
  for (std::size_t i : order) {
    tp.push_back(positive[i]);
    n_pos += positive[i];
  }
  return n_pos ? ap_from_flags(tp, n_pos) : 0;
}

}  // namespace oracle
