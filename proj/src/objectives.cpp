#include "idn/objectives.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "idn/autoencoder.hpp"

namespace idn {

BatchLabels batch_labels(const Dataset& dataset, std::span<const PairView> views) {
  const auto n = static_cast<std::size_t>(dataset.n_verbs());
  BatchLabels out{Tensor({views.size(), n}), Tensor({views.size(), 1})};
  for (std::size_t r = 0; r < views.size(); ++r) {
    const PairSample& p = dataset.pairs().at(views[r].pair_index);
    for (std::size_t v = 0; v < n; ++v) out.verbs.at(r, v) = p.labels[v] != 0 ? 1 : 0;
    out.interactive.at(r, 0) = p.interactive ? 1 : 0;
  }
  return out;
}

namespace {

void check_label_shape(const Tensor& distances, const Tensor& labels) {
  if (distances.rank() != 2 || labels.shape() != distances.shape()) {
    throw DimensionError(fmt::format("distances {} against labels {}", shape_string(distances.shape()),
                                     shape_string(labels.shape())));
  }
  if (distances.rows() == 0) throw ContractError("empty batch");
}

// Index of the extreme distance on one side of verb v, or npos when the side is empty.
constexpr std::size_t npos = static_cast<std::size_t>(-1);

struct Extremes {
  std::size_t max_pos = npos;  // argmax over positives -> t0
  std::size_t min_neg = npos;  // argmin over negatives -> t1
};

Extremes find_extremes(const Tensor& d, const Tensor& y, std::size_t v) {
  Extremes e;
  Real best_pos = 0, best_neg = 0;
  for (std::size_t r = 0; r < d.rows(); ++r) {
    const Real x = d.at(r, v);
    if (y.at(r, v) != 0) {
      if (e.max_pos == npos || x > best_pos) {
        best_pos = x;
        e.max_pos = r;
      }
    } else {
      if (e.min_neg == npos || x < best_neg) {
        best_neg = x;
        e.min_neg = r;
      }
    }
  }
  return e;
}

}  // namespace

Thresholds semi_hard_thresholds(const Tensor& distances, const Tensor& labels) {
  check_label_shape(distances, labels);
  Thresholds t;
  const std::size_t n = distances.cols();
  t.t0.resize(n);
  t.t1.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const Extremes e = find_extremes(distances, labels, v);
    if (e.max_pos != npos) t.t0[v] = distances.at(e.max_pos, v);
    if (e.min_neg != npos) t.t1[v] = distances.at(e.min_neg, v);
  }
  return t;
}

Real hinge_loss(const Tensor& distances, const Tensor& labels, const Thresholds& thresholds) {
  check_label_shape(distances, labels);
  const std::size_t n = distances.cols();
  if (thresholds.t0.size() != n || thresholds.t1.size() != n) {
    throw DimensionError(fmt::format("thresholds for {} verbs, distances have {}", thresholds.t0.size(), n));
  }
  Real total = 0;
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t r = 0; r < distances.rows(); ++r) {
      const Real d = distances.at(r, v);
      if (labels.at(r, v) != 0) {
        if (thresholds.t1[v]) total += std::max<Real>(0, d - *thresholds.t1[v]);
      } else if (thresholds.t0[v]) {
        total += std::max<Real>(0, *thresholds.t0[v] - d);
      }
    }
  }
  return total / static_cast<Real>(distances.rows());
}

Var hinge_loss(Var distances, const Tensor& labels) {
  const Tensor& d = distances.value();
  check_label_shape(d, labels);
  Graph& g = *distances.graph;
  const std::size_t rows = d.rows(), n = d.cols();
  const Real inv = 1.0 / static_cast<Real>(rows);

  // Per active term: (row, verb, sign on d_row, threshold row).
  struct Term {
    std::size_t row, verb, anchor;
    Real sign;
  };
  std::vector<Term> active;
  Real total = 0;
  for (std::size_t v = 0; v < n; ++v) {
    const Extremes e = find_extremes(d, labels, v);
    bool pos_used = false, neg_used = false;
    for (std::size_t r = 0; r < rows; ++r) {
      const Real x = d.at(r, v);
      if (labels.at(r, v) != 0) {
        if (e.min_neg == npos) continue;
        const Real m = x - d.at(e.min_neg, v);
        g.note_kink(m);
        neg_used = true;
        if (m > 0) {
          total += m;
          active.push_back({r, v, e.min_neg, 1});
        }
      } else {
        if (e.max_pos == npos) continue;
        const Real m = d.at(e.max_pos, v) - x;
        g.note_kink(m);
        pos_used = true;
        if (m > 0) {
          total += m;
          active.push_back({r, v, e.max_pos, -1});
        }
      }
    }
    // A tie for the extreme changes which entry the threshold follows.
    if (neg_used) g.note_branch(e.min_neg);
    if (pos_used) g.note_branch(e.max_pos);
  }
  Tensor out({1, 1});
  out[0] = total * inv;
  return g.record(std::move(out), {distances.id}, [active = std::move(active), n, inv](Graph& g, std::size_t self) {
    const std::size_t in = g.node_input(self, 0);
    const Real up = g.node_grad(self)[0] * inv;
    Tensor& dd = g.grad_buffer(in);
    for (const Term& t : active) {
      dd[t.row * n + t.verb] += t.sign * up;
      dd[t.anchor * n + t.verb] -= t.sign * up;
    }
  });
}

VerbClsLoss verb_cls_loss(Var distances, Var bias, const Tensor& labels, const VerbClsOptions& options) {
  check_label_shape(distances.value(), labels);
  if (!(options.hinge_weight >= 0)) throw ContractError("hinge weight must be >= 0");
  VerbClsLoss out;
  out.entropy = options.form == EntropyForm::exp_distance
                    ? bce_exp_distance(distances, labels)
                    : bce_with_logits(add_row_bias(scale(distances, -1), bias), labels);
  if (options.sum_over_verbs) out.entropy = scale(out.entropy, static_cast<Real>(labels.cols()));
  out.hinge = hinge_loss(distances, labels);
  out.total = add(out.entropy, scale(out.hinge, options.hinge_weight));
  return out;
}

InteractivenessLoss interactiveness_losses(Graph& g, const ModelConfig& config, Var f_u, Var f_ho,
                                           std::span<const Var> integrated, const Tensor& interactive) {
  const std::size_t rows = f_u.value().rows();
  if (interactive.rows() != rows || interactive.cols() != 1 || interactive.rank() != 2) {
    throw DimensionError(fmt::format("interactiveness labels {} for a batch of {}",
                                     shape_string(interactive.shape()), rows));
  }
  InteractivenessLoss out;
  out.union_bin = bce_with_logits(interactiveness_logit(g, config, f_u), interactive);
  out.ho_bin = bce_with_logits(interactiveness_logit(g, config, f_ho), Tensor({rows, 1}));
  out.total = add(out.union_bin, out.ho_bin);
  if (!integrated.empty()) {
    Var sum = bce_with_logits(interactiveness_logit(g, config, integrated[0]), interactive);
    for (std::size_t i = 1; i < integrated.size(); ++i) {
      sum = add(sum, bce_with_logits(interactiveness_logit(g, config, integrated[i]), interactive));
    }
    out.integrated = scale(sum, 1.0 / static_cast<Real>(integrated.size()));
    out.total = add(out.total, *out.integrated);
  }
  return out;
}

std::string LossReport::csv_header() {
  return "u_ent,u_hinge,u_cls,ho_ent,ho_hinge,ho_cls,u_bin,ho_bin,i_bin,bin,idn,ae_recon,ae_cls,total";
}

std::string LossReport::csv_row() const {
  return fmt::format("{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}",
                     u_ent, u_hinge, u_cls, ho_ent, ho_hinge, ho_cls, u_bin, ho_bin, i_bin, bin, idn, ae_recon,
                     ae_cls, total);
}

namespace {

// Running sum over the enabled terms, in the order they are added.
struct Accumulator {
  Graph& g;
  std::optional<Var> sum;

  void add_term(Var v) { sum = sum ? add(*sum, v) : v; }
  Var get() { return sum ? *sum : g.constant(Tensor({1, 1})); }
};

}  // namespace

TotalLoss total_loss(Graph& g, const ModelConfig& config, const IdnForward& forward, const BatchLabels& labels,
                     const LossToggles& toggles, bool include_ae) {
  TotalLoss out;
  LossReport& rep = out.report;
  Accumulator idn{g, {}};

  if (toggles.union_cls && forward.d_u) {
    const auto l = verb_cls_loss(*forward.d_u, g.param(names::kUnionLossBias), labels.verbs, toggles.cls);
    rep.u_ent = g.scalar(l.entropy);
    rep.u_hinge = g.scalar(l.hinge);
    rep.u_cls = g.scalar(l.total);
    idn.add_term(l.total);
  }
  if (toggles.ho_cls && forward.d_ho) {
    const auto l = verb_cls_loss(*forward.d_ho, g.param(names::kHoLossBias), labels.verbs, toggles.cls);
    rep.ho_ent = g.scalar(l.entropy);
    rep.ho_hinge = g.scalar(l.hinge);
    rep.ho_cls = g.scalar(l.total);
    idn.add_term(l.total);
  }
  if (toggles.bin) {
    const auto l = interactiveness_losses(g, config, forward.f_u, forward.f_ho, forward.integrated, labels.interactive);
    rep.u_bin = g.scalar(l.union_bin);
    rep.ho_bin = g.scalar(l.ho_bin);
    if (l.integrated) rep.i_bin = g.scalar(*l.integrated);
    rep.bin = g.scalar(l.total);
    idn.add_term(l.total);
  }
  Var idn_total = idn.get();
  rep.idn = g.scalar(idn_total);

  Accumulator all{g, {idn_total}};
  if (include_ae && toggles.ae_recon) {
    Var recon = mse(ae_decode(g, config, forward.f_u), forward.inputs.union_input);
    rep.ae_recon = g.scalar(recon);
    all.add_term(recon);
  }
  if (include_ae && toggles.ae_cls) {
    Var cls = bce_with_logits(forward.ae_scores, labels.verbs);
    rep.ae_cls = g.scalar(cls);
    all.add_term(cls);
  }
  out.total = all.get();
  rep.total = g.scalar(out.total);
  return out;
}

TotalLoss ae_pretrain_loss(Graph& g, const ModelConfig& config, Var union_input, const BatchLabels& labels,
                           const LossToggles& toggles) {
  const auto l = ae_losses(g, config, union_input, labels.verbs);
  TotalLoss out;
  Accumulator all{g, {}};
  if (toggles.ae_recon) {
    out.report.ae_recon = g.scalar(l.recon);
    all.add_term(l.recon);
  }
  if (toggles.ae_cls) {
    out.report.ae_cls = g.scalar(l.cls);
    all.add_term(l.cls);
  }
  out.total = all.get();
  out.report.total = g.scalar(out.total);
  return out;
}

}  // namespace idn
