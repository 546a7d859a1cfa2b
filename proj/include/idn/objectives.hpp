#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idn/transforms.hpp"

namespace idn {

struct BatchLabels {
  Tensor verbs;           // [B x n] multi-hot
  Tensor interactive;     // [B x 1] binary

  std::size_t batch() const { return verbs.rows(); }
};

BatchLabels batch_labels(const Dataset& dataset, std::span<const PairView> views);

// Per-verb semi-hard thresholds. t1 is the smallest distance among the batch
// pairs without the verb, t0 the largest among pairs with it. A side with no
// pairs yields no threshold and its hinge term is skipped.
struct Thresholds {
  std::vector<std::optional<Real>> t0;
  std::vector<std::optional<Real>> t1;
};

Thresholds semi_hard_thresholds(const Tensor& distances, const Tensor& labels);

// sum over verbs, mean over pairs of
//   y * max(0, d - t1) + (1 - y) * max(0, t0 - d).
Real hinge_loss(const Tensor& distances, const Tensor& labels, const Thresholds& thresholds);
// Differentiable form. Thresholds are recomputed from the batch and remain
// functions of the distances they select.
Var hinge_loss(Var distances, const Tensor& labels);

// Which probability the cross-entropy term reads off a distance.
enum class EntropyForm {
  exp_distance,  // p = exp(-d), the map scoring uses for P^u_v and P^ho_v
  sigmoid_bias,  // p = sigmoid(-d + b) with a learnable per-verb b
};

struct VerbClsOptions {
  EntropyForm form = EntropyForm::exp_distance;
  // Sum the per-verb cross-entropies (like the hinge) rather than average them.
  bool sum_over_verbs = true;
  Real hinge_weight = 0.1;

  friend bool operator==(const VerbClsOptions&, const VerbClsOptions&) = default;
};

struct VerbClsLoss {
  Var entropy;  // BCE against the labels, mean over pairs
  Var hinge;    // unweighted
  Var total;    // entropy + hinge_weight * hinge
};

// bias is a learnable per-verb offset [n]; only the sigmoid form reads it.
VerbClsLoss verb_cls_loss(Var distances, Var bias, const Tensor& labels, const VerbClsOptions& options = {});

struct InteractivenessLoss {
  Var union_bin;                  // L^u_bin: f_u against the pair label
  Var ho_bin;                     // L^ho_bin: f_h ⊕ f_o against 0
  std::optional<Var> integrated;  // L^I_bin: every f^{v_i}_u against the pair label
  Var total;
};

InteractivenessLoss interactiveness_losses(Graph& g, const ModelConfig& config, Var f_u, Var f_ho,
                                           std::span<const Var> integrated, const Tensor& interactive);

struct LossToggles {
  bool union_cls = true;  // L^u_cls
  bool ho_cls = true;     // L^ho_cls
  bool bin = true;        // L_bin
  bool ae_recon = true;   // L^AE_recon during joint training
  bool ae_cls = true;     // L^AE_cls during joint training
  VerbClsOptions cls;     // shape of L^u_cls and L^ho_cls

  friend bool operator==(const LossToggles&, const LossToggles&) = default;
};

// Disabled or unavailable components are reported as 0.
struct LossReport {
  Real u_ent = 0, u_hinge = 0, u_cls = 0;
  Real ho_ent = 0, ho_hinge = 0, ho_cls = 0;
  Real u_bin = 0, ho_bin = 0, i_bin = 0, bin = 0;
  Real idn = 0;  // L = L^u_cls + L^ho_cls + L_bin
  Real ae_recon = 0, ae_cls = 0;
  Real total = 0;  // L + AE terms

  static std::string csv_header();
  std::string csv_row() const;
};

struct TotalLoss {
  Var total;
  LossReport report;
};

// Assembles L (plus the AE terms when include_ae is set) from a forward pass.
TotalLoss total_loss(Graph& g, const ModelConfig& config, const IdnForward& forward, const BatchLabels& labels,
                     const LossToggles& toggles, bool include_ae);

// L^AE only, used while pretraining the compressor.
TotalLoss ae_pretrain_loss(Graph& g, const ModelConfig& config, Var union_input, const BatchLabels& labels,
                           const LossToggles& toggles);

}  // namespace idn
