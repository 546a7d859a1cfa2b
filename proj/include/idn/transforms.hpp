#pragma once

#include <optional>
#include <span>
#include <vector>

#include "idn/model.hpp"

namespace idn {

// Module switches used by the ablation runs.
struct ModuleToggles {
  bool integration = true;    // T_I and its distance d_u
  bool decomposition = true;  // T_D and its distance d_ho
  bool ipt = true;            // instance exchange in the last training phase
  // true: T_D consumes the integrated {f^{v_i}_u} (the loop).
  // false: T_D consumes the real f_u.
  bool decompose_integrated = true;

  friend bool operator==(const ModuleToggles&, const ModuleToggles&) = default;
};

// f^{v_i}_u = T_I^{v_i}(f_h ⊕ f_o) for every verb; output i belongs to verb i.
std::vector<Var> integrate(Graph& g, const ModelConfig& config, Var pair_code);
// f^{v_i}_h ⊕ f^{v_i}_o = T_D^{v_i}(unions[i]). A single input is fed to every verb.
std::vector<Var> decompose(Graph& g, const ModelConfig& config, std::span<const Var> unions);

// ||reference - candidates[i]||_2 per row, stacked into [B x n].
Var union_distances(Var f_u, std::span<const Var> integrated);
Var ho_distances(Var f_ho, std::span<const Var> decomposed);

// Shared FC head; returns logits [B x 1]. Sigmoid gives the interactiveness.
Var interactiveness_logit(Graph& g, const ModelConfig& config, Var feature);

// Inference helpers on frozen parameters. Inputs are [B x code] matrices.
std::vector<Tensor> integrate(const IdnModel& model, const Tensor& pair_code);
std::vector<Tensor> decompose(const IdnModel& model, std::span<const Tensor> unions);
Tensor union_distances(const Tensor& f_u, std::span<const Tensor> integrated);
Tensor ho_distances(const Tensor& f_ho, std::span<const Tensor> decomposed);
Tensor interactiveness(const IdnModel& model, const Tensor& feature);

// Everything the objectives and the scorer need from one batch.
struct IdnForward {
  AssembledBatch inputs;
  Var f_u;        // compressed union
  Var f_ho;       // compressed f̂_h ⊕ f̂_o
  Var ae_scores;  // S^AE_v
  std::vector<Var> integrated;
  std::vector<Var> decomposed;
  std::optional<Var> d_u;   // [B x n], present when integration is on
  std::optional<Var> d_ho;  // [B x n], present when decomposition is on
};

IdnForward idn_forward(Graph& g, const ModelConfig& config, const Dataset& dataset, std::span<const PairView> views,
                       const ModuleToggles& modules);

}  // namespace idn
