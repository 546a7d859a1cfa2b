#include "idn/transforms.hpp"

#include <fmt/format.h>

#include "idn/autoencoder.hpp"

namespace idn {

std::vector<Var> integrate(Graph& g, const ModelConfig& config, Var pair_code) {
  std::vector<Var> out;
  out.reserve(static_cast<std::size_t>(config.n_verbs));
  const auto spec = config.integration_spec();
  for (int v = 0; v < config.n_verbs; ++v) out.push_back(mlp_forward(g, spec, names::integration(v), pair_code));
  return out;
}

std::vector<Var> decompose(Graph& g, const ModelConfig& config, std::span<const Var> unions) {
  const auto n = static_cast<std::size_t>(config.n_verbs);
  if (unions.size() != n && unions.size() != 1) {
    throw DimensionError(fmt::format("decompose: {} inputs for {} verbs", unions.size(), n));
  }
  std::vector<Var> out;
  out.reserve(n);
  const auto spec = config.decomposition_spec();
  for (std::size_t v = 0; v < n; ++v) {
    const Var in = unions.size() == 1 ? unions[0] : unions[v];
    out.push_back(mlp_forward(g, spec, names::decomposition(static_cast<int>(v)), in));
  }
  return out;
}

namespace {
Var stacked_distances(Var reference, std::span<const Var> candidates) {
  if (candidates.empty()) throw ContractError("distance set over zero verbs");
  std::vector<Var> cols;
  cols.reserve(candidates.size());
  for (const Var& c : candidates) cols.push_back(row_distance(reference, c));
  return concat_cols(cols);
}

Tensor stacked_distances(const Tensor& reference, std::span<const Tensor> candidates) {
  if (candidates.empty()) throw ContractError("distance set over zero verbs");
  Tensor out({reference.rows(), candidates.size()});
  for (std::size_t v = 0; v < candidates.size(); ++v) {
    if (candidates[v].shape() != reference.shape()) {
      throw DimensionError(fmt::format("distance between {} and {}", shape_string(reference.shape()),
                                       shape_string(candidates[v].shape())));
    }
    for (std::size_t r = 0; r < reference.rows(); ++r) {
      out.at(r, v) = l2_distance(reference.row_span(r), candidates[v].row_span(r));
    }
  }
  return out;
}
}  // namespace

Var union_distances(Var f_u, std::span<const Var> integrated) { return stacked_distances(f_u, integrated); }
Var ho_distances(Var f_ho, std::span<const Var> decomposed) { return stacked_distances(f_ho, decomposed); }

Tensor union_distances(const Tensor& f_u, std::span<const Tensor> integrated) {
  return stacked_distances(f_u, integrated);
}
Tensor ho_distances(const Tensor& f_ho, std::span<const Tensor> decomposed) {
  return stacked_distances(f_ho, decomposed);
}

Var interactiveness_logit(Graph& g, const ModelConfig& config, Var feature) {
  return mlp_forward(g, config.interactiveness_spec(), names::kInteractiveness, feature);
}

std::vector<Tensor> integrate(const IdnModel& model, const Tensor& pair_code) {
  Graph g(&model.params);
  std::vector<Tensor> out;
  for (const Var& v : integrate(g, model.config, g.constant(pair_code))) out.push_back(v.value());
  return out;
}

std::vector<Tensor> decompose(const IdnModel& model, std::span<const Tensor> unions) {
  Graph g(&model.params);
  std::vector<Var> in;
  for (const auto& u : unions) in.push_back(g.constant(u));
  std::vector<Tensor> out;
  for (const Var& v : decompose(g, model.config, in)) out.push_back(v.value());
  return out;
}

Tensor interactiveness(const IdnModel& model, const Tensor& feature) {
  Graph g(&model.params);
  return sigmoid(interactiveness_logit(g, model.config, g.constant(feature))).value();
}

IdnForward idn_forward(Graph& g, const ModelConfig& config, const Dataset& dataset, std::span<const PairView> views,
                       const ModuleToggles& modules) {
  IdnForward out;
  out.inputs = assemble_batch(g, config, dataset, views);
  out.f_u = ae_encode(g, config, out.inputs.union_input);
  out.f_ho = ae_encode(g, config, out.inputs.pair_input);
  out.ae_scores = ae_classify(g, config, out.f_u);
  if (modules.integration) {
    out.integrated = integrate(g, config, out.f_ho);
    out.d_u = union_distances(out.f_u, out.integrated);
  }
  if (modules.decomposition) {
    if (modules.integration && modules.decompose_integrated) {
      out.decomposed = decompose(g, config, out.integrated);
    } else {
      const Var single[] = {out.f_u};
      out.decomposed = decompose(g, config, single);
    }
    out.d_ho = ho_distances(out.f_ho, out.decomposed);
  }
  return out;
}

}  // namespace idn
