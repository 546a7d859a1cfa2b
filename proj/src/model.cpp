#include "idn/model.hpp"

#include <fmt/format.h>

#include "idn/rng.hpp"

namespace idn {

ModelConfig ModelConfig::full_scale(int n_verbs) {
  ModelConfig c;
  c.n_verbs = n_verbs;
  c.appearance = FeatureDims{2048, 1024, 1024};
  c.union_location_width = 2560;
  c.ae_hidden = 4096;
  c.code_width = 1024;
  return c;
}

ModelConfig ModelConfig::desk_scale(int n_verbs) {
  ModelConfig c;
  c.n_verbs = n_verbs;
  return c;
}

void ModelConfig::validate() const {
  if (n_verbs <= 0) throw ConfigError("model.n_verbs must be positive");
  if (appearance.union_width == 0 || appearance.human_width == 0 || appearance.object_width == 0) {
    throw ConfigError("appearance widths must be positive");
  }
  if (union_location_width == 0 || union_location_width % 2 != 0) {
    throw ConfigError(fmt::format("union location width must be positive and even, got {}", union_location_width));
  }
  if (human_input_width() != object_input_width() || 2 * human_input_width() != union_input_width()) {
    throw ConfigError(fmt::format(
        "assembled widths violate the half-width rule: f̂_h {} + f̂_o {} vs f̂_u {}", human_input_width(),
        object_input_width(), union_input_width()));
  }
  if (ae_hidden == 0 || code_width == 0) throw ConfigError("AE widths must be positive");
}

MlpSpec ModelConfig::union_location_spec() const { return {{8, union_location_width, union_location_width}}; }
MlpSpec ModelConfig::instance_location_spec() const {
  return {{4, instance_location_width(), instance_location_width()}};
}
MlpSpec ModelConfig::encoder_spec() const { return {{union_input_width(), ae_hidden, code_width}}; }
MlpSpec ModelConfig::decoder_spec() const { return {{code_width, ae_hidden, union_input_width()}}; }
MlpSpec ModelConfig::ae_classifier_spec() const { return {{code_width, static_cast<std::size_t>(n_verbs)}}; }
MlpSpec ModelConfig::integration_spec() const { return {{code_width, transform_hidden_width(), code_width}}; }
MlpSpec ModelConfig::decomposition_spec() const { return {{code_width, transform_hidden_width(), code_width}}; }
MlpSpec ModelConfig::interactiveness_spec() const { return {{code_width, 1}}; }

namespace names {
std::string integration(int verb) { return fmt::format("verb.{}.ti", verb); }
std::string decomposition(int verb) { return fmt::format("verb.{}.td", verb); }
}  // namespace names

IdnModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  IdnModel model{config, {}};
  Rng rng(derive_seed(seed, "model-init"));
  auto& p = model.params;
  init_mlp(p, names::kLocUnion, config.union_location_spec(), rng);
  init_mlp(p, names::kLocInstance, config.instance_location_spec(), rng);
  init_mlp(p, names::kEncoder, config.encoder_spec(), rng);
  init_mlp(p, names::kDecoder, config.decoder_spec(), rng);
  init_mlp(p, names::kAeClassifier, config.ae_classifier_spec(), rng);
  for (int v = 0; v < config.n_verbs; ++v) {
    init_mlp(p, names::integration(v), config.integration_spec(), rng);
    init_mlp(p, names::decomposition(v), config.decomposition_spec(), rng);
  }
  init_mlp(p, names::kInteractiveness, config.interactiveness_spec(), rng);
  p.add(names::kUnionLossBias, Tensor::zeros({static_cast<std::size_t>(config.n_verbs)}));
  p.add(names::kHoLossBias, Tensor::zeros({static_cast<std::size_t>(config.n_verbs)}));
  return model;
}

ParamSet compressor_params(const IdnModel& model) {
  ParamSet out = model.params.subset("ae.");
  out.merge(model.params.subset("loc."));
  return out;
}

void check_model_params(const IdnModel& model) {
  const IdnModel reference = init_model(model.config, 0);
  for (const auto& [name, value] : reference.params.values()) {
    if (!model.params.contains(name)) throw FormatError("model is missing parameter '" + name + "'");
    if (model.params.at(name).shape() != value.shape()) {
      throw DimensionError(fmt::format("parameter '{}' has shape {} but the configuration implies {}", name,
                                       shape_string(model.params.at(name).shape()), shape_string(value.shape())));
    }
  }
  for (const auto& name : model.params.names()) {
    if (!reference.params.contains(name)) throw FormatError("unexpected parameter '" + name + "'");
  }
}

std::vector<PairView> plain_views(const Dataset& dataset, std::span<const std::size_t> pair_indices) {
  std::vector<PairView> views;
  views.reserve(pair_indices.size());
  for (auto i : pair_indices) {
    const auto& p = dataset.pairs().at(i);
    views.push_back({i, p.human_id, p.object_id});
  }
  return views;
}

Tensor union_box_inputs(const Dataset& dataset, std::span<const PairView> views) {
  Tensor out({views.size(), 8});
  for (std::size_t r = 0; r < views.size(); ++r) {
    // The union always belongs to the pair itself, even when its instances
    // have been exchanged.
    const auto& pair = dataset.pairs().at(views[r].pair_index);
    const auto& h = dataset.instance(pair.human_id);
    const auto& o = dataset.instance(pair.object_id);
    const auto bh = normalize_box(h.box, h.image_w, h.image_h);
    const auto bo = normalize_box(o.box, o.image_w, o.image_h);
    for (std::size_t k = 0; k < 4; ++k) {
      out.at(r, k) = bh[k];
      out.at(r, 4 + k) = bo[k];
    }
  }
  return out;
}

Tensor instance_box_inputs(const Dataset& dataset, std::span<const std::int64_t> ids) {
  Tensor out({ids.size(), 4});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto& inst = dataset.instance(ids[r]);
    const auto b = normalize_box(inst.box, inst.image_w, inst.image_h);
    for (std::size_t k = 0; k < 4; ++k) out.at(r, k) = b[k];
  }
  return out;
}

Var encode_union_location(Graph& g, const ModelConfig& config, Var normalized_pairs) {
  return mlp_forward(g, config.union_location_spec(), names::kLocUnion, normalized_pairs);
}

Var encode_instance_location(Graph& g, const ModelConfig& config, Var normalized_boxes) {
  return mlp_forward(g, config.instance_location_spec(), names::kLocInstance, normalized_boxes);
}

Tensor encode_location(const IdnModel& model, const Tensor& normalized, bool union_encoder) {
  Graph g(&model.params);
  Var x = g.constant(normalized);
  return (union_encoder ? encode_union_location(g, model.config, x) : encode_instance_location(g, model.config, x))
      .value();
}

namespace {
Tensor stack_rows(std::span<const Tensor* const> rows, std::size_t width, const char* what) {
  Tensor out({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r]->size() != width) {
      throw DimensionError(fmt::format("{} feature width {} but configuration expects {}", what, rows[r]->size(), width));
    }
    std::copy(rows[r]->data().begin(), rows[r]->data().end(), out.row_span(r).begin());
  }
  return out;
}
}  // namespace

AssembledBatch assemble_batch(Graph& g, const ModelConfig& config, const Dataset& dataset,
                              std::span<const PairView> views) {
  if (views.empty()) throw ContractError("cannot assemble an empty batch");
  std::vector<const Tensor*> unions, humans, objects;
  std::vector<std::int64_t> human_ids, object_ids;
  for (const auto& v : views) {
    unions.push_back(&dataset.pairs().at(v.pair_index).union_appearance);
    humans.push_back(&dataset.instance(v.human_id).appearance);
    objects.push_back(&dataset.instance(v.object_id).appearance);
    human_ids.push_back(v.human_id);
    object_ids.push_back(v.object_id);
  }
  Var fa_u = g.constant(stack_rows(unions, config.appearance.union_width, "union"));
  Var fa_h = g.constant(stack_rows(humans, config.appearance.human_width, "human"));
  Var fa_o = g.constant(stack_rows(objects, config.appearance.object_width, "object"));
  Var fb_u = encode_union_location(g, config, g.constant(union_box_inputs(dataset, views)));
  Var fb_h = encode_instance_location(g, config, g.constant(instance_box_inputs(dataset, human_ids)));
  Var fb_o = encode_instance_location(g, config, g.constant(instance_box_inputs(dataset, object_ids)));

  AssembledBatch out;
  const Var u_parts[] = {fa_u, fb_u};
  const Var h_parts[] = {fa_h, fb_h};
  const Var o_parts[] = {fa_o, fb_o};
  out.union_input = concat_cols(u_parts);
  out.human_input = concat_cols(h_parts);
  out.object_input = concat_cols(o_parts);
  const Var ho_parts[] = {out.human_input, out.object_input};
  out.pair_input = concat_cols(ho_parts);
  return out;
}

AssembledFeatures assemble(const Dataset& dataset, std::size_t pair_index, const IdnModel& model) {
  Graph g(&model.params);
  const auto& pair = dataset.pairs().at(pair_index);
  const PairView view{pair_index, pair.human_id, pair.object_id};
  const auto batch = assemble_batch(g, model.config, dataset, std::span(&view, 1));
  return {batch.union_input.value(), batch.human_input.value(), batch.object_input.value()};
}

}  // namespace idn
