#include "idn/autoencoder.hpp"

#include <fmt/format.h>

namespace idn {

Var ae_encode(Graph& g, const ModelConfig& config, Var input) {
  return mlp_forward(g, config.encoder_spec(), names::kEncoder, input);
}

Var ae_decode(Graph& g, const ModelConfig& config, Var code) {
  return mlp_forward(g, config.decoder_spec(), names::kDecoder, code);
}

Var ae_classify(Graph& g, const ModelConfig& config, Var code) {
  return mlp_forward(g, config.ae_classifier_spec(), names::kAeClassifier, code);
}

AeLossVars ae_losses(Graph& g, const ModelConfig& config, Var union_input, const Tensor& labels) {
  const auto n = static_cast<std::size_t>(config.n_verbs);
  if (labels.cols() != n || labels.rows() != union_input.value().rows()) {
    throw DimensionError(fmt::format("AE labels {} for a batch of {} pairs and {} verbs", shape_string(labels.shape()),
                                     union_input.value().rows(), n));
  }
  AeLossVars out;
  out.code = ae_encode(g, config, union_input);
  out.scores = ae_classify(g, config, out.code);
  out.recon = mse(ae_decode(g, config, out.code), union_input);
  out.cls = bce_with_logits(out.scores, labels);
  return out;
}

Tensor encode(const IdnModel& model, const Tensor& input) {
  Graph g(&model.params);
  return ae_encode(g, model.config, g.constant(input)).value();
}

Tensor decode(const IdnModel& model, const Tensor& code) {
  Graph g(&model.params);
  return ae_decode(g, model.config, g.constant(code)).value();
}

AeLossValues ae_losses(const IdnModel& model, const Tensor& union_input, const Tensor& labels) {
  Graph g(&model.params);
  const auto vars = ae_losses(g, model.config, g.constant(union_input), labels);
  return {g.scalar(vars.recon), g.scalar(vars.cls), vars.scores.value()};
}

}  // namespace idn
