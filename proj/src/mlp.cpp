#include "idn/mlp.hpp"

#include <fmt/format.h>

#include "idn/rng.hpp"

namespace idn {

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError(fmt::format("unknown activation '{}'", name));
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ContractError("an MLP needs at least two widths");
  for (auto w : widths) {
    if (w == 0) throw ContractError("MLP widths must be positive");
  }
}

// Called on every forward pass, so plain concatenation rather than fmt.
std::string weight_name(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + '.' + std::to_string(layer) + ".w";
}
std::string bias_name(std::string_view prefix, std::size_t layer) {
  return std::string(prefix) + '.' + std::to_string(layer) + ".b";
}

void init_mlp(ParamSet& params, std::string_view prefix, const MlpSpec& spec, Rng& rng) {
  spec.validate();
  for (std::size_t k = 0; k < spec.layers(); ++k) {
    const auto in = spec.widths[k], out = spec.widths[k + 1];
    params.add(weight_name(prefix, k), uniform_init({out, in}, in, rng));
    params.add(bias_name(prefix, k), uniform_init({out}, in, rng));
  }
}

Var apply_activation(Activation a, Var x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return tanh(x);
  }
  return x;
}

Var mlp_forward(Graph& graph, const MlpSpec& spec, std::string_view prefix, Var x) {
  spec.validate();
  if (x.value().cols() != spec.input_width()) {
    throw DimensionError(fmt::format("{}: input width {} but MLP expects {}", prefix, x.value().cols(),
                                     spec.input_width()));
  }
  Var h = x;
  for (std::size_t k = 0; k < spec.layers(); ++k) {
    h = linear(h, graph.param(weight_name(prefix, k)), graph.param(bias_name(prefix, k)));
    h = apply_activation(k + 1 == spec.layers() ? spec.output : spec.hidden, h);
  }
  return h;
}

Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, std::string_view prefix, const Tensor& x) {
  Graph g(&params);
  return mlp_forward(g, spec, prefix, g.constant(x)).value();
}

}  // namespace idn
