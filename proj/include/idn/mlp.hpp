#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "idn/autodiff.hpp"
#include "idn/params.hpp"

namespace idn {

class Rng;

enum class Activation { identity, relu, sigmoid, tanh };

Activation parse_activation(std::string_view name);
std::string_view activation_name(Activation a);

struct MlpSpec {
  std::vector<std::size_t> widths;
  Activation hidden = Activation::relu;
  Activation output = Activation::identity;

  std::size_t input_width() const { return widths.front(); }
  std::size_t output_width() const { return widths.back(); }
  std::size_t layers() const { return widths.size() - 1; }
  void validate() const;
};

// Parameter names for layer k are "<prefix>.<k>.w" ([out x in]) and "<prefix>.<k>.b" ([out]).
std::string weight_name(std::string_view prefix, std::size_t layer);
std::string bias_name(std::string_view prefix, std::size_t layer);

void init_mlp(ParamSet& params, std::string_view prefix, const MlpSpec& spec, Rng& rng);

Var mlp_forward(Graph& graph, const MlpSpec& spec, std::string_view prefix, Var x);
// Inference without recording gradients for the caller.
Tensor mlp_forward(const MlpSpec& spec, const ParamSet& params, std::string_view prefix, const Tensor& x);

Var apply_activation(Activation a, Var x);

}  // namespace idn
