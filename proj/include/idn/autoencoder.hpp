#pragma once

#include "idn/model.hpp"

namespace idn {

// Feature compressor. One encoder serves both f̂_u and f̂_h ⊕ f̂_o, which have
// the same width; the decoder mirrors it and a linear head produces S^AE_v.

Var ae_encode(Graph& g, const ModelConfig& config, Var input);
Var ae_decode(Graph& g, const ModelConfig& config, Var code);
// Verb logits S^AE_v, [B x n].
Var ae_classify(Graph& g, const ModelConfig& config, Var code);

struct AeLossVars {
  Var code;    // f_u
  Var scores;  // S^AE_v
  Var recon;   // L^AE_recon, mean squared error against the input
  Var cls;     // L^AE_cls, mean binary cross-entropy over verbs and pairs
};

// labels is [B x n] multi-hot.
AeLossVars ae_losses(Graph& g, const ModelConfig& config, Var union_input, const Tensor& labels);

Tensor encode(const IdnModel& model, const Tensor& input);
Tensor decode(const IdnModel& model, const Tensor& code);

struct AeLossValues {
  Real recon = 0;
  Real cls = 0;
  Tensor scores;
};
AeLossValues ae_losses(const IdnModel& model, const Tensor& union_input, const Tensor& labels);

}  // namespace idn
