#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "idn/autodiff.hpp"
#include "idn/dataset.hpp"
#include "idn/mlp.hpp"
#include "idn/params.hpp"

namespace idn {

// Architecture widths. Appearance widths come from the data; location widths,
// AE widths and transform widths are free choices.
//
// The full-scale preset splits the 4608-wide AE input as 2048 appearance +
// 2560 location for the union. That split is an inference from the stated
// total and the half-width rules, not a published number.
struct ModelConfig {
  int n_verbs = 8;
  FeatureDims appearance{16, 8, 8};
  // Width of f^b_u. f^b_h and f^b_o are half of it.
  std::size_t union_location_width = 16;
  std::size_t ae_hidden = 64;
  std::size_t code_width = 32;
  // Hidden width of every T_I / T_D; 0 means "same as the code width".
  std::size_t transform_hidden = 0;

  static ModelConfig full_scale(int n_verbs);
  static ModelConfig desk_scale(int n_verbs);

  std::size_t instance_location_width() const { return union_location_width / 2; }
  std::size_t union_input_width() const { return appearance.union_width + union_location_width; }
  std::size_t human_input_width() const { return appearance.human_width + instance_location_width(); }
  std::size_t object_input_width() const { return appearance.object_width + instance_location_width(); }
  std::size_t transform_hidden_width() const { return transform_hidden == 0 ? code_width : transform_hidden; }

  // Enforces the half-width rules so f̂_h ⊕ f̂_o and f̂_u share the AE input width.
  void validate() const;

  MlpSpec union_location_spec() const;
  MlpSpec instance_location_spec() const;
  MlpSpec encoder_spec() const;
  MlpSpec decoder_spec() const;
  MlpSpec ae_classifier_spec() const;
  MlpSpec integration_spec() const;
  MlpSpec decomposition_spec() const;
  MlpSpec interactiveness_spec() const;
};

// Parameter name prefixes.
namespace names {
inline constexpr const char* kLocUnion = "loc.union";
inline constexpr const char* kLocInstance = "loc.inst";
inline constexpr const char* kEncoder = "ae.enc";
inline constexpr const char* kDecoder = "ae.dec";
inline constexpr const char* kAeClassifier = "ae.cls";
inline constexpr const char* kInteractiveness = "inter.head";
inline constexpr const char* kUnionLossBias = "loss.u.bias";
inline constexpr const char* kHoLossBias = "loss.ho.bias";
std::string integration(int verb);
std::string decomposition(int verb);
}  // namespace names

struct IdnModel {
  ModelConfig config;
  ParamSet params;
};

IdnModel init_model(const ModelConfig& config, std::uint64_t seed);

// Parameters that make up the pretrained feature compressor: the AE and the
// location encoders feeding it.
ParamSet compressor_params(const IdnModel& model);

// Checks that every expected parameter exists with the expected shape.
void check_model_params(const IdnModel& model);

// A pair as fed to the network; the human and object may differ from the
// pair's own instances when instance exchange is active.
struct PairView {
  std::size_t pair_index = 0;
  std::int64_t human_id = 0;
  std::int64_t object_id = 0;
};

std::vector<PairView> plain_views(const Dataset& dataset, std::span<const std::size_t> pair_indices);

// Normalized boxes: [B x 8] (human then object) for the union encoder, [B x 4] per instance.
Tensor union_box_inputs(const Dataset& dataset, std::span<const PairView> views);
Tensor instance_box_inputs(const Dataset& dataset, std::span<const std::int64_t> ids);

Var encode_union_location(Graph& g, const ModelConfig& config, Var normalized_pairs);
Var encode_instance_location(Graph& g, const ModelConfig& config, Var normalized_boxes);
Tensor encode_location(const IdnModel& model, const Tensor& normalized, bool union_encoder);

struct AssembledBatch {
  Var union_input;  // f̂_u = f^a_u ⊕ f^b_u
  Var human_input;  // f̂_h = f^a_h ⊕ f^b_h
  Var object_input; // f̂_o = f^a_o ⊕ f^b_o
  Var pair_input;   // f̂_h ⊕ f̂_o
};

AssembledBatch assemble_batch(Graph& g, const ModelConfig& config, const Dataset& dataset,
                              std::span<const PairView> views);

struct AssembledFeatures {
  Tensor union_input;
  Tensor human_input;
  Tensor object_input;
};

AssembledFeatures assemble(const Dataset& dataset, std::size_t pair_index, const IdnModel& model);

}  // namespace idn
