#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "idn/dataset.hpp"
#include "idn/ipt.hpp"
#include "idn/params.hpp"

namespace idn {

// Synthetic HOI data with known ground-truth composition maps
//   G_v(f_h, f_o) = tanh(A_v [f_h; f_o] + c_v).
// Positive pairs carry f_u = G_v(f_h, f_o) + noise (two-verb pairs average the
// two maps). Negatives carry the union of a different, unrelated pair, so the
// union looks plausible but contradicts its own human and object.
struct SynthConfig {
  int n_verbs = 8;
  FeatureDims widths{16, 8, 8};
  std::size_t pairs_per_verb = 200;
  std::size_t negatives = 800;
  std::size_t test_pairs_per_verb = 50;
  std::size_t test_negatives = 200;
  Real sigma = 0.05;
  int object_categories = 3;
  Real multi_label_prob = 0.2;
  // Scale of the per-verb offset in human appearance: humans doing the same
  // thing look alike as well as pose alike. 0 makes f_h verb-blind.
  Real human_verb_offset = 0.5;
  // Keypoints per human; pelvis and head follow PoseConvention{} (0 and 1).
  std::size_t joints = 6;
  Real image_w = 640;
  Real image_h = 480;
  std::uint64_t seed = 7;

  void validate() const;
};

class SynthOracle {
 public:
  SynthOracle() = default;
  SynthOracle(int n_verbs, FeatureDims widths, ParamSet params);

  int n_verbs() const { return n_verbs_; }
  const FeatureDims& widths() const { return widths_; }
  const ParamSet& params() const { return params_; }

  // G_v evaluated in double precision, before rounding or noise.
  std::vector<Real> map(int verb, std::span<const Real> f_h, std::span<const Real> f_o) const;
  // Mean of the maps of every listed verb, rounded to the stored precision.
  // At sigma = 0 this reproduces a positive pair's union feature exactly.
  Tensor union_feature(std::span<const int> verbs, std::span<const Real> f_h, std::span<const Real> f_o) const;

  static std::string weight_name(int verb);
  static std::string bias_name(int verb);

 private:
  int n_verbs_ = 0;
  FeatureDims widths_;
  ParamSet params_;
};

struct SynthData {
  Dataset train;
  Dataset test;
  SynthOracle oracle;
};

SynthData generate(const SynthConfig& config);

// Writes train.manifest/.blob, test.manifest/.blob and oracle.ckpt into dir.
void write_synth(const SynthData& data, const std::filesystem::path& dir);
SynthOracle load_oracle(const std::filesystem::path& checkpoint, int n_verbs, FeatureDims widths);

// Nearest-map classifier over every single verb and every verb pair, scored on
// the interactive pairs by exact label-set match.
struct BayesReport {
  std::size_t correct = 0;
  std::size_t total = 0;
  Real accuracy() const { return total == 0 ? 0 : static_cast<Real>(correct) / static_cast<Real>(total); }
};
BayesReport bayes_oracle(const Dataset& dataset, const SynthOracle& oracle);

}  // namespace idn
