#pragma once

// Small synthetic worlds for tests that need a real dataset and model.

#include "idn/synthgen.hpp"
#include "idn/trainer.hpp"

namespace fixture {

inline idn::SynthConfig small_synth_config(std::uint64_t seed = 3) {
  idn::SynthConfig c;
  c.n_verbs = 3;
  c.widths = {8, 4, 4};
  c.pairs_per_verb = 20;
  c.negatives = 40;
  c.test_pairs_per_verb = 10;
  c.test_negatives = 20;
  c.seed = seed;
  return c;
}

inline idn::TrainConfig small_train_config() {
  idn::TrainConfig t;
  t.model.union_location_width = 4;
  t.model.ae_hidden = 12;
  t.model.code_width = 6;
  t.ae = {4, 0, 0.1, 0.9, 6, 12};
  t.idn = {4, 0, 0.05, 0.9, 6, 12};
  t.idn_ipt = {4, 0, 0.02, 0.9, 6, 12};
  t.candidates = 3;
  return t;
}

}  // namespace fixture
