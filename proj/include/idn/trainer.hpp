#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "idn/ipt.hpp"
#include "idn/objectives.hpp"
#include "idn/rng.hpp"

namespace idn {

struct PhaseConfig {
  // Length in optimizer steps. When epochs is set it wins: one epoch is
  // ceil(#interactive pairs / positives) batches.
  std::size_t steps = 0;
  std::size_t epochs = 0;
  Real lr = 0.02;
  Real momentum = 0.9;
  std::size_t positives = 15;
  std::size_t negatives = 120;

  std::size_t steps_for(const Dataset& dataset) const;
};

struct TrainConfig {
  PhaseConfig ae{50, 0, 0.1, 0.9, 45, 360};
  // Desk-scale rates. 500 steps at the published 2e-2 / 1e-3 leave the
  // transforms far from fitted; published_schedule() restores the published ones.
  PhaseConfig idn{500, 0, 0.1, 0.9, 15, 120};
  PhaseConfig idn_ipt{500, 0, 0.02, 0.9, 15, 120};
  std::uint64_t seed = 1;
  ModelConfig model;
  LossToggles losses;
  ModuleToggles modules;
  std::size_t candidates = 5;  // m
  PoseConvention pose;

  // Published epoch schedules: "hico-det" (4 / 20 / 30) and "v-coco" (60 / 45 / 20).
  static TrainConfig published_schedule(std::string_view benchmark);

  void validate() const;
};

// Pair indices: exactly `positives` interactive and `negatives` non-interactive
// pairs, drawn without replacement when the class is large enough and with
// replacement otherwise, then shuffled. A requested class with no pairs is a
// ConfigError.
std::vector<std::size_t> build_batch(const Dataset& dataset, std::size_t positives, std::size_t negatives, Rng& rng);

struct LossRow {
  std::string phase;
  std::size_t step = 0;
  LossReport report;
};

std::string loss_csv_header();
std::string format_loss_row(const LossRow& row);
std::string format_loss_csv(std::span<const LossRow> rows);

struct PhaseStats {
  std::size_t steps = 0;
  std::size_t exchange_draws = 0;  // calls into exchange_sample
};

// Model shaped for the dataset: verb count and appearance widths come from it.
IdnModel initial_model(const TrainConfig& config, const Dataset& dataset);

// Phase 1: the compressor alone under L^AE.
PhaseStats pretrain_ae(IdnModel& model, const TrainConfig& config, const Dataset& dataset, std::vector<LossRow>& log);

// Phases 2 and 3: every parameter under L plus the AE terms. With a candidate
// table (and modules.ipt on) positive pairs are integrated through exchanged
// instances.
PhaseStats train_idn(IdnModel& model, const TrainConfig& config, const Dataset& dataset, const PhaseConfig& phase,
                     const std::string& label, const CandidateTable* table, std::vector<LossRow>& log);

// Parameters pass through the on-disk precision at every phase boundary, so a
// run resumed from a checkpoint continues exactly as an uninterrupted one.
void round_params(ParamSet& params);

struct TrainResult {
  IdnModel model;
  std::vector<LossRow> log;
  PhaseStats ae, idn, idn_ipt;
};

// The full schedule. A non-empty out_dir receives losses.csv and the phase
// checkpoints ae.ckpt, idn.ckpt, idn_ipt.ckpt (plus candidates.txt).
// When `compressor` is given, phase 1 is skipped and its parameters are used.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir = {},
                  const ParamSet* compressor = nullptr);

}  // namespace idn
