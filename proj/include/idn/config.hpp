#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idn/scoring.hpp"
#include "idn/synthgen.hpp"
#include "idn/trainer.hpp"

namespace idn {

// Sectioned key=value text:
//
//   # comment
//   [train] idn_lr = 0.02
//   ae_steps = 50
//
// A section header may carry a key=value on the same line. Keys are stored as
// "section.key"; keys before any header belong to the "run" section.
struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
};

struct ConfigFile {
  std::string source;
  std::map<std::string, ConfigEntry> entries;
};

ConfigFile parse_config(const std::string& text, const std::string& source = "<memory>");
ConfigFile read_config(const std::filesystem::path& path);

struct EvalOptions {
  LisParams lis;
  Real nis_threshold = 0.1;
  bool use_nis = true;
  Real iou_threshold = 0.5;
  std::size_t rare_threshold = 10;
};

struct RunConfig {
  std::uint64_t seed = 1;
  // Dataset locations; relative paths resolve against the output directory.
  std::filesystem::path train_manifest = "train.manifest";
  std::filesystem::path test_manifest = "test.manifest";
  // Optional pretrained compressor for `train`; the `eval` and `diagnose-ipt`
  // model checkpoint.
  std::filesystem::path ae_checkpoint;
  std::filesystem::path checkpoint = "idn_ipt.ckpt";
  SynthConfig synth;
  TrainConfig train;
  EvalOptions eval;

  // Unknown keys and malformed values raise ConfigError naming the key.
  static RunConfig from(const ConfigFile& file);
  // Every key with its default, in the file syntax.
  static std::string documented_defaults();
  // Seed override applied to every consumer.
  void set_seed(std::uint64_t s);
};

}  // namespace idn
