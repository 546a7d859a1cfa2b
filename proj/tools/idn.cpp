// idn: command-line driver for data generation, training, evaluation and checks.
//
//   idn gen-synth    --config c.cfg --out run/
//   idn pretrain-ae  --config c.cfg --out run/
//   idn train        --config c.cfg --out run/
//   idn eval         --config c.cfg --out run/
//   idn diagnose-ipt --config c.cfg --out run/
//   idn gradcheck    [--out run/]
//   idn defaults

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "idn/config.hpp"
#include "idn/evaluation.hpp"
#include "idn/gradsuite.hpp"
#include "idn/synthgen.hpp"
#include "idn/trainer.hpp"

namespace fs = std::filesystem;
using namespace idn;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

RunConfig load_run_config(const Common& c) {
  RunConfig rc = c.config.empty() ? RunConfig::from(ConfigFile{}) : RunConfig::from(read_config(c.config));
  if (c.seed) rc.set_seed(*c.seed);
  return rc;
}

fs::path resolve(const fs::path& out, const fs::path& p) { return p.is_absolute() ? p : out / p; }

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw PathError(fmt::format("{} not found: {}", what, p.string()));
}

Dataset load_manifest(const fs::path& p, const char* what) {
  require_file(p, what);
  return load_dataset(p);
}

IdnModel load_model(const RunConfig& rc, const fs::path& ckpt, const Dataset& shape_source) {
  require_file(ckpt, "checkpoint");
  IdnModel model = initial_model(rc.train, shape_source);
  model.params = load_checkpoint(ckpt);
  check_model_params(model);
  return model;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw PathError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
}

int cmd_gen_synth(const Common& c) {
  const RunConfig rc = load_run_config(c);
  const SynthData data = generate(rc.synth);
  write_synth(data, c.out);
  const auto bayes = bayes_oracle(data.test, data.oracle);
  fmt::print("wrote {} train and {} test pairs to {}\n", data.train.pairs().size(), data.test.pairs().size(), c.out);
  fmt::print("nearest-map oracle accuracy on test positives: {:.4f} ({}/{})\n", bayes.accuracy(), bayes.correct,
             bayes.total);
  return 0;
}

int cmd_pretrain_ae(const Common& c) {
  const RunConfig rc = load_run_config(c);
  const fs::path out = c.out;
  const Dataset train = load_manifest(resolve(out, rc.train_manifest), "train manifest");
  rc.train.validate();
  IdnModel model = initial_model(rc.train, train);
  std::vector<LossRow> log;
  pretrain_ae(model, rc.train, train, log);
  ensure_dir(out);
  save_checkpoint(compressor_params(model), out / "ae.ckpt");
  if (!log.empty()) fmt::print("ae phase: {} steps, final loss {:.6g}\n", log.size(), log.back().report.total);
  return 0;
}

int cmd_train(const Common& c) {
  const RunConfig rc = load_run_config(c);
  const fs::path out = c.out;
  const Dataset data = load_manifest(resolve(out, rc.train_manifest), "train manifest");
  std::optional<ParamSet> compressor;
  if (!rc.ae_checkpoint.empty()) {
    const fs::path p = resolve(out, rc.ae_checkpoint);
    require_file(p, "AE checkpoint");
    compressor = load_checkpoint(p);
  }
  const TrainResult r = train(rc.train, data, out, compressor ? &*compressor : nullptr);
  fmt::print("trained {} steps; final loss {:.6g}\n", r.log.size(), r.log.empty() ? 0.0 : r.log.back().report.total);
  return 0;
}

int cmd_eval(const Common& c) {
  const RunConfig rc = load_run_config(c);
  const fs::path out = c.out;
  const Dataset train = load_manifest(resolve(out, rc.train_manifest), "train manifest");
  const Dataset test = load_manifest(resolve(out, rc.test_manifest), "test manifest");
  const IdnModel model = load_model(rc, resolve(out, rc.checkpoint), train);

  int categories = 0;
  for (const Dataset* d : {&train, &test}) {
    for (const auto& inst : d->instances()) categories = std::max(categories, inst.category + 1);
  }
  const HoiCatalog catalog = HoiCatalog::from_training(train, categories, rc.eval.rare_threshold);
  DetectOptions opts;
  opts.modules = rc.train.modules;
  opts.lis = rc.eval.lis;
  opts.nis_threshold = rc.eval.nis_threshold;
  opts.use_nis = rc.eval.use_nis;
  const std::size_t threads = worker_threads();
  const auto records = detect(model, test, catalog, opts, threads);
  const auto result = compute_map(to_detections(records), groundtruth_from(test, catalog), catalog,
                                  rc.eval.iou_threshold);

  std::vector<std::size_t> all(test.pairs().size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto scores = score_pairs(model, test, all, rc.train.modules, threads);
  const auto verb_map = verb_classification_map(scores.p_v, test, all);

  ensure_dir(out);
  write_detections(records, out / "detections.txt");
  std::string csv = format_map_csv(result, catalog);
  csv += fmt::format("mean,verb_classification,{:.9g}\n", verb_map.mean);
  write_text(out / "ap.csv", csv);
  fmt::print("HOI mAP (full) {:.4f}; verb classification mAP {:.4f}\n", result.full, verb_map.mean);
  for (const auto& [name, v] : result.splits) fmt::print("  {} {:.4f}\n", name, v);
  return 0;
}

int cmd_diagnose(const Common& c) {
  const RunConfig rc = load_run_config(c);
  const fs::path out = c.out;
  const Dataset test = load_manifest(resolve(out, rc.test_manifest), "test manifest");
  const IdnModel model = load_model(rc, resolve(out, rc.checkpoint), test);
  const auto rows = ipt_diagnostics(model, test);
  ensure_dir(out);
  write_text(out / "ipt_diagnostic.csv", format_diagnostic_csv(rows));
  std::size_t wins = 0, present = 0;
  for (const auto& r : rows) {
    if (!r.d1) continue;
    ++present;
    if (*r.d1 > *r.d2) ++wins;
  }
  fmt::print("D1 > D2 for {}/{} verbs\n", wins, present);
  return 0;
}

int cmd_gradcheck(const Common& c, std::size_t cases) {
  GradSuiteOptions opts;
  opts.cases = cases;
  if (c.seed) opts.seed = *c.seed;
  const auto r = run_gradsuite(opts);
  std::string table = "layer,max_rel_error\n";
  for (const auto& [layer, err] : r.per_layer) table += fmt::format("{},{:.3e}\n", layer, err);
  std::string losses = "loss,max_rel_error\n";
  for (const auto& [name, err] : r.per_loss) losses += fmt::format("{},{:.3e}\n", name, err);
  fmt::print("{}\n{}\ncases {} (redrawn near kinks: {}), max relative error {:.3e}\n", table, losses, r.cases,
             r.redraws, r.max_error);
  if (!c.out.empty() && c.out != ".") {
    ensure_dir(c.out);
    write_text(fs::path(c.out) / "gradcheck.csv", table);
  }
  return r.max_error < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interaction decomposition network toolkit"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "configuration file");
    if (needs_config) opt->required();
    sub->add_option("--seed", common.seed, "seed (overrides the configuration)");
    sub->add_option("--out", common.out, "output directory");
  };
  auto* gen = app.add_subcommand("gen-synth", "generate the synthetic dataset and oracle");
  auto* pre = app.add_subcommand("pretrain-ae", "phase 1: pretrain the feature compressor");
  auto* trn = app.add_subcommand("train", "run the training schedule");
  auto* evl = app.add_subcommand("eval", "score the test split and compute mAP");
  auto* dia = app.add_subcommand("diagnose-ipt", "D1/D2 instance-exchange diagnostic");
  auto* grd = app.add_subcommand("gradcheck", "finite-difference check of every loss term");
  auto* def = app.add_subcommand("defaults", "print every configuration key with its default");
  for (auto* s : {gen, pre, trn, evl, dia}) add_common(s, false);
  add_common(grd, false);
  std::size_t cases = 100;
  grd->add_option("--cases", cases, "number of random cases");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_synth(common);
    if (*pre) return cmd_pretrain_ae(common);
    if (*trn) return cmd_train(common);
    if (*evl) return cmd_eval(common);
    if (*dia) return cmd_diagnose(common);
    if (*grd) return cmd_gradcheck(common, cases);
    if (*def) {
      fmt::print("{}", RunConfig::documented_defaults());
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 3;
  }
  return 0;
}
