#include "idn/trainer.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "idn/evaluation.hpp"

namespace idn {

std::size_t PhaseConfig::steps_for(const Dataset& dataset) const {
  if (epochs == 0) return steps;
  const std::size_t pos = dataset.positive_indices().size();
  const std::size_t per_epoch = positives == 0 ? 1 : std::max<std::size_t>(1, (pos + positives - 1) / positives);
  return epochs * per_epoch;
}

TrainConfig TrainConfig::published_schedule(std::string_view benchmark) {
  TrainConfig c;
  for (PhaseConfig* p : {&c.ae, &c.idn, &c.idn_ipt}) p->steps = 0;
  // Published rates; the struct defaults are tuned for the desk-scale run.
  c.ae.lr = 0.1;
  c.idn.lr = 0.02;
  c.idn_ipt.lr = 1e-3;
  if (benchmark == "hico-det") {
    c.ae.epochs = 4;
    c.idn.epochs = 20;
    c.idn_ipt.epochs = 30;
  } else if (benchmark == "v-coco") {
    c.ae.epochs = 60;
    c.idn.epochs = 45;
    c.idn_ipt.epochs = 20;
  } else {
    throw ConfigError(fmt::format("unknown benchmark schedule '{}'", benchmark));
  }
  return c;
}

void TrainConfig::validate() const {
  const std::pair<const char*, const PhaseConfig*> phases[] = {{"ae", &ae}, {"idn", &idn}, {"idn_ipt", &idn_ipt}};
  for (const auto& [name, p] : phases) {
    if (p->positives + p->negatives == 0) throw ConfigError(fmt::format("{}: batch has no pairs", name));
    if (!(p->lr > 0)) throw ConfigError(fmt::format("{}: learning rate must be positive", name));
    if (!(p->momentum >= 0 && p->momentum < 1)) throw ConfigError(fmt::format("{}: momentum outside [0, 1)", name));
  }
  if (!(losses.cls.hinge_weight >= 0)) throw ConfigError("losses.hinge_weight must be >= 0");
}

namespace {

void draw_class(const std::vector<std::size_t>& pool, std::size_t count, Rng& rng, std::vector<std::size_t>& out) {
  if (count <= pool.size()) {
    // Partial Fisher-Yates over a copy.
    std::vector<std::size_t> copy = pool;
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + rng.index(copy.size() - i);
      std::swap(copy[i], copy[j]);
      out.push_back(copy[i]);
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.index(pool.size())]);
  }
}

}  // namespace

std::vector<std::size_t> build_batch(const Dataset& dataset, std::size_t positives, std::size_t negatives, Rng& rng) {
  const auto pos = dataset.positive_indices();
  const auto neg = dataset.negative_indices();
  if (positives > 0 && pos.empty()) throw ConfigError("dataset has no interactive pairs to fill the batch");
  if (negatives > 0 && neg.empty()) throw ConfigError("dataset has no non-interactive pairs to fill the batch");
  std::vector<std::size_t> out;
  out.reserve(positives + negatives);
  draw_class(pos, positives, rng, out);
  draw_class(neg, negatives, rng, out);
  for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.index(i)]);
  return out;
}

std::string loss_csv_header() { return "phase,step," + LossReport::csv_header(); }
std::string format_loss_row(const LossRow& row) {
  return fmt::format("{},{},{}", row.phase, row.step, row.report.csv_row());
}
std::string format_loss_csv(std::span<const LossRow> rows) {
  std::string out = loss_csv_header() + "\n";
  for (const auto& r : rows) out += format_loss_row(r) + "\n";
  return out;
}

IdnModel initial_model(const TrainConfig& config, const Dataset& dataset) {
  ModelConfig mc = config.model;
  mc.n_verbs = dataset.n_verbs();
  mc.appearance = dataset.dims();
  // Starts at the on-disk precision, so a run resumed from a saved compressor
  // sees the same untouched parameters as one that never stopped.
  IdnModel model = init_model(mc, derive_seed(config.seed, "init"));
  round_params(model.params);
  return model;
}

void round_params(ParamSet& params) {
  for (const auto& name : params.names()) params.assign(name, round_to_float(params.at(name)));
}

namespace {

template <class StepFn>
void run_steps(const std::string& label, std::size_t steps, StepFn&& step) {
  for (std::size_t s = 0; s < steps; ++s) {
    try {
      step(s);
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("phase {} aborted at step {}: {}", label, s, e.what()));
    }
  }
}

void check_finite(const TotalLoss& loss) {
  if (!std::isfinite(loss.report.total)) throw NumericError("non-finite loss");
}

}  // namespace

PhaseStats pretrain_ae(IdnModel& model, const TrainConfig& config, const Dataset& dataset, std::vector<LossRow>& log) {
  const PhaseConfig& phase = config.ae;
  Rng rng(derive_seed(config.seed, "phase.ae"));
  model.params.reset_velocity();
  PhaseStats stats;
  stats.steps = phase.steps_for(dataset);
  run_steps("ae", stats.steps, [&](std::size_t s) {
    const auto batch = build_batch(dataset, phase.positives, phase.negatives, rng);
    const auto views = plain_views(dataset, batch);
    Graph g(&model.params);
    const auto inputs = assemble_batch(g, model.config, dataset, views);
    const auto loss = ae_pretrain_loss(g, model.config, inputs.union_input, batch_labels(dataset, views), config.losses);
    check_finite(loss);
    log.push_back({"ae", s, loss.report});
    sgd_step(model.params, g.backward(loss.total), phase.lr, phase.momentum);
  });
  round_params(model.params);
  return stats;
}

PhaseStats train_idn(IdnModel& model, const TrainConfig& config, const Dataset& dataset, const PhaseConfig& phase,
                     const std::string& label, const CandidateTable* table, std::vector<LossRow>& log) {
  Rng rng(derive_seed(config.seed, "phase." + label));
  Rng exchange_rng(derive_seed(config.seed, "exchange." + label));
  model.params.reset_velocity();
  PhaseStats stats;
  stats.steps = phase.steps_for(dataset);
  const bool exchange = table != nullptr && config.modules.ipt;
  run_steps(label, stats.steps, [&](std::size_t s) {
    const auto batch = build_batch(dataset, phase.positives, phase.negatives, rng);
    auto views = plain_views(dataset, batch);
    if (exchange) {
      for (auto& v : views) {
        if (!dataset.pairs()[v.pair_index].interactive) continue;
        v = exchange_sample(v, *table, exchange_rng);
        ++stats.exchange_draws;
      }
    }
    Graph g(&model.params);
    const auto fwd = idn_forward(g, model.config, dataset, views, config.modules);
    const auto loss = total_loss(g, model.config, fwd, batch_labels(dataset, views), config.losses, true);
    check_finite(loss);
    log.push_back({label, s, loss.report});
    sgd_step(model.params, g.backward(loss.total), phase.lr, phase.momentum);
  });
  round_params(model.params);
  return stats;
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const std::filesystem::path& out_dir,
                  const ParamSet* compressor) {
  config.validate();
  TrainResult result{initial_model(config, dataset), {}, {}, {}, {}};
  IdnModel& model = result.model;
  const bool write = !out_dir.empty();
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw PathError(fmt::format("cannot create {}: {}", out_dir.string(), ec.message()));
  }

  if (compressor != nullptr) {
    for (const auto& [name, value] : compressor->values()) {
      if (!model.params.contains(name)) throw FormatError("compressor checkpoint has unexpected parameter '" + name + "'");
      model.params.assign(name, value);
    }
    for (const auto& name : compressor_params(model).names()) {
      if (!compressor->contains(name)) throw FormatError("compressor checkpoint is missing '" + name + "'");
    }
  } else {
    result.ae = pretrain_ae(model, config, dataset, result.log);
    if (write) save_checkpoint(compressor_params(model), out_dir / "ae.ckpt");
  }

  result.idn = train_idn(model, config, dataset, config.idn, "idn", nullptr, result.log);
  if (write) save_checkpoint(model.params, out_dir / "idn.ckpt");

  const CandidateTable table = build_candidates(dataset, config.candidates, config.pose);
  if (write) write_text(out_dir / "candidates.txt", table.serialize());
  result.idn_ipt = train_idn(model, config, dataset, config.idn_ipt, "idn_ipt", &table, result.log);
  if (write) {
    save_checkpoint(model.params, out_dir / "idn_ipt.ckpt");
    write_text(out_dir / "losses.csv", format_loss_csv(result.log));
  }
  return result;
}

}  // namespace idn
