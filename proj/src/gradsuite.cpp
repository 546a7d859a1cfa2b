#include "idn/gradsuite.hpp"

#include <algorithm>
#include <functional>

#include <fmt/format.h>

#include "idn/autoencoder.hpp"
#include "idn/rng.hpp"

namespace idn {

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_verbs = 3;
  c.appearance = {4, 2, 2};
  c.union_location_width = 4;
  c.ae_hidden = 6;
  c.code_width = 4;
  c.transform_hidden = 5;
  return c;
}

Box random_box(Rng& rng) {
  const Real x1 = std::round(rng.uniform(0, 60)), y1 = std::round(rng.uniform(0, 60));
  return {x1, y1, x1 + std::round(rng.uniform(5, 40)), y1 + std::round(rng.uniform(5, 40))};
}

Tensor random_vector(std::size_t n, Rng& rng) {
  Tensor t({n});
  for (Real& x : t.data()) x = rng.normal();
  return t;
}

struct Case {
  IdnModel model;
  Dataset data;
  std::vector<PairView> views;
};

Case draw_case(std::uint64_t seed) {
  Rng rng(seed);
  const ModelConfig cfg = tiny_config();
  Case c{init_model(cfg, rng.next_u64()), Dataset(cfg.n_verbs, cfg.appearance), {}};
  for (const char* bias : {names::kUnionLossBias, names::kHoLossBias}) {
    c.model.params.assign(bias, random_vector(static_cast<std::size_t>(cfg.n_verbs), rng));
  }
  const std::size_t pairs = 5;
  for (std::size_t i = 0; i < pairs; ++i) {
    Instance h;
    h.id = static_cast<std::int64_t>(2 * i);
    h.kind = InstanceKind::human;
    h.box = random_box(rng);
    h.image_w = h.image_h = 100;
    h.appearance = random_vector(cfg.appearance.human_width, rng);
    Instance o;
    o.id = h.id + 1;
    o.kind = InstanceKind::object;
    o.category = 0;
    o.box = random_box(rng);
    o.image_w = o.image_h = 100;
    o.appearance = random_vector(cfg.appearance.object_width, rng);
    std::vector<int> verbs;
    for (int v = 0; v < cfg.n_verbs; ++v) {
      if (rng.bernoulli(0.4)) verbs.push_back(v);
    }
    if (i == 0 && verbs.empty()) verbs.push_back(static_cast<int>(rng.index(3)));
    if (i == 1) verbs.clear();
    const auto hid = h.id, oid = o.id;
    c.data.add_instance(std::move(h));
    c.data.add_instance(std::move(o));
    c.data.add_pair(make_pair(hid, oid, random_vector(cfg.appearance.union_width, rng), verbs, cfg.n_verbs));
  }
  std::vector<std::size_t> all(pairs);
  for (std::size_t i = 0; i < pairs; ++i) all[i] = i;
  c.views = plain_views(c.data, all);
  return c;
}

const std::vector<std::string>& loss_names() {
  static const std::vector<std::string> names = {
      "ae_recon", "ae_cls", "u_ent", "u_hinge", "u_cls", "ho_ent", "ho_hinge", "ho_cls",
      "u_bin", "ho_bin", "i_bin", "bin", "total", "u_cls_sigmoid", "ho_cls_sigmoid"};
  return names;
}

// Every checked loss from one graph, in loss_names() order.
std::vector<Var> all_losses(Graph& g, const Case& c) {
  const ModelConfig& cfg = c.model.config;
  const auto labels = batch_labels(c.data, c.views);
  const auto f = idn_forward(g, cfg, c.data, c.views, ModuleToggles{});
  const Var u_bias = g.param(names::kUnionLossBias), ho_bias = g.param(names::kHoLossBias);
  const auto ae = ae_losses(g, cfg, f.inputs.union_input, labels.verbs);
  const auto u = verb_cls_loss(*f.d_u, u_bias, labels.verbs);
  const auto ho = verb_cls_loss(*f.d_ho, ho_bias, labels.verbs);
  const auto bin = interactiveness_losses(g, cfg, f.f_u, f.f_ho, f.integrated, labels.interactive);
  const auto total = total_loss(g, cfg, f, labels, LossToggles{}, true);
  // The alternative entropy form, which also reads the per-verb biases.
  VerbClsOptions sig;
  sig.form = EntropyForm::sigmoid_bias;
  sig.sum_over_verbs = false;
  sig.hinge_weight = 1;
  const auto u_sig = verb_cls_loss(*f.d_u, u_bias, labels.verbs, sig);
  const auto ho_sig = verb_cls_loss(*f.d_ho, ho_bias, labels.verbs, sig);
  return {ae.recon,      ae.cls,     u.entropy,       u.hinge,   u.total,    ho.entropy, ho.hinge,
          ho.total,      bin.union_bin, bin.ho_bin, *bin.integrated, bin.total, total.total,
          u_sig.total,   ho_sig.total};
}

std::string layer_of(const std::string& param) {
  const auto dot = param.rfind('.');
  const std::string tail = dot == std::string::npos ? "" : param.substr(dot + 1);
  return (tail == "w" || tail == "b") ? param.substr(0, dot) : param;
}

Real singular_margin(const Case& c) {
  Graph g(&c.model.params);
  all_losses(g, c);
  return g.singular_margin();
}

}  // namespace

std::vector<std::string> gradsuite_losses() { return loss_names(); }

GradSuiteResult run_gradsuite(const GradSuiteOptions& options) {
  GradSuiteResult result;
  Rng seeds(derive_seed(options.seed, "gradsuite"));
  auto redraw = [&] {
    if (++result.redraws > options.max_redraws) {
      throw NumericError(fmt::format("gradient suite: {} redraws without enough kink-free cases", result.redraws));
    }
  };
  while (result.cases < options.cases) {
    const Case c = draw_case(seeds.next_u64());
    if (singular_margin(c) < options.margin_factor * options.eps) {
      redraw();
      continue;
    }
    const MultiFn f = [&c](Graph& g) { return all_losses(g, c); };
    const auto reports = grad_check_reports(f, c.model.params, options.eps);
    if (std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.kink_crossings > 0; })) {
      redraw();
      continue;
    }
    ++result.cases;
    for (std::size_t k = 0; k < reports.size(); ++k) {
      const auto& name = loss_names()[k];
      const auto& report = reports[k];
      Real& worst = result.per_loss[name];
      worst = std::max(worst, report.max_relative_error);
      for (const auto& [param, err] : report.per_parameter) {
        Real& layer = result.per_layer[layer_of(param)];
        layer = std::max(layer, err);
      }
      result.max_error = std::max(result.max_error, report.max_relative_error);
    }
  }
  return result;
}

}  // namespace idn
