#include "idn/scoring.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace idn {

Tensor combine_scores(const Tensor* p_u, const Tensor* p_ho, const Tensor* p_ae) {
  std::vector<const Tensor*> parts;
  for (const Tensor* t : {p_u, p_ho, p_ae}) {
    if (t != nullptr && !t->empty()) parts.push_back(t);
  }
  if (parts.empty()) throw ContractError("P_v needs at least one score component");
  Tensor out(parts[0]->shape());
  for (const Tensor* t : parts) {
    if (t->shape() != out.shape()) {
      throw DimensionError(fmt::format("score components {} and {}", shape_string(t->shape()), shape_string(out.shape())));
    }
  }
  const Real alpha = 1.0 / static_cast<Real>(parts.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Real sum = 0;
    for (const Tensor* t : parts) sum += (*t)[i];
    out[i] = alpha * sum;
  }
  return out;
}

namespace {

Tensor map_values(const Tensor& x, Real (*f)(Real)) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return out;
}

Real neg_exp(Real d) { return std::exp(-d); }
Real logistic(Real s) { return s >= 0 ? 1 / (1 + std::exp(-s)) : std::exp(s) / (1 + std::exp(s)); }

void copy_rows(const Tensor& src, Tensor& dst, std::size_t first_row) {
  if (src.empty()) return;
  std::copy(src.data().begin(), src.data().end(), dst.data().begin() + static_cast<std::ptrdiff_t>(first_row * src.cols()));
}

constexpr std::size_t kChunk = 256;

}  // namespace

PairScores score_views(const IdnModel& model, const Dataset& dataset, std::span<const PairView> views,
                       const ModuleToggles& modules) {
  Graph g(&model.params);
  const IdnForward fwd = idn_forward(g, model.config, dataset, views, modules);
  PairScores out;
  if (fwd.d_u) {
    out.d_u = fwd.d_u->value();
    out.p_u = map_values(out.d_u, neg_exp);
  }
  if (fwd.d_ho) {
    out.d_ho = fwd.d_ho->value();
    out.p_ho = map_values(out.d_ho, neg_exp);
  }
  out.p_ae = map_values(fwd.ae_scores.value(), logistic);
  out.p_v = combine_scores(&out.p_u, &out.p_ho, &out.p_ae);
  out.interactiveness = map_values(interactiveness_logit(g, model.config, fwd.f_u).value(), logistic);
  return out;
}

PairScores score_pairs(const IdnModel& model, const Dataset& dataset, std::span<const std::size_t> pair_indices,
                       const ModuleToggles& modules, std::size_t threads) {
  const auto views = plain_views(dataset, pair_indices);
  const std::size_t b = views.size();
  const auto n = static_cast<std::size_t>(model.config.n_verbs);
  PairScores out;
  if (b == 0) return out;
  if (modules.integration) out.d_u = out.p_u = Tensor({b, n});
  if (modules.decomposition) out.d_ho = out.p_ho = Tensor({b, n});
  out.p_ae = out.p_v = Tensor({b, n});
  out.interactiveness = Tensor({b, 1});

  const std::size_t chunks = (b + kChunk - 1) / kChunk;
  auto run = [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t count = std::min(kChunk, b - first);
    const PairScores part = score_views(model, dataset, std::span(views).subspan(first, count), modules);
    copy_rows(part.d_u, out.d_u, first);
    copy_rows(part.p_u, out.p_u, first);
    copy_rows(part.d_ho, out.d_ho, first);
    copy_rows(part.p_ho, out.p_ho, first);
    copy_rows(part.p_ae, out.p_ae, first);
    copy_rows(part.p_v, out.p_v, first);
    copy_rows(part.interactiveness, out.interactiveness, first);
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, chunks);
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return out;
  }
  // Chunks are assigned round-robin; each writes only its own rows.
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t c = w; c < chunks; c += workers) run(c);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::size_t worker_threads() {
  const char* env = std::getenv("IDN_THREADS");
  if (env == nullptr) return 1;
  std::size_t v = 0;
  const std::string_view s(env);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v == 0) return 1;
  const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
  return std::min(v, hw);
}

Real lis(Real s, const LisParams& p) { return p.T / (1 + std::exp(p.k - p.omega * s)); }

HoiCatalog::HoiCatalog(int n_verbs, std::vector<Composition> compositions)
    : n_verbs_(n_verbs), compositions_(std::move(compositions)) {
  std::set<std::pair<int, int>> seen;
  for (const auto& c : compositions_) {
    if (c.verb < 0 || c.verb >= n_verbs) {
      throw ContractError(fmt::format("catalog composition with verb {} outside [0, {})", c.verb, n_verbs));
    }
    if (c.category < 0) throw ContractError(fmt::format("catalog composition with category {}", c.category));
    if (!seen.emplace(c.verb, c.category).second) {
      throw ContractError(fmt::format("duplicate catalog composition ({}, {})", c.verb, c.category));
    }
  }
}

HoiCatalog HoiCatalog::from_training(const Dataset& train, int categories, std::size_t rare_threshold) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(train.n_verbs() * categories), 0);
  for (const auto& p : train.pairs()) {
    const int cat = train.instance(p.object_id).category;
    if (cat >= categories) throw ContractError(fmt::format("object category {} beyond {} categories", cat, categories));
    for (int v : p.verbs()) ++counts[static_cast<std::size_t>(v * categories + cat)];
  }
  std::vector<Composition> comps;
  for (int v = 0; v < train.n_verbs(); ++v) {
    for (int c = 0; c < categories; ++c) {
      const auto count = counts[static_cast<std::size_t>(v * categories + c)];
      comps.push_back({v, c, count < rare_threshold ? "rare" : "non-rare"});
    }
  }
  return HoiCatalog(train.n_verbs(), std::move(comps));
}

std::optional<std::size_t> HoiCatalog::find(int verb, int category) const {
  for (std::size_t i = 0; i < compositions_.size(); ++i) {
    if (compositions_[i].verb == verb && compositions_[i].category == category) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> HoiCatalog::for_category(int category) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < compositions_.size(); ++i) {
    if (compositions_[i].category == category) out.push_back(i);
  }
  return out;
}

std::vector<std::string> HoiCatalog::splits() const {
  std::set<std::string> s;
  for (const auto& c : compositions_) {
    if (!c.split.empty()) s.insert(c.split);
  }
  return {s.begin(), s.end()};
}

Real object_term(Real human_confidence, Real object_confidence, const LisParams& params) {
  return lis(human_confidence, params) * lis(object_confidence, params);
}

std::vector<std::pair<std::size_t, Real>> compose_hoi(const DetectionRecord& record, const HoiCatalog& catalog) {
  std::vector<std::pair<std::size_t, Real>> out;
  for (std::size_t c : catalog.for_category(record.category)) {
    const auto verb = static_cast<std::size_t>(catalog.compositions()[c].verb);
    if (verb >= record.p_v.size()) {
      throw DimensionError(fmt::format("record has {} verb scores, catalog needs verb {}", record.p_v.size(), verb));
    }
    out.emplace_back(c, record.p_v[verb] * record.p_o);
  }
  return out;
}

std::vector<DetectionRecord> nis_filter(std::span<const DetectionRecord> records, Real threshold) {
  std::vector<DetectionRecord> out;
  for (const auto& r : records) {
    if (r.interactiveness >= threshold) out.push_back(r);
  }
  return out;
}

std::vector<DetectionRecord> detect(const IdnModel& model, const Dataset& dataset, const HoiCatalog& catalog,
                                    const DetectOptions& options, std::size_t threads) {
  std::vector<std::size_t> all(dataset.pairs().size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const PairScores scores = score_pairs(model, dataset, all, options.modules, threads);
  std::vector<DetectionRecord> records;
  records.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const auto& p = dataset.pairs()[i];
    const auto& h = dataset.instance(p.human_id);
    const auto& o = dataset.instance(p.object_id);
    DetectionRecord r;
    r.image = static_cast<std::int64_t>(i);
    r.pair_index = i;
    r.human = h.box;
    r.object = o.box;
    r.category = o.category;
    r.p_o = object_term(h.confidence, o.confidence, options.lis);
    auto row = scores.p_v.row_span(i);
    r.p_v.assign(row.begin(), row.end());
    r.interactiveness = scores.interactiveness.at(i, 0);
    r.p_hoi = compose_hoi(r, catalog);
    records.push_back(std::move(r));
  }
  if (options.use_nis) return nis_filter(records, options.nis_threshold);
  return records;
}

std::string format_detections(std::span<const DetectionRecord> records) {
  std::string out;
  for (const auto& r : records) {
    for (const auto& [comp, score] : r.p_hoi) {
      out += fmt::format("D {} {} {} {} {} {} {} {} {} {} {} {:.9g}\n", r.image, r.human.x1, r.human.y1, r.human.x2,
                         r.human.y2, r.object.x1, r.object.y1, r.object.x2, r.object.y2, r.category, comp, score);
    }
  }
  return out;
}

void write_detections(std::span<const DetectionRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot write detections " + path.string());
  out << format_detections(records);
}

}  // namespace idn
