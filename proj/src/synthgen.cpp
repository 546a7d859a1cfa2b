#include "idn/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "idn/rng.hpp"

namespace idn {

void SynthConfig::validate() const {
  if (n_verbs <= 0) throw ConfigError("synth: n_verbs must be positive");
  if (widths.union_width == 0 || widths.human_width == 0 || widths.object_width == 0) {
    throw ConfigError("synth: feature widths must be positive");
  }
  if (!(sigma >= 0)) throw ConfigError("synth: sigma must be >= 0");
  if (object_categories <= 0) throw ConfigError("synth: object_categories must be positive");
  if (!(human_verb_offset >= 0)) throw ConfigError("synth: human_verb_offset must be >= 0");
  if (!(multi_label_prob >= 0 && multi_label_prob <= 1)) throw ConfigError("synth: multi_label_prob outside [0, 1]");
  if (multi_label_prob > 0 && n_verbs < 2) throw ConfigError("synth: two-verb pairs need at least two verbs");
  if (joints < 2) throw ConfigError("synth: poses need at least pelvis and head");
  if (!(image_w >= 64 && image_h >= 64)) throw ConfigError("synth: image must be at least 64x64");
}

SynthOracle::SynthOracle(int n_verbs, FeatureDims widths, ParamSet params)
    : n_verbs_(n_verbs), widths_(widths), params_(std::move(params)) {
  const std::size_t in = widths.human_width + widths.object_width;
  for (int v = 0; v < n_verbs; ++v) {
    if (!params_.contains(weight_name(v)) || !params_.contains(bias_name(v))) {
      throw FormatError(fmt::format("oracle is missing the map of verb {}", v));
    }
    if (params_.at(weight_name(v)).shape() != Shape{widths.union_width, in} ||
        params_.at(bias_name(v)).shape() != Shape{widths.union_width}) {
      throw DimensionError(fmt::format("oracle map of verb {} does not match widths", v));
    }
  }
}

std::string SynthOracle::weight_name(int verb) { return fmt::format("oracle.verb.{}.w", verb); }
std::string SynthOracle::bias_name(int verb) { return fmt::format("oracle.verb.{}.b", verb); }

std::vector<Real> SynthOracle::map(int verb, std::span<const Real> f_h, std::span<const Real> f_o) const {
  if (verb < 0 || verb >= n_verbs_) throw ContractError(fmt::format("oracle has no verb {}", verb));
  if (f_h.size() != widths_.human_width || f_o.size() != widths_.object_width) {
    throw DimensionError(fmt::format("oracle input widths {}+{}", f_h.size(), f_o.size()));
  }
  const Tensor& w = params_.at(weight_name(verb));
  const Tensor& b = params_.at(bias_name(verb));
  std::vector<Real> out(widths_.union_width);
  for (std::size_t r = 0; r < out.size(); ++r) {
    Real acc = b[r];
    for (std::size_t i = 0; i < f_h.size(); ++i) acc += w.at(r, i) * f_h[i];
    for (std::size_t i = 0; i < f_o.size(); ++i) acc += w.at(r, f_h.size() + i) * f_o[i];
    out[r] = std::tanh(acc);
  }
  return out;
}

namespace {

std::vector<Real> mixed_map(const SynthOracle& oracle, std::span<const int> verbs, std::span<const Real> f_h,
                            std::span<const Real> f_o) {
  if (verbs.empty()) throw ContractError("union feature needs at least one verb");
  std::vector<Real> acc(oracle.widths().union_width, 0.0);
  for (int v : verbs) {
    const auto m = oracle.map(v, f_h, f_o);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m[i];
  }
  for (Real& x : acc) x /= static_cast<Real>(verbs.size());
  return acc;
}

}  // namespace

Tensor SynthOracle::union_feature(std::span<const int> verbs, std::span<const Real> f_h,
                                  std::span<const Real> f_o) const {
  return round_to_float(Tensor::vector(mixed_map(*this, verbs, f_h, f_o)));
}

namespace {

// Frozen generative structure shared by the train and test splits.
struct World {
  const SynthConfig& cfg;
  SynthOracle oracle;
  std::vector<Real> human_mean;         // [ah]
  std::vector<Real> human_loading;      // [ah x 2]
  std::vector<std::vector<Real>> human_offset;      // per verb [ah]
  std::vector<std::vector<Real>> category_mean;     // per category [ao]
  std::vector<std::vector<Real>> category_loading;  // per category [ao]
  std::vector<std::vector<Keypoint>> templates;     // per verb, aligned coordinates
  std::vector<Real> pose_loading;                    // [joints x 2 x 2]
};

constexpr Real kInstanceNoise = 0.05;
constexpr Real kPoseLatentScale = 0.25;

World make_world(const SynthConfig& cfg, Rng& rng) {
  World w{cfg, {}, {}, {}, {}, {}, {}, {}, {}};
  const std::size_t in = cfg.widths.human_width + cfg.widths.object_width;
  ParamSet oracle_params;
  const Real gain = 1.5 / std::sqrt(static_cast<Real>(in));
  for (int v = 0; v < cfg.n_verbs; ++v) {
    Tensor a({cfg.widths.union_width, in});
    for (Real& x : a.data()) x = gain * rng.normal();
    Tensor c({cfg.widths.union_width});
    for (Real& x : c.data()) x = 0.3 * rng.normal();
    oracle_params.add(SynthOracle::weight_name(v), round_to_float(a));
    oracle_params.add(SynthOracle::bias_name(v), round_to_float(c));
  }
  w.oracle = SynthOracle(cfg.n_verbs, cfg.widths, std::move(oracle_params));

  for (std::size_t i = 0; i < cfg.widths.human_width; ++i) w.human_mean.push_back(0.5 * rng.normal());
  for (std::size_t i = 0; i < cfg.widths.human_width * 2; ++i) w.human_loading.push_back(0.5 * rng.normal());
  for (int v = 0; v < cfg.n_verbs; ++v) {
    std::vector<Real> offset;
    for (std::size_t i = 0; i < cfg.widths.human_width; ++i) offset.push_back(cfg.human_verb_offset * rng.normal());
    w.human_offset.push_back(std::move(offset));
  }
  for (int c = 0; c < cfg.object_categories; ++c) {
    std::vector<Real> mean, loading;
    for (std::size_t i = 0; i < cfg.widths.object_width; ++i) mean.push_back(rng.normal());
    for (std::size_t i = 0; i < cfg.widths.object_width; ++i) loading.push_back(0.5 * rng.normal());
    w.category_mean.push_back(std::move(mean));
    w.category_loading.push_back(std::move(loading));
  }
  // Pelvis at the origin and head one unit above it in every template, so the
  // aligned pose of a human is its template plus the latent offset.
  for (int v = 0; v < cfg.n_verbs; ++v) {
    std::vector<Keypoint> t(cfg.joints);
    t[0] = {0, 0, true};
    t[1] = {0, -1, true};
    for (std::size_t k = 2; k < cfg.joints; ++k) t[k] = {rng.uniform(-1, 1), rng.uniform(-1.2, 1.2), true};
    w.templates.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < cfg.joints * 4; ++i) w.pose_loading.push_back(kPoseLatentScale * rng.normal());
  return w;
}

struct Sampled {
  Instance human;
  Instance object;
};

class SplitBuilder {
 public:
  SplitBuilder(const World& w, Rng& rng, std::int64_t first_id)
      : w_(w), rng_(rng), next_id_(first_id), data_(w.cfg.n_verbs, w.cfg.widths) {}

  // Human and object drawn for a pair whose pose template is `pose_verb`.
  // Only a human that interacts carries the verb's appearance offset.
  Sampled draw(int pose_verb, bool interacting) {
    const SynthConfig& cfg = w_.cfg;
    const Real z[2] = {rng_.normal(), rng_.normal()};

    Instance h;
    h.id = next_id_++;
    h.kind = InstanceKind::human;
    h.category = kHumanCategory;
    h.confidence = rng_.uniform(0.5, 1.0);
    h.image_w = cfg.image_w;
    h.image_h = cfg.image_h;
    const Real hw = rng_.uniform(0.09, 0.22) * cfg.image_w;
    const Real hh = rng_.uniform(0.25, 0.5) * cfg.image_h;
    h.box.x1 = std::round(rng_.uniform(0, cfg.image_w - hw));
    h.box.y1 = std::round(rng_.uniform(0, cfg.image_h - hh));
    h.box.x2 = h.box.x1 + std::round(hw);
    h.box.y2 = h.box.y1 + std::round(hh);
    h.appearance = Tensor({cfg.widths.human_width});
    for (std::size_t i = 0; i < cfg.widths.human_width; ++i) {
      const Real offset = interacting ? w_.human_offset[static_cast<std::size_t>(pose_verb)][i] : 0.0;
      h.appearance[i] = w_.human_mean[i] + offset + w_.human_loading[2 * i] * z[0] + w_.human_loading[2 * i + 1] * z[1] +
                        kInstanceNoise * rng_.normal();
    }
    h.appearance = round_to_float(h.appearance);
    // Pose: template + latent offset, placed with the pelvis at the box centre
    // and a head-pelvis length of a quarter box height.
    const auto& tmpl = w_.templates[static_cast<std::size_t>(pose_verb)];
    const Real cx = 0.5 * (h.box.x1 + h.box.x2), cy = 0.5 * (h.box.y1 + h.box.y2);
    const Real unit = 0.25 * h.box.height();
    for (std::size_t k = 0; k < cfg.joints; ++k) {
      Real ax = tmpl[k].x, ay = tmpl[k].y;
      if (k >= 2) {
        const Real* q = &w_.pose_loading[4 * k];
        ax += q[0] * z[0] + q[1] * z[1];
        ay += q[2] * z[0] + q[3] * z[1];
      }
      Keypoint kp;
      kp.x = std::round(std::clamp(cx + unit * ax, 0.0, cfg.image_w) * 100) / 100;
      kp.y = std::round(std::clamp(cy + unit * ay, 0.0, cfg.image_h) * 100) / 100;
      kp.valid = k < 2 || !rng_.bernoulli(0.05);
      if (!kp.valid) kp.x = kp.y = 0;
      h.pose.push_back(kp);
    }

    Instance o;
    o.id = next_id_++;
    o.kind = InstanceKind::object;
    o.category = static_cast<int>(rng_.index(static_cast<std::uint64_t>(cfg.object_categories)));
    o.confidence = rng_.uniform(0.5, 1.0);
    o.image_w = cfg.image_w;
    o.image_h = cfg.image_h;
    // The object appearance follows the log area ratio to the paired human,
    // so size-matched objects are also feature-matched.
    Real r = std::clamp(0.5 * rng_.normal(), -1.5, 1.5);
    const Real aspect = rng_.uniform(0.67, 1.5);
    Real ow = std::round(std::sqrt(h.box.area() * std::exp(r) * aspect));
    Real oh = std::round(std::sqrt(h.box.area() * std::exp(r) / aspect));
    ow = std::clamp(ow, 2.0, cfg.image_w - 1);
    oh = std::clamp(oh, 2.0, cfg.image_h - 1);
    r = std::log(ow * oh / h.box.area());
    o.box.x1 = std::round(rng_.uniform(0, cfg.image_w - ow));
    o.box.y1 = std::round(rng_.uniform(0, cfg.image_h - oh));
    o.box.x2 = o.box.x1 + ow;
    o.box.y2 = o.box.y1 + oh;
    const auto c = static_cast<std::size_t>(o.category);
    o.appearance = Tensor({cfg.widths.object_width});
    for (std::size_t i = 0; i < cfg.widths.object_width; ++i) {
      o.appearance[i] = w_.category_mean[c][i] + w_.category_loading[c][i] * r + kInstanceNoise * rng_.normal();
    }
    o.appearance = round_to_float(o.appearance);
    return {std::move(h), std::move(o)};
  }

  Tensor noisy_union(std::span<const int> verbs, const Instance& h, const Instance& o) {
    auto u = w_.oracle.union_feature(verbs, h.appearance.data(), o.appearance.data());
    if (w_.cfg.sigma > 0) {
      // Noise is added to the unrounded map so sigma = 0 stays exact.
      auto raw = mixed_map(w_.oracle, verbs, h.appearance.data(), o.appearance.data());
      for (std::size_t i = 0; i < raw.size(); ++i) u[i] = raw[i] + w_.cfg.sigma * rng_.normal();
      u = round_to_float(u);
    }
    return u;
  }

  void positive(int verb) {
    std::vector<int> verbs{verb};
    if (rng_.bernoulli(w_.cfg.multi_label_prob)) {
      auto other = static_cast<int>(rng_.index(static_cast<std::uint64_t>(w_.cfg.n_verbs - 1)));
      if (other >= verb) ++other;
      verbs.push_back(other);
      std::sort(verbs.begin(), verbs.end());
    }
    Sampled s = draw(verb, true);
    Tensor u = noisy_union(verbs, s.human, s.object);
    add(std::move(s), std::move(u), verbs);
  }

  void negative() {
    const int n = w_.cfg.n_verbs;
    Sampled s = draw(static_cast<int>(rng_.index(static_cast<std::uint64_t>(n))), false);
    // The union comes from an unrelated human and object under a random verb.
    const int c = static_cast<int>(rng_.index(static_cast<std::uint64_t>(n)));
    const std::int64_t saved = next_id_;
    Sampled ghost = draw(c, true);
    next_id_ = saved;
    const int verbs[] = {c};
    Tensor u = noisy_union(verbs, ghost.human, ghost.object);
    add(std::move(s), std::move(u), {});
  }

  Dataset finish() {
    data_.validate();
    return std::move(data_);
  }

 private:
  void add(Sampled s, Tensor u, const std::vector<int>& verbs) {
    const auto hid = s.human.id, oid = s.object.id;
    data_.add_instance(std::move(s.human));
    data_.add_instance(std::move(s.object));
    data_.add_pair(make_pair(hid, oid, std::move(u), verbs, w_.cfg.n_verbs));
  }

  const World& w_;
  Rng& rng_;
  std::int64_t next_id_;
  Dataset data_;
};

Dataset build_split(const World& w, Rng& rng, std::int64_t first_id, std::size_t per_verb, std::size_t negatives) {
  SplitBuilder b(w, rng, first_id);
  // Interleave positives and negatives so no split is ordered by class.
  std::vector<int> plan;
  for (int v = 0; v < w.cfg.n_verbs; ++v) plan.insert(plan.end(), per_verb, v);
  plan.insert(plan.end(), negatives, -1);
  for (std::size_t i = plan.size(); i > 1; --i) std::swap(plan[i - 1], plan[rng.index(i)]);
  for (int v : plan) {
    if (v >= 0) {
      b.positive(v);
    } else {
      b.negative();
    }
  }
  return b.finish();
}

}  // namespace

SynthData generate(const SynthConfig& config) {
  config.validate();
  Rng world_rng(derive_seed(config.seed, "synth.world"));
  const World w = make_world(config, world_rng);
  Rng train_rng(derive_seed(config.seed, "synth.train"));
  Rng test_rng(derive_seed(config.seed, "synth.test"));
  SynthData out;
  out.train = build_split(w, train_rng, 0, config.pairs_per_verb, config.negatives);
  out.test = build_split(w, test_rng, 1'000'000, config.test_pairs_per_verb, config.test_negatives);
  out.oracle = w.oracle;
  return out;
}

void write_synth(const SynthData& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw PathError(fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  save_dataset(data.train, dir / "train.manifest");
  save_dataset(data.test, dir / "test.manifest");
  save_checkpoint(data.oracle.params(), dir / "oracle.ckpt");
}

SynthOracle load_oracle(const std::filesystem::path& checkpoint, int n_verbs, FeatureDims widths) {
  return SynthOracle(n_verbs, widths, load_checkpoint(checkpoint));
}

BayesReport bayes_oracle(const Dataset& dataset, const SynthOracle& oracle) {
  const int n = oracle.n_verbs();
  std::vector<std::vector<int>> hypotheses;
  for (int a = 0; a < n; ++a) hypotheses.push_back({a});
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) hypotheses.push_back({a, b});
  }
  BayesReport report;
  for (const PairSample& p : dataset.pairs()) {
    if (!p.interactive) continue;
    const auto& fh = dataset.instance(p.human_id).appearance;
    const auto& fo = dataset.instance(p.object_id).appearance;
    std::vector<std::vector<Real>> singles;
    for (int v = 0; v < n; ++v) singles.push_back(oracle.map(v, fh.data(), fo.data()));
    std::size_t best = 0;
    Real best_d = std::numeric_limits<Real>::infinity();
    for (std::size_t k = 0; k < hypotheses.size(); ++k) {
      Real d = 0;
      for (std::size_t i = 0; i < p.union_appearance.size(); ++i) {
        Real m = 0;
        for (int v : hypotheses[k]) m += singles[static_cast<std::size_t>(v)][i];
        m /= static_cast<Real>(hypotheses[k].size());
        d += (p.union_appearance[i] - m) * (p.union_appearance[i] - m);
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    ++report.total;
    if (hypotheses[best] == p.verbs()) ++report.correct;
  }
  return report;
}

}  // namespace idn
