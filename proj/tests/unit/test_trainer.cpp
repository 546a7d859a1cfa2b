#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "idn/trainer.hpp"

using namespace idn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("build_batch class counts and determinism (property)") {
  const SynthData data = generate(fixture::small_synth_config());
  const Dataset& ds = data.train;
  Rng sizes(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t pos = sizes.index(80), neg = sizes.index(80);
    const std::uint64_t seed = sizes.next_u64();
    Rng a(seed), b(seed);
    const auto batch = build_batch(ds, pos, neg, a);
    CHECK(batch == build_batch(ds, pos, neg, b));
    std::size_t p = 0, n = 0;
    for (std::size_t i : batch) (ds.pairs()[i].interactive ? p : n) += 1;
    CHECK(p == pos);
    CHECK(n == neg);
    // Without replacement when the class is large enough.
    const std::set<std::size_t> unique(batch.begin(), batch.end());
    if (pos <= ds.positive_indices().size() && neg <= ds.negative_indices().size()) {
      CHECK(unique.size() == batch.size());
    }
  }
}

TEST_CASE("build_batch on a two-pair toy") {
  Dataset ds(1, {2, 1, 1});
  for (std::int64_t id = 0; id < 4; ++id) {
    Instance inst;
    inst.id = id;
    inst.kind = id % 2 == 0 ? InstanceKind::human : InstanceKind::object;
    inst.category = id % 2 == 0 ? kHumanCategory : 0;
    inst.box = {0, 0, 1, 1};
    inst.appearance = Tensor({1});
    ds.add_instance(inst);
  }
  ds.add_pair(make_pair(0, 1, Tensor({2}), {0}, 1));
  ds.add_pair(make_pair(2, 3, Tensor({2}), {}, 1));
  Rng rng(3);
  const auto batch = build_batch(ds, 2, 2, rng);
  CHECK(std::count(batch.begin(), batch.end(), 0u) == 2);
  CHECK(std::count(batch.begin(), batch.end(), 1u) == 2);

  Dataset only_pos(1, {2, 1, 1});
  for (std::int64_t id = 0; id < 2; ++id) only_pos.add_instance(ds.instance(id));
  only_pos.add_pair(make_pair(0, 1, Tensor({2}), {0}, 1));
  CHECK_THROWS_AS(build_batch(only_pos, 1, 1, rng), ConfigError);
  CHECK(build_batch(only_pos, 3, 0, rng).size() == 3);
}

TEST_CASE("phase lengths") {
  const SynthData data = generate(fixture::small_synth_config());
  PhaseConfig p{7, 0, 0.1, 0.9, 6, 12};
  CHECK(p.steps_for(data.train) == 7);
  p.epochs = 2;
  // ceil(#interactive / 6) batches per epoch
  const std::size_t pos = data.train.positive_indices().size();
  CHECK(p.steps_for(data.train) == 2 * ((pos + 5) / 6));
}

TEST_CASE("instance exchange only runs in the last phase") {
  const SynthData data = generate(fixture::small_synth_config());
  TrainConfig cfg = fixture::small_train_config();
  const TrainResult r = train(cfg, data.train);
  CHECK(r.ae.steps == 4);
  CHECK(r.idn.exchange_draws == 0);
  // Every positive of every batch goes through exchange_sample.
  CHECK(r.idn_ipt.exchange_draws == 4 * 6);
  CHECK(r.log.size() == 12);

  cfg.modules.ipt = false;
  CHECK(train(cfg, data.train).idn_ipt.exchange_draws == 0);
}

TEST_CASE("training runs are byte-reproducible") {
  const SynthData data = generate(fixture::small_synth_config());
  const TrainConfig cfg = fixture::small_train_config();
  const auto base = std::filesystem::temp_directory_path() / "idn_test_trainer";
  std::filesystem::remove_all(base);
  train(cfg, data.train, base / "a");
  train(cfg, data.train, base / "b");
  for (const char* f : {"losses.csv", "ae.ckpt", "idn.ckpt", "idn_ipt.ckpt", "candidates.txt"}) {
    INFO(f);
    const std::string a = slurp(base / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(base / "b" / f));
  }
  CHECK(slurp(base / "a" / "losses.csv").starts_with(loss_csv_header()));

  // Starting from the saved compressor skips phase 1 and reproduces the rest.
  const ParamSet comp = load_checkpoint(base / "a" / "ae.ckpt");
  const TrainResult resumed = train(cfg, data.train, base / "c", &comp);
  CHECK(resumed.ae.steps == 0);
  CHECK(slurp(base / "c" / "idn_ipt.ckpt") == slurp(base / "a" / "idn_ipt.ckpt"));
  std::filesystem::remove_all(base);
}

TEST_CASE("config validation") {
  TrainConfig cfg = fixture::small_train_config();
  cfg.losses.cls.hinge_weight = -0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  const TrainConfig published = TrainConfig::published_schedule("hico-det");
  CHECK(published.idn.lr == 0.02);
  CHECK(published.idn_ipt.lr == 1e-3);
  CHECK(published.ae.epochs == 4);
  CHECK(published.idn.epochs == 20);
  CHECK(published.idn_ipt.epochs == 30);
  CHECK(TrainConfig::published_schedule("v-coco").ae.epochs == 60);
  CHECK_THROWS_AS(TrainConfig::published_schedule("coco"), ConfigError);
}
