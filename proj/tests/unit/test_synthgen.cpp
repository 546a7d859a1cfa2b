#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "idn/synthgen.hpp"

using namespace idn;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("default sizes") {
  const SynthData d = generate(SynthConfig{});
  CHECK(d.train.pairs().size() == 2400);
  CHECK(d.test.pairs().size() == 600);
  CHECK(d.train.negative_indices().size() == 800);
  CHECK(d.train.n_verbs() == 8);
  CHECK_NOTHROW(d.train.validate());
  CHECK_NOTHROW(d.test.validate());
  // Every verb has at least its quota of positives.
  for (int v = 0; v < 8; ++v) {
    std::size_t n = 0;
    for (const auto& p : d.train.pairs()) n += p.has_verb(v);
    CHECK(n >= 200);
  }
}

TEST_CASE("noise-free unions are exactly the oracle map") {
  SynthConfig c = fixture::small_synth_config();
  c.sigma = 0;
  const SynthData d = generate(c);
  for (const Dataset* ds : {&d.train, &d.test}) {
    for (const auto& p : ds->pairs()) {
      if (!p.interactive) continue;
      const auto verbs = p.verbs();
      const Tensor u = d.oracle.union_feature(verbs, ds->instance(p.human_id).appearance.data(),
                                              ds->instance(p.object_id).appearance.data());
      CHECK(l2_distance(u.data(), p.union_appearance.data()) == 0);
    }
  }
  CHECK(bayes_oracle(d.test, d.oracle).accuracy() == 1);
}

TEST_CASE("generation is byte-reproducible and seed-dependent") {
  const auto base = std::filesystem::temp_directory_path() / "idn_test_synth";
  std::filesystem::remove_all(base);
  const SynthConfig c = fixture::small_synth_config(11);
  write_synth(generate(c), base / "a");
  write_synth(generate(c), base / "b");
  for (const char* f : {"train.manifest", "train.blob", "test.manifest", "test.blob", "oracle.ckpt"}) {
    INFO(f);
    CHECK(slurp(base / "a" / f) == slurp(base / "b" / f));
  }
  SynthConfig other = c;
  other.seed = 12;
  CHECK_FALSE(generate(other).train == generate(c).train);

  const SynthOracle o = load_oracle(base / "a" / "oracle.ckpt", c.n_verbs, c.widths);
  CHECK(o.params().values() == generate(c).oracle.params().values());
  CHECK(load_dataset(base / "a" / "test.manifest") == generate(c).test);
  std::filesystem::remove_all(base);
}

TEST_CASE("the default problem is solvable by its generator") {
  const SynthData d = generate(SynthConfig{});
  const BayesReport r = bayes_oracle(d.test, d.oracle);
  CHECK(r.total == 400);
  CHECK(r.accuracy() >= 0.99);
}

TEST_CASE("humans carry valid poses and stay inside the image") {
  const SynthData d = generate(fixture::small_synth_config());
  for (const auto& inst : d.train.instances()) {
    CHECK(inst.box.valid());
    CHECK(inst.box.x2 <= inst.image_w);
    CHECK(inst.box.y2 <= inst.image_h);
    if (inst.kind == InstanceKind::human) {
      REQUIRE(inst.pose.size() == 6);
      CHECK(can_align(inst.pose));
    }
  }
}

TEST_CASE("bad configurations") {
  SynthConfig c;
  c.sigma = -1;
  CHECK_THROWS_AS(generate(c), ConfigError);
  c = {};
  c.human_verb_offset = -0.1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.n_verbs = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.multi_label_prob = 0;
  CHECK_NOTHROW(c.validate());
}
