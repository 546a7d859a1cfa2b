#include <doctest.h>

#include <filesystem>

#include "idn/dataset.hpp"
#include "idn/rng.hpp"

using namespace idn;

namespace {

Tensor feature(std::size_t n, Rng& rng) {
  Tensor t({n});
  for (Real& x : t.data()) x = round_to_float(rng.normal());
  return t;
}

Dataset small_dataset(std::uint64_t seed) {
  Rng rng(seed);
  const FeatureDims dims{3, 2, 2};
  Dataset d(2, dims);
  for (int i = 0; i < 4; ++i) {
    Instance h;
    h.id = 10 + 2 * i;
    h.box = {1, 2, 30, 40};
    h.image_w = 64;
    h.image_h = 48;
    h.confidence = 0.5;
    h.appearance = feature(2, rng);
    if (i % 2 == 0) h.pose = {{1.5, 2.5, true}, {0, 0, false}, {7, 8, true}};
    Instance o;
    o.id = h.id + 1;
    o.kind = InstanceKind::object;
    o.category = i;
    o.box = {20, 5, 50, 25};
    o.image_w = 64;
    o.image_h = 48;
    o.appearance = feature(2, rng);
    d.add_instance(h);
    d.add_instance(o);
    std::vector<int> verbs;
    if (i == 1) verbs = {0};
    if (i == 2) verbs = {0, 1};
    d.add_pair(make_pair(h.id, o.id, feature(3, rng), verbs, 2));
  }
  return d;
}

}  // namespace

TEST_CASE("union_box and normalize_box examples") {
  CHECK(union_box({0, 0, 2, 2}, {1, 1, 3, 4}) == Box{0, 0, 3, 4});
  CHECK(union_box({5, 5, 6, 6}, {5, 5, 6, 6}) == Box{5, 5, 6, 6});
  const auto n = normalize_box({10, 20, 50, 100}, 100, 200);
  CHECK(n == std::array<Real, 4>{0.1, 0.1, 0.5, 0.5});
  // Clipped to the image before normalizing.
  CHECK(normalize_box({-5, 0, 150, 10}, 100, 10) == std::array<Real, 4>{0, 0, 1, 1});
  CHECK_THROWS_AS(normalize_box({0, 0, 1, 1}, 0, 10), ContractError);
}

TEST_CASE("union box contains both inputs (property)") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    auto box = [&] {
      const Real x = rng.uniform(0, 50), y = rng.uniform(0, 50);
      return Box{x, y, x + rng.uniform(0.1, 30), y + rng.uniform(0.1, 30)};
    };
    const Box a = box(), b = box(), u = union_box(a, b);
    for (const Box& x : {a, b}) {
      CHECK(u.x1 <= x.x1);
      CHECK(u.y1 <= x.y1);
      CHECK(u.x2 >= x.x2);
      CHECK(u.y2 >= x.y2);
    }
    CHECK(u.area() >= std::max(a.area(), b.area()));
  }
}

TEST_CASE("make_pair and labels") {
  const PairSample p = make_pair(1, 2, Tensor({3}), {2, 0}, 3);
  CHECK(p.verbs() == std::vector<int>{0, 2});
  CHECK(p.interactive);
  CHECK_FALSE(make_pair(1, 2, Tensor({3}), {}, 3).interactive);
  CHECK_THROWS_AS(make_pair(1, 2, Tensor({3}), {3}, 3), ContractError);
}

TEST_CASE("manifest roundtrip (property)") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Dataset d = small_dataset(seed);
    const auto enc = encode_dataset(d);
    const Dataset back = decode_dataset(enc.manifest, enc.blob);
    CHECK(back == d);
    CHECK(back.positive_indices() == std::vector<std::size_t>{1, 2});
    CHECK(back.negative_indices() == std::vector<std::size_t>{0, 3});
  }
}

TEST_CASE("dataset files") {
  const auto dir = std::filesystem::temp_directory_path() / "idn_test_dataset";
  std::filesystem::create_directories(dir);
  const Dataset d = small_dataset(4);
  save_dataset(d, dir / "train.manifest");
  CHECK(std::filesystem::exists(blob_path_for(dir / "train.manifest")));
  CHECK(load_dataset(dir / "train.manifest") == d);
  CHECK_THROWS_AS(load_dataset(dir / "none.manifest"), PathError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validation errors") {
  const Dataset good = small_dataset(5);
  CHECK_NOTHROW(good.validate());

  Dataset wrong_width(2, {3, 2, 2});
  Instance h;
  h.id = 1;
  h.box = {0, 0, 1, 1};
  h.appearance = Tensor({5});
  wrong_width.add_instance(h);
  CHECK_THROWS_AS(wrong_width.validate(), FormatError);

  Dataset dup(2, {3, 2, 2});
  h.appearance = Tensor({2});
  dup.add_instance(h);
  CHECK_THROWS_AS(dup.add_instance(h), ContractError);

  Dataset flipped(2, {3, 2, 2});
  flipped.add_instance(h);
  Instance o = h;
  o.id = 2;
  o.kind = InstanceKind::object;
  o.category = 0;
  flipped.add_instance(o);
  // Object in the human slot.
  flipped.add_pair(make_pair(2, 1, Tensor({3}), {}, 2));
  CHECK_THROWS_AS(flipped.validate(), FormatError);

  Dataset mismatch(2, {3, 2, 2});
  mismatch.add_instance(h);
  mismatch.add_instance(o);
  PairSample p = make_pair(1, 2, Tensor({3}), {1}, 2);
  p.interactive = false;
  mismatch.add_pair(p);
  CHECK_THROWS_AS(mismatch.validate(), FormatError);
}

TEST_CASE("malformed manifests") {
  const auto enc = encode_dataset(small_dataset(6));
  CHECK_THROWS_AS(decode_dataset("", enc.blob), ParseError);
  CHECK_THROWS_AS(decode_dataset("HELLO v1\n", enc.blob), ParseError);
  std::string bad = enc.manifest;
  bad.insert(bad.find("\nI ") + 3, "x");
  CHECK_THROWS_AS(decode_dataset(bad, enc.blob), ParseError);
  CHECK_THROWS_AS(decode_dataset(enc.manifest, std::span(enc.blob.data(), enc.blob.size() / 2)), FormatError);
}
