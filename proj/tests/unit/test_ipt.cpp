#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "idn/ipt.hpp"

using namespace idn;

namespace {

Pose random_pose(Rng& rng, std::size_t joints) {
  Pose p;
  for (std::size_t k = 0; k < joints; ++k) p.push_back({rng.uniform(0, 100), rng.uniform(0, 100), true});
  return p;
}

}  // namespace

TEST_CASE("align_pose puts the pelvis at the origin with unit head distance (property)") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    Pose p = random_pose(rng, 6);
    p[3].valid = rng.bernoulli(0.5);
    const Pose a = align_pose(p);
    CHECK(a[0].x == 0);
    CHECK(a[0].y == 0);
    CHECK(std::hypot(a[1].x, a[1].y) == doctest::Approx(1).epsilon(1e-12));
    if (!p[3].valid) CHECK(a[3] == p[3]);
    // Translation and scale invariance.
    Pose moved = p;
    const Real s = rng.uniform(0.5, 3), dx = rng.uniform(-20, 20), dy = rng.uniform(-20, 20);
    for (Keypoint& k : moved) {
      if (!k.valid) continue;
      k.x = k.x * s + dx;
      k.y = k.y * s + dy;
    }
    CHECK(pose_similarity(a, align_pose(moved)) < 1e-9);
  }
}

TEST_CASE("degenerate poses") {
  Pose p = {{1, 1, true}, {1, 1, true}, {3, 4, true}};
  CHECK_FALSE(can_align(p));
  CHECK_THROWS_AS(align_pose(p), ContractError);
  p[1] = {0, 0, false};
  CHECK_THROWS_AS(align_pose(p), ContractError);
  CHECK_THROWS_AS(align_pose(Pose{{0, 0, true}}), ContractError);
}

TEST_CASE("pose_similarity") {
  const Pose a = {{0, 0, true}, {0, 1, true}, {3, 4, true}};
  Pose b = {{0, 0, true}, {0, 1, true}, {0, 0, true}};
  CHECK(pose_similarity(a, b) == doctest::Approx(5));
  b[2].valid = false;
  CHECK(pose_similarity(a, b) == 0);
  CHECK_THROWS_AS(pose_similarity(a, Pose{{0, 0, false}, {0, 0, false}, {0, 0, false}}), ContractError);
  CHECK_THROWS_AS(pose_similarity(a, Pose{{0, 0, true}}), DimensionError);
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const Pose x = random_pose(rng, 5), y = random_pose(rng, 5);
    CHECK(pose_similarity(x, y) == pose_similarity(y, x));
    CHECK(pose_similarity(x, x) == 0);
  }
}

TEST_CASE("candidate table invariants") {
  const SynthData data = generate(fixture::small_synth_config(5));
  const Dataset& ds = data.train;
  const std::size_t m = 4;
  const CandidateTable t = build_candidates(ds, m);
  CHECK_NOTHROW(check_candidates(t, ds));
  CHECK(build_candidates(ds, m) == t);

  std::set<std::int64_t> humans, objects;
  for (const auto& p : ds.pairs()) {
    if (!p.interactive) continue;
    humans.insert(p.human_id);
    objects.insert(p.object_id);
  }
  CHECK(t.humans().size() == humans.size());
  CHECK(t.objects().size() == objects.size());

  for (const auto& [id, cands] : t.humans()) {
    CHECK(cands.size() <= m);
    CHECK(std::set<std::int64_t>(cands.begin(), cands.end()).size() == cands.size());
    const Pose q = align_pose(ds.instance(id).pose);
    // Brute force: every other eligible human, ordered by (distance, id).
    std::vector<std::pair<Real, std::int64_t>> all;
    const auto hois = human_hois(ds, id);
    for (std::int64_t c : humans) {
      if (c == id) continue;
      const auto other = human_hois(ds, c);
      bool share = false;
      for (const auto& h : hois) share = share || std::find(other.begin(), other.end(), h) != other.end();
      if (share) all.emplace_back(pose_similarity(q, align_pose(ds.instance(c).pose)), c);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::int64_t> want;
    for (std::size_t i = 0; i < all.size() && i < m; ++i) want.push_back(all[i].second);
    CHECK(cands == want);
  }
  for (const auto& [id, cands] : t.objects()) {
    CHECK(cands.size() <= m);
    for (std::int64_t c : cands) CHECK(ds.instance(c).category == ds.instance(id).category);
    std::vector<Real> gaps;
    const Real r = std::log(object_area_ratio(ds, id));
    for (std::int64_t c : cands) gaps.push_back(std::abs(std::log(object_area_ratio(ds, c)) - r));
    CHECK(std::is_sorted(gaps.begin(), gaps.end()));
  }
}

TEST_CASE("check_candidates catches broken tables") {
  const SynthData data = generate(fixture::small_synth_config(5));
  CandidateTable t = build_candidates(data.train, 3);
  const auto [hid, hc] = *t.humans().begin();
  t.set_human(hid, {hid});
  CHECK_THROWS_AS(check_candidates(t, data.train), ContractError);

  CandidateTable u = build_candidates(data.train, 3);
  const auto [oid, oc] = *u.objects().begin();
  u.set_object(oid, {hid});
  CHECK_THROWS_AS(check_candidates(u, data.train), ContractError);
}

TEST_CASE("exchange draws are uniform over the original and its candidates") {
  CandidateTable t;
  t.set_human(1, {11, 12, 13});
  t.set_object(2, {21});
  const PairView v{7, 1, 2};
  Rng rng(9);
  std::map<std::int64_t, int> h, o;
  const int draws = 6000;
  for (int i = 0; i < draws; ++i) {
    const PairView x = exchange_sample(v, t, rng);
    CHECK(x.pair_index == 7);
    ++h[x.human_id];
    ++o[x.object_id];
  }
  CHECK(h.size() == 4);
  CHECK(o.size() == 2);
  // Expected 1500 and 3000; five standard deviations.
  for (const auto& [id, n] : h) CHECK(std::abs(n - 1500) < 5 * std::sqrt(6000 * 0.25 * 0.75));
  for (const auto& [id, n] : o) CHECK(std::abs(n - 3000) < 5 * std::sqrt(6000 * 0.25));
  // No candidates: the pair stays as it is.
  for (int i = 0; i < 20; ++i) CHECK(exchange_sample({0, 5, 6}, t, rng).human_id == 5);
}

TEST_CASE("candidate table text roundtrip") {
  CandidateTable t;
  t.set_human(1, {11, 12});
  t.set_human(3, {});
  t.set_object(2, {21});
  const std::string text = t.serialize();
  CHECK(CandidateTable::parse(text) == t);
  CHECK_THROWS_AS(CandidateTable::parse("C widget 1 2\n"), ParseError);
  CHECK_THROWS_AS(CandidateTable::parse("C human x 2\n"), ParseError);
}
