#include "idn/ipt.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace idn {

bool can_align(const Pose& pose, const PoseConvention& c) {
  if (c.pelvis >= pose.size() || c.head >= pose.size()) return false;
  const Keypoint& p = pose[c.pelvis];
  const Keypoint& h = pose[c.head];
  return p.valid && h.valid && std::hypot(h.x - p.x, h.y - p.y) > 0;
}

Pose align_pose(const Pose& pose, const PoseConvention& c) {
  if (c.pelvis >= pose.size() || c.head >= pose.size()) {
    throw ContractError(fmt::format("pose has {} joints, pelvis {} head {}", pose.size(), c.pelvis, c.head));
  }
  const Keypoint& p = pose[c.pelvis];
  const Keypoint& h = pose[c.head];
  if (!p.valid || !h.valid) throw ContractError("degenerate pose: pelvis or head keypoint invalid");
  const Real len = std::hypot(h.x - p.x, h.y - p.y);
  if (!(len > 0)) throw ContractError("degenerate pose: head and pelvis coincide");
  Pose out = pose;
  for (Keypoint& k : out) {
    if (!k.valid) continue;
    k.x = (k.x - p.x) / len;
    k.y = (k.y - p.y) / len;
  }
  return out;
}

Real pose_similarity(const Pose& a, const Pose& b) {
  if (a.size() != b.size()) throw DimensionError(fmt::format("poses with {} and {} joints", a.size(), b.size()));
  Real sum = 0;
  bool any = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!a[k].valid || !b[k].valid) continue;
    sum += std::hypot(a[k].x - b[k].x, a[k].y - b[k].y);
    any = true;
  }
  if (!any) throw ContractError("incomparable poses: no jointly valid keypoint");
  return sum;
}

namespace {
const std::vector<std::int64_t> kNoCandidates;

const std::vector<std::int64_t>& lookup(const std::map<std::int64_t, std::vector<std::int64_t>>& m,
                                        std::int64_t id) {
  auto it = m.find(id);
  return it == m.end() ? kNoCandidates : it->second;
}

std::string join_ids(const std::vector<std::int64_t>& ids) {
  if (ids.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(ids[i]);
  }
  return out;
}

std::int64_t parse_id(std::string_view s, const std::string& where) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError(fmt::format("{}: bad id '{}'", where, s));
  return v;
}
}  // namespace

const std::vector<std::int64_t>& CandidateTable::human_candidates(std::int64_t id) const { return lookup(humans_, id); }
const std::vector<std::int64_t>& CandidateTable::object_candidates(std::int64_t id) const {
  return lookup(objects_, id);
}

std::string CandidateTable::serialize() const {
  std::string out;
  for (const auto& [id, c] : humans_) out += fmt::format("C human {} {}\n", id, join_ids(c));
  for (const auto& [id, c] : objects_) out += fmt::format("C object {} {}\n", id, join_ids(c));
  return out;
}

CandidateTable CandidateTable::parse(const std::string& text, const std::string& source) {
  CandidateTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = fmt::format("{}:{}", source, lineno);
    std::istringstream ls(line);
    std::string tag, kind, id, list, extra;
    if (!(ls >> tag >> kind >> id >> list) || (ls >> extra) || tag != "C") {
      throw ParseError(where + ": expected 'C <kind> <id> <ids>'");
    }
    std::vector<std::int64_t> ids;
    if (list != "-") {
      std::size_t start = 0;
      while (start <= list.size()) {
        const auto comma = list.find(',', start);
        const auto end = comma == std::string::npos ? list.size() : comma;
        ids.push_back(parse_id(std::string_view(list).substr(start, end - start), where));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    const std::int64_t q = parse_id(id, where);
    if (kind == "human") {
      t.humans_[q] = std::move(ids);
    } else if (kind == "object") {
      t.objects_[q] = std::move(ids);
    } else {
      throw ParseError(fmt::format("{}: unknown kind '{}'", where, kind));
    }
  }
  return t;
}

std::vector<std::pair<int, int>> human_hois(const Dataset& dataset, std::int64_t human_id) {
  std::set<std::pair<int, int>> hois;
  for (const PairSample& p : dataset.pairs()) {
    if (p.human_id != human_id || !p.interactive) continue;
    const int cat = dataset.instance(p.object_id).category;
    for (int v : p.verbs()) hois.emplace(v, cat);
  }
  return {hois.begin(), hois.end()};
}

Real object_area_ratio(const Dataset& dataset, std::int64_t object_id) {
  const PairSample* chosen = nullptr;
  for (const PairSample& p : dataset.pairs()) {
    if (p.object_id != object_id) continue;
    if (p.interactive) {
      chosen = &p;
      break;
    }
    if (chosen == nullptr) chosen = &p;
  }
  if (chosen == nullptr) throw ContractError(fmt::format("object {} is in no pair", object_id));
  const Real human_area = dataset.instance(chosen->human_id).box.area();
  const Real object_area = dataset.instance(object_id).box.area();
  if (!(human_area > 0) || !(object_area > 0)) {
    throw ContractError(fmt::format("object {} or its paired human has an empty box", object_id));
  }
  return object_area / human_area;
}

namespace {

template <class Key>
std::vector<std::int64_t> take_closest(std::vector<std::pair<Key, std::int64_t>> scored, std::size_t m) {
  std::sort(scored.begin(), scored.end());
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < scored.size() && i < m; ++i) out.push_back(scored[i].second);
  return out;
}

bool overlaps(const std::vector<std::pair<int, int>>& a, const std::vector<std::pair<int, int>>& b) {
  // Both sorted.
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    if (a[i] < b[j]) ++i; else ++j;
  }
  return false;
}

bool comparable(const Pose& a, const Pose& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].valid && b[k].valid) return true;
  }
  return false;
}

}  // namespace

CandidateTable build_candidates(const Dataset& dataset, std::size_t m, const PoseConvention& convention) {
  std::set<std::int64_t> human_ids, object_ids;
  for (const PairSample& p : dataset.pairs()) {
    if (!p.interactive) continue;
    human_ids.insert(p.human_id);
    object_ids.insert(p.object_id);
  }

  struct HumanInfo {
    std::int64_t id;
    std::vector<std::pair<int, int>> hois;
    std::optional<Pose> aligned;
  };
  std::vector<HumanInfo> humans;
  for (std::int64_t id : human_ids) {
    const Instance& inst = dataset.instance(id);
    HumanInfo h{id, human_hois(dataset, id), std::nullopt};
    if (can_align(inst.pose, convention)) h.aligned = align_pose(inst.pose, convention);
    humans.push_back(std::move(h));
  }

  CandidateTable table;
  for (const HumanInfo& q : humans) {
    std::vector<std::pair<Real, std::int64_t>> scored;
    if (q.aligned) {
      for (const HumanInfo& c : humans) {
        if (c.id == q.id || !c.aligned || !overlaps(q.hois, c.hois) || !comparable(*q.aligned, *c.aligned)) continue;
        scored.emplace_back(pose_similarity(*q.aligned, *c.aligned), c.id);
      }
    }
    table.set_human(q.id, take_closest(std::move(scored), m));
  }

  struct ObjectInfo {
    std::int64_t id;
    int category;
    Real log_ratio;
  };
  std::vector<ObjectInfo> objects;
  for (std::int64_t id : object_ids) {
    objects.push_back({id, dataset.instance(id).category, std::log(object_area_ratio(dataset, id))});
  }
  for (const ObjectInfo& q : objects) {
    std::vector<std::pair<Real, std::int64_t>> scored;
    for (const ObjectInfo& c : objects) {
      if (c.id == q.id || c.category != q.category) continue;
      scored.emplace_back(std::abs(q.log_ratio - c.log_ratio), c.id);
    }
    table.set_object(q.id, take_closest(std::move(scored), m));
  }
  return table;
}

void check_candidates(const CandidateTable& table, const Dataset& dataset) {
  for (const auto& [id, cands] : table.humans()) {
    if (!dataset.has_instance(id)) throw ContractError(fmt::format("candidate table: unknown human {}", id));
    const auto hois = human_hois(dataset, id);
    for (std::int64_t c : cands) {
      if (c == id) throw ContractError(fmt::format("candidate table: human {} lists itself", id));
      if (!dataset.has_instance(c) || dataset.instance(c).kind != InstanceKind::human) {
        throw ContractError(fmt::format("candidate table: human {} lists non-human {}", id, c));
      }
      if (!overlaps(hois, human_hois(dataset, c))) {
        throw ContractError(fmt::format("candidate table: humans {} and {} share no HOI", id, c));
      }
    }
  }
  for (const auto& [id, cands] : table.objects()) {
    if (!dataset.has_instance(id)) throw ContractError(fmt::format("candidate table: unknown object {}", id));
    const int cat = dataset.instance(id).category;
    for (std::int64_t c : cands) {
      if (c == id) throw ContractError(fmt::format("candidate table: object {} lists itself", id));
      if (!dataset.has_instance(c) || dataset.instance(c).kind != InstanceKind::object ||
          dataset.instance(c).category != cat) {
        throw ContractError(fmt::format("candidate table: objects {} and {} differ in category", id, c));
      }
    }
  }
}

PairView exchange_sample(const PairView& view, const CandidateTable& table, Rng& rng) {
  PairView out = view;
  const auto& hc = table.human_candidates(view.human_id);
  const auto hk = rng.index(hc.size() + 1);
  if (hk > 0) out.human_id = hc[hk - 1];
  const auto& oc = table.object_candidates(view.object_id);
  const auto ok = rng.index(oc.size() + 1);
  if (ok > 0) out.object_id = oc[ok - 1];
  return out;
}

}  // namespace idn
