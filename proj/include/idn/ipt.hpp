#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "idn/dataset.hpp"
#include "idn/model.hpp"
#include "idn/rng.hpp"

namespace idn {

// Keypoint layout. The joint count and which joints serve as pelvis and head
// depend on the pose estimator, so they are dataset configuration.
struct PoseConvention {
  std::size_t joints = 6;
  std::size_t pelvis = 0;
  std::size_t head = 1;
};

using Pose = std::vector<Keypoint>;

// Pelvis moved to the origin, head-pelvis distance scaled to 1. Invalid joints
// pass through untouched. Throws ContractError when pelvis or head is invalid
// or the two coincide.
Pose align_pose(const Pose& pose, const PoseConvention& convention = {});
bool can_align(const Pose& pose, const PoseConvention& convention = {});

// Sum of Euclidean distances over joints valid in both poses; lower is more
// similar. Throws ContractError when no joint is valid in both.
Real pose_similarity(const Pose& a, const Pose& b);

class CandidateTable {
 public:
  const std::vector<std::int64_t>& human_candidates(std::int64_t id) const;
  const std::vector<std::int64_t>& object_candidates(std::int64_t id) const;

  void set_human(std::int64_t id, std::vector<std::int64_t> candidates) { humans_[id] = std::move(candidates); }
  void set_object(std::int64_t id, std::vector<std::int64_t> candidates) { objects_[id] = std::move(candidates); }

  const std::map<std::int64_t, std::vector<std::int64_t>>& humans() const { return humans_; }
  const std::map<std::int64_t, std::vector<std::int64_t>>& objects() const { return objects_; }

  // One line per query: "C <human|object> <query-id> <id1,...,idm>", "-" for an empty list.
  std::string serialize() const;
  static CandidateTable parse(const std::string& text, const std::string& source = "<memory>");

  friend bool operator==(const CandidateTable&, const CandidateTable&) = default;

 private:
  std::map<std::int64_t, std::vector<std::int64_t>> humans_;
  std::map<std::int64_t, std::vector<std::int64_t>> objects_;
};

// (verb, object category) compositions a human takes part in.
std::vector<std::pair<int, int>> human_hois(const Dataset& dataset, std::int64_t human_id);

// Object box area over the paired human box area, taken from the object's
// first interactive pair (first pair of any kind when it has none).
Real object_area_ratio(const Dataset& dataset, std::int64_t object_id);

// Candidates for every instance that appears in an interactive pair.
// Humans: the m closest aligned poses among humans sharing at least one HOI.
// Objects: the m same-category objects with the closest log area ratio.
// Ties break on instance id.
CandidateTable build_candidates(const Dataset& dataset, std::size_t m = 5, const PoseConvention& convention = {});

// Throws ContractError naming the first entry that breaks the table invariants
// (self-reference, missing HOI overlap, category mismatch, unknown ids).
void check_candidates(const CandidateTable& table, const Dataset& dataset);

// Draws the human from {original} ∪ candidates and, independently, the object.
// The pair's labels and union feature are untouched.
PairView exchange_sample(const PairView& view, const CandidateTable& table, Rng& rng);

}  // namespace idn
