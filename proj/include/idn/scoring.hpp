#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "idn/transforms.hpp"

namespace idn {

// Per-pair verb probabilities, all [B x n]. Components that the module toggles
// switch off are left empty and drop out of P_v.
struct PairScores {
  Tensor d_u, d_ho;
  Tensor p_u;   // exp(-d_u)
  Tensor p_ho;  // exp(-d_ho)
  Tensor p_ae;  // sigmoid(S^AE)
  Tensor p_v;   // mean of the present components
  Tensor interactiveness;  // [B x 1], sigmoid of the head on f_u
};

// P_v = alpha * (sum of present components), alpha = 1 / count.
Tensor combine_scores(const Tensor* p_u, const Tensor* p_ho, const Tensor* p_ae);

// Scores the given pairs in chunks. Rows are independent, so the result does
// not depend on the thread count.
PairScores score_pairs(const IdnModel& model, const Dataset& dataset, std::span<const std::size_t> pair_indices,
                       const ModuleToggles& modules = {}, std::size_t threads = 1);
PairScores score_views(const IdnModel& model, const Dataset& dataset, std::span<const PairView> views,
                       const ModuleToggles& modules = {});

// Worker count from IDN_THREADS, capped by the hardware; 1 when unset or invalid.
std::size_t worker_threads();

struct LisParams {
  Real T = 8.3;
  Real k = 12.0;
  Real omega = 10.0;
};

// T / (1 + exp(k - omega * s)).
Real lis(Real s, const LisParams& params = {});

struct Composition {
  int verb = 0;
  int category = 0;
  std::string split;  // e.g. "rare" / "non-rare"

  friend bool operator==(const Composition&, const Composition&) = default;
};

class HoiCatalog {
 public:
  HoiCatalog() = default;
  HoiCatalog(int n_verbs, std::vector<Composition> compositions);

  // Every (verb, category) pair; a composition is "rare" when it has fewer
  // than rare_threshold training pairs, "non-rare" otherwise.
  static HoiCatalog from_training(const Dataset& train, int categories, std::size_t rare_threshold = 10);

  int n_verbs() const { return n_verbs_; }
  const std::vector<Composition>& compositions() const { return compositions_; }
  std::size_t size() const { return compositions_.size(); }
  std::optional<std::size_t> find(int verb, int category) const;
  std::vector<std::size_t> for_category(int category) const;
  std::vector<std::string> splits() const;

 private:
  int n_verbs_ = 0;
  std::vector<Composition> compositions_;
};

struct DetectionRecord {
  std::int64_t image = 0;
  std::size_t pair_index = 0;
  Box human;
  Box object;
  int category = 0;
  Real p_o = 0;
  std::vector<Real> p_v;
  // (composition index, P_HOI) for every catalog composition of the category.
  std::vector<std::pair<std::size_t, Real>> p_hoi;
  Real interactiveness = 0;
};

// P_o = lis(human confidence) * lis(object confidence).
Real object_term(Real human_confidence, Real object_confidence, const LisParams& params = {});

// P_HOI = P_v[verb] * P_o for each composition of the record's category.
std::vector<std::pair<std::size_t, Real>> compose_hoi(const DetectionRecord& record, const HoiCatalog& catalog);

// Keeps records whose interactiveness is at least the threshold, in order.
std::vector<DetectionRecord> nis_filter(std::span<const DetectionRecord> records, Real threshold);

struct DetectOptions {
  ModuleToggles modules;
  LisParams lis;
  Real nis_threshold = 0.1;
  bool use_nis = true;
};

// One record per pair of the dataset, image id = pair index.
std::vector<DetectionRecord> detect(const IdnModel& model, const Dataset& dataset, const HoiCatalog& catalog,
                                    const DetectOptions& options = {}, std::size_t threads = 1);

// "D <img-id> <hbox x4> <obox x4> <obj-cat> <comp-id> <score>" per composition.
std::string format_detections(std::span<const DetectionRecord> records);
void write_detections(std::span<const DetectionRecord> records, const std::filesystem::path& path);

}  // namespace idn
