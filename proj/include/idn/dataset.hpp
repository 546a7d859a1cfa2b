#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "idn/tensor.hpp"

namespace idn {

struct Box {
  Real x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  Real width() const { return x2 - x1; }
  Real height() const { return y2 - y1; }
  Real area() const { return width() * height(); }
  bool valid() const { return x1 < x2 && y1 < y2 && x1 >= 0 && y1 >= 0; }

  friend bool operator==(const Box&, const Box&) = default;
};

// Tight hull of two boxes.
Box union_box(const Box& a, const Box& b);

// Corner coordinates divided by the image size, after clipping to the image.
std::array<Real, 4> normalize_box(const Box& box, Real image_w, Real image_h);

enum class InstanceKind { human, object };

struct Keypoint {
  Real x = 0, y = 0;
  bool valid = true;

  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

inline constexpr int kHumanCategory = -1;

struct Instance {
  std::int64_t id = 0;
  InstanceKind kind = InstanceKind::human;
  // Object class index; humans carry kHumanCategory.
  int category = kHumanCategory;
  Real confidence = 1;
  Box box;
  Real image_w = 1, image_h = 1;
  // Humans only; empty when no pose is available. Written to the manifest as
  // x y pairs, with "-1 -1" marking an invalid keypoint.
  std::vector<Keypoint> pose;
  // Appearance feature f^a_h or f^a_o, rank 1.
  Tensor appearance;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct PairSample {
  std::int64_t human_id = 0;
  std::int64_t object_id = 0;
  // Union appearance feature f^a_u, rank 1.
  Tensor union_appearance;
  // Multi-hot verb labels, length n_verbs.
  std::vector<std::uint8_t> labels;
  bool interactive = false;

  std::vector<int> verbs() const;
  bool has_verb(int v) const { return labels.at(static_cast<std::size_t>(v)) != 0; }

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

PairSample make_pair(std::int64_t human_id, std::int64_t object_id, Tensor union_appearance,
                     const std::vector<int>& verbs, int n_verbs);

// Widths of the appearance features f^a_u, f^a_h, f^a_o.
struct FeatureDims {
  std::size_t union_width = 0;
  std::size_t human_width = 0;
  std::size_t object_width = 0;

  friend bool operator==(const FeatureDims&, const FeatureDims&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(int n_verbs, FeatureDims dims);

  int n_verbs() const { return n_verbs_; }
  const FeatureDims& dims() const { return dims_; }

  void add_instance(Instance instance);
  void add_pair(PairSample pair);

  const std::vector<Instance>& instances() const { return instances_; }
  const std::vector<PairSample>& pairs() const { return pairs_; }
  const Instance& instance(std::int64_t id) const;
  bool has_instance(std::int64_t id) const { return index_.contains(id); }

  // Indices of interactive / non-interactive pairs.
  std::vector<std::size_t> positive_indices() const;
  std::vector<std::size_t> negative_indices() const;

  // Checks every invariant: label consistency, widths, kinds, referenced ids.
  void validate() const;

  friend bool operator==(const Dataset& a, const Dataset& b) {
    return a.n_verbs_ == b.n_verbs_ && a.dims_ == b.dims_ && a.instances_ == b.instances_ && a.pairs_ == b.pairs_;
  }

 private:
  int n_verbs_ = 0;
  FeatureDims dims_;
  std::vector<Instance> instances_;
  std::vector<PairSample> pairs_;
  std::unordered_map<std::int64_t, std::size_t> index_;
};

// Manifest + blob I/O. The blob lives next to the manifest with the extension
// replaced by ".blob"; offsets in the manifest are byte offsets into it.
std::filesystem::path blob_path_for(const std::filesystem::path& manifest);
void save_dataset(const Dataset& dataset, const std::filesystem::path& manifest);
Dataset load_dataset(const std::filesystem::path& manifest);

// In-memory forms used by the file functions.
struct EncodedDataset {
  std::string manifest;
  std::vector<unsigned char> blob;
};
EncodedDataset encode_dataset(const Dataset& dataset);
Dataset decode_dataset(const std::string& manifest, std::span<const unsigned char> blob,
                       const std::string& source = "<memory>");

// Rounds every value to the nearest 32-bit float, the on-disk precision.
Real round_to_float(Real v);
Tensor round_to_float(const Tensor& t);

}  // namespace idn
