#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "idn/tensor.hpp"

namespace idn {

class Rng;

// Gradients keyed by parameter name. Produced by Graph::backward with one
// entry per parameter of the bound ParamSet.
using Gradients = std::map<std::string, Tensor>;

// Named trainable parameters with their momentum buffers. Iteration order is
// the lexicographic order of names, which makes every pass over the set
// deterministic.
class ParamSet {
 public:
  void add(const std::string& name, Tensor value);
  // Replaces the value of an existing parameter; shapes must agree.
  void assign(const std::string& name, const Tensor& value);
  void erase_prefix(std::string_view prefix);

  bool contains(const std::string& name) const { return values_.contains(name); }
  const Tensor& at(const std::string& name) const;
  Tensor& mutable_at(const std::string& name);
  const Tensor& velocity(const std::string& name) const;

  std::vector<std::string> names() const;
  std::vector<std::string> names_with_prefix(std::string_view prefix) const;
  std::size_t size() const { return values_.size(); }
  std::size_t scalar_count() const;

  const std::map<std::string, Tensor>& values() const { return values_; }

  // Copies the named subset (and only values; velocities restart at zero).
  ParamSet subset(std::string_view prefix) const;
  // Overwrites or adds every parameter of `other`.
  void merge(const ParamSet& other);

  void reset_velocity();

  friend void sgd_step(ParamSet& params, const Gradients& grads, Real lr, Real momentum);

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> velocity_;
};

// Classic momentum: v <- momentum * v + g; p <- p - lr * v.
// Parameters without an entry in `grads` are treated as having zero gradient.
void sgd_step(ParamSet& params, const Gradients& grads, Real lr, Real momentum);

Gradients zero_gradients(const ParamSet& params);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng);

// Checkpoint format: "IDNCKPT1", u32 count, then per parameter
// u32 name length, name bytes, u32 rank, u32 dims, float32 payload.
// All integers and floats little-endian.
void save_checkpoint(const ParamSet& params, const std::filesystem::path& path);
ParamSet load_checkpoint(const std::filesystem::path& path);
std::vector<unsigned char> encode_checkpoint(const ParamSet& params);
ParamSet decode_checkpoint(std::span<const unsigned char> bytes, const std::string& source = "<memory>");

}  // namespace idn
