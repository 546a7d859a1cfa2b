#include "idn/params.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "idn/rng.hpp"

namespace idn {

void ParamSet::add(const std::string& name, Tensor value) {
  if (values_.contains(name)) throw ContractError("duplicate parameter '" + name + "'");
  velocity_.insert_or_assign(name, Tensor::zeros(value.shape()));
  values_.insert_or_assign(name, std::move(value));
}

void ParamSet::assign(const std::string& name, const Tensor& value) {
  Tensor& current = mutable_at(name);
  if (current.shape() != value.shape()) {
    throw DimensionError(fmt::format("parameter '{}' has shape {}, got {}", name, shape_string(current.shape()),
                                     shape_string(value.shape())));
  }
  current = value;
}

void ParamSet::erase_prefix(std::string_view prefix) {
  for (const auto& name : names_with_prefix(prefix)) {
    values_.erase(name);
    velocity_.erase(name);
  }
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParamSet::mutable_at(const std::string& name) {
  auto it = values_.find(name);
  if (it == values_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const Tensor& ParamSet::velocity(const std::string& name) const {
  auto it = velocity_.find(name);
  if (it == velocity_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(values_.size());
  for (const auto& [name, _] : values_) out.push_back(name);
  return out;
}

std::vector<std::string> ParamSet::names_with_prefix(std::string_view prefix) const {
  std::vector<std::string> out;
  for (const auto& [name, _] : values_) {
    if (std::string_view(name).starts_with(prefix)) out.push_back(name);
  }
  return out;
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : values_) n += t.size();
  return n;
}

ParamSet ParamSet::subset(std::string_view prefix) const {
  ParamSet out;
  for (const auto& name : names_with_prefix(prefix)) out.add(name, values_.at(name));
  return out;
}

void ParamSet::merge(const ParamSet& other) {
  for (const auto& [name, value] : other.values_) {
    if (contains(name)) {
      assign(name, value);
    } else {
      add(name, value);
    }
  }
}

void ParamSet::reset_velocity() {
  for (auto& [_, v] : velocity_) v.fill(0);
}

void sgd_step(ParamSet& params, const Gradients& grads, Real lr, Real momentum) {
  if (!(lr >= 0)) throw ContractError(fmt::format("learning rate must be non-negative, got {}", lr));
  if (!(momentum >= 0 && momentum < 1)) throw ContractError(fmt::format("momentum must lie in [0, 1), got {}", momentum));
  for (const auto& [name, _] : grads) {
    if (!params.contains(name)) throw ContractError("gradient for unknown parameter '" + name + "'");
  }
  for (auto& [name, value] : params.values_) {
    Tensor& velocity = params.velocity_.at(name);
    auto g = grads.find(name);
    if (g != grads.end() && g->second.shape() != value.shape()) {
      throw DimensionError(fmt::format("gradient for '{}' has shape {}, parameter has {}", name,
                                       shape_string(g->second.shape()), shape_string(value.shape())));
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      const Real grad = g == grads.end() ? Real{0} : g->second[i];
      velocity[i] = momentum * velocity[i] + grad;
      value[i] -= lr * velocity[i];
    }
  }
}

Gradients zero_gradients(const ParamSet& params) {
  Gradients out;
  for (const auto& [name, value] : params.values()) out.emplace(name, Tensor::zeros(value.shape()));
  return out;
}

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const Real bound = 1.0 / std::sqrt(static_cast<Real>(fan_in));
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

namespace {

constexpr char kMagic[8] = {'I', 'D', 'N', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(std::span<const unsigned char> bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw FormatError(fmt::format("{}: truncated checkpoint while reading {} at byte {}", source_, what, pos_));
    }
  }
  std::span<const unsigned char> bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const ParamSet& params) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, value] : params.values()) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, static_cast<std::uint32_t>(value.rank()));
    for (auto d : value.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (Real v : value.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

ParamSet decode_checkpoint(std::span<const unsigned char> bytes, const std::string& source) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(source + ": missing IDNCKPT1 magic");
  }
  Reader in(bytes.subspan(sizeof(kMagic)), source);
  const auto count = in.u32("parameter count");
  ParamSet params;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto name = in.str(in.u32("name length"), "name");
    const auto rank = in.u32("rank");
    if (rank == 0 || rank > 8) throw FormatError(fmt::format("{}: parameter '{}' has rank {}", source, name, rank));
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(in.u32("dimension"));
    Tensor t(shape);
    for (auto& v : t.data()) v = static_cast<Real>(in.f32("payload"));
    params.add(name, std::move(t));
  }
  if (!in.done()) throw FormatError(source + ": trailing bytes after last parameter");
  return params;
}

void save_checkpoint(const ParamSet& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PathError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw PathError("failed writing checkpoint " + path.string());
}

ParamSet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot open checkpoint " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path.string());
}

}  // namespace idn
