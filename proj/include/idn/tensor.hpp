#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace idn {

using Real = double;

// Error hierarchy. Every failure the library reports is one of these.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct PathError : Error {
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

// Dense row-major tensor of Reals. Rank 1 and rank 2 are the only ranks the
// engine operates on; higher ranks are storable (checkpoints) but not computed.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, Real value);
  // 1 x n matrix.
  static Tensor row(std::vector<Real> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<Real> values);
  static Tensor vector(std::vector<Real> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Leading dimension for rank 2, 1 for rank 1.
  std::size_t rows() const {
    if (shape_.empty()) return 0;
    return shape_.size() == 1 ? 1 : shape_.front();
  }
  // Trailing dimension.
  std::size_t cols() const { return shape_.empty() ? 0 : shape_.back(); }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }
  Real& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  Real at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  std::span<const Real> row_span(std::size_t r) const;
  std::span<Real> row_span(std::size_t r);
  const std::vector<Real>& values() const { return data_; }

  bool all_finite() const;
  void fill(Real value);

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

std::size_t shape_product(const Shape& shape);

// Euclidean norm of a - b; the spans must have equal length.
Real l2_distance(std::span<const Real> a, std::span<const Real> b);

// Column concatenation of row-aligned matrices (rank 1 inputs are 1 x n).
Tensor concat_columns(std::initializer_list<const Tensor*> parts);

}  // namespace idn
