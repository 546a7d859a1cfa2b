#include "idn/tensor.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace idn {

std::string shape_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, "x")); }

std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  data_.assign(shape_product(shape_), Real{0});
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_string(shape_));
  }
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError(fmt::format("shape {} holds {} values, got {}", shape_string(shape_),
                                     shape_product(shape_), data_.size()));
  }
}

Tensor Tensor::filled(Shape shape, Real value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::row(std::vector<Real> values) {
  const auto n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<Real> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::vector(std::vector<Real> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

std::span<const Real> Tensor::row_span(std::size_t r) const {
  return std::span<const Real>(data_).subspan(r * cols(), cols());
}

std::span<Real> Tensor::row_span(std::size_t r) { return std::span<Real>(data_).subspan(r * cols(), cols()); }

bool Tensor::all_finite() const {
  for (Real v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(Real value) { std::fill(data_.begin(), data_.end(), value); }

Real l2_distance(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) {
    throw DimensionError(fmt::format("distance between widths {} and {}", a.size(), b.size()));
  }
  Real sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Real d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

Tensor concat_columns(std::initializer_list<const Tensor*> parts) {
  std::size_t rows = 0;
  std::size_t cols = 0;
  for (const Tensor* p : parts) {
    if (rows == 0) rows = p->rows();
    if (p->rows() != rows) {
      throw DimensionError(fmt::format("concat of {} rows with {} rows", rows, p->rows()));
    }
    cols += p->cols();
  }
  Tensor out({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t offset = 0;
    for (const Tensor* p : parts) {
      auto src = p->row_span(r);
      std::copy(src.begin(), src.end(), out.row_span(r).begin() + static_cast<std::ptrdiff_t>(offset));
      offset += src.size();
    }
  }
  return out;
}

}  // namespace idn
