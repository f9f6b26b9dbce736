#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "dgstgcn/error.hpp"

namespace dgstgcn {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index shape_size(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string shape_string(const Shape &shape);

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using MatrixMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Scalar>>;

/// Dense row-major array of rank N. Rank 0 holds a single scalar.
template <typename Scalar>
class Tensor {
public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(Vector::Zero(shape_size(shape_))) {}
  Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)), data_(Vector::Constant(shape_size(shape_), fill)) {}
  Tensor(Shape shape, std::initializer_list<Scalar> values) : Tensor(std::move(shape)) {
    if (static_cast<Index>(values.size()) != data_.size())
      throw DimensionError("initializer of " + std::to_string(values.size()) + " values for shape " +
                           shape_string(shape_));
    std::copy(values.begin(), values.end(), data_.data());
  }
  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_))
      throw DimensionError("data length " + std::to_string(data_.size()) + " does not match shape " +
                           shape_string(shape_));
  }

  static Tensor scalar(Scalar v) { return Tensor(Shape{}, Vector::Constant(1, v)); }
  /// Storage left uninitialized; for outputs that are fully overwritten.
  static Tensor uninitialized(Shape shape) {
    const Index n = shape_size(shape);
    return Tensor(std::move(shape), Vector(n));
  }

  const Shape &shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_.at(static_cast<std::size_t>(axis < 0 ? axis + rank() : axis)); }
  Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return shape_.empty() && data_.size() == 0; }

  Vector &data() noexcept { return data_; }
  const Vector &data() const noexcept { return data_; }
  Scalar *ptr() noexcept { return data_.data(); }
  const Scalar *ptr() const noexcept { return data_.data(); }

  Scalar &operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  template <typename... I>
  Scalar &operator()(I... idx) {
    return data_[offset({static_cast<Index>(idx)...})];
  }
  template <typename... I>
  Scalar operator()(I... idx) const {
    return data_[offset({static_cast<Index>(idx)...})];
  }

  Index offset(std::initializer_list<Index> idx) const {
    Index off = 0;
    std::size_t a = 0;
    for (Index i : idx) off = off * shape_[a++] + i;
    return off;
  }

  /// View the data as a rows x cols row-major matrix (rows*cols must equal size()).
  MatrixMap<Scalar> matrix(Index rows, Index cols) { return MatrixMap<Scalar>(data_.data(), rows, cols); }
  ConstMatrixMap<Scalar> matrix(Index rows, Index cols) const {
    return ConstMatrixMap<Scalar>(data_.data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const {
    if (shape_size(shape) != size())
      throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
  }

  void set_zero() { data_.setZero(); }
  bool all_finite() const { return data_.allFinite(); }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  friend bool operator==(const Tensor &a, const Tensor &b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

private:
  Shape shape_;
  Vector data_;
};

/// Largest absolute elementwise difference; throws on shape mismatch.
template <typename Scalar>
double max_abs_diff(const Tensor<Scalar> &a, const Tensor<Scalar> &b) {
  if (a.shape() != b.shape())
    throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  if (a.size() == 0) return 0.0;
  return static_cast<double>((a.data() - b.data()).cwiseAbs().maxCoeff());
}

/// Decompose a shape around `axis` into (outer, extent, inner) so that element
/// (o, i, r) lives at o*extent*inner + i*inner + r.
struct AxisSplit {
  Index outer;
  Index extent;
  Index inner;
};
AxisSplit split_at_axis(const Shape &shape, Index axis);

} // namespace dgstgcn
