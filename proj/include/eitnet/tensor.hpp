#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace eitnet {

using Scalar = double;

using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ConstVectorMap = Eigen::Map<const Vector>;

/// Raised when tensor extents disagree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for numeric arguments outside their valid domain.
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major tensor of doubles with 1 to 5 axes.
///
/// The element count always equals the product of the extents and every
/// extent is positive. A default-constructed tensor is the empty tensor of
/// rank 0 and is only useful as a placeholder.
class Tensor {
 public:
  static constexpr std::size_t kMaxRank = 5;

  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = 0.0);
  Tensor(Shape shape, std::vector<Scalar> data);

  static Tensor from_vector(const Vector& v);
  static Tensor from_matrix(const RowMatrix& m);

  std::size_t rank() const { return shape_.size(); }
  const Shape& shape() const { return shape_; }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<const Scalar> data() const { return data_; }
  std::span<Scalar> data() { return data_; }
  const std::vector<Scalar>& values() const { return data_; }

  Scalar operator[](std::size_t i) const { return data_[i]; }
  Scalar& operator[](std::size_t i) { return data_[i]; }

  template <typename... Idx>
  Scalar at(Idx... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... Idx>
  Scalar& at(Idx... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Same data, new extents. Throws ShapeError if the counts differ.
  Tensor reshaped(Shape shape) const;

  /// Row-major 2-D view: leading axes collapse into rows, last axis is columns.
  ConstMatrixMap matrix() const;
  MatrixMap matrix();
  ConstVectorMap vector() const;

  /// Slice along axis 0.
  Tensor slice(std::size_t index) const;

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;
  static void validate(const Shape& shape);

  Shape shape_;
  std::vector<Scalar> data_;
};

bool all_finite(const Tensor& t);
Scalar max_abs_diff(const Tensor& a, const Tensor& b);

// Binary layout: magic "EITT", u8 rank, rank x u32 LE extents, f64 LE payload.
void write_tensor(std::ostream& os, const Tensor& t);
Tensor read_tensor(std::istream& is);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

}  // namespace eitnet
