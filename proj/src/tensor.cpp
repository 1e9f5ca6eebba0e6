#include "eitnet/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace eitnet {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void Tensor::validate(const Shape& shape) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw ShapeError("tensor rank must be in [1, 5], got " + std::to_string(shape.size()));
  }
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive: " + to_string(shape));
  }
}

Tensor::Tensor(Shape shape, Scalar fill) : shape_(std::move(shape)) {
  validate(shape_);
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Scalar> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  validate(shape_);
  if (data_.size() != element_count(shape_)) {
    throw ShapeError("data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape_));
  }
}

Tensor Tensor::from_vector(const Vector& v) {
  return Tensor({static_cast<std::size_t>(v.size())},
                std::vector<Scalar>(v.data(), v.data() + v.size()));
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  return Tensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                std::vector<Scalar>(m.data(), m.data() + m.size()));
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + to_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  if (idx.size() != shape_.size()) {
    throw ShapeError("index arity " + std::to_string(idx.size()) + " for tensor " +
                     to_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : idx) {
    if (i >= shape_[axis]) throw std::out_of_range("tensor index out of range");
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Tensor Tensor::reshaped(Shape shape) const {
  return Tensor(std::move(shape), data_);
}

ConstMatrixMap Tensor::matrix() const {
  if (shape_.empty()) throw ShapeError("matrix view of empty tensor");
  const auto cols = static_cast<Eigen::Index>(shape_.back());
  return {data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

MatrixMap Tensor::matrix() {
  if (shape_.empty()) throw ShapeError("matrix view of empty tensor");
  const auto cols = static_cast<Eigen::Index>(shape_.back());
  return {data_.data(), static_cast<Eigen::Index>(data_.size()) / cols, cols};
}

ConstVectorMap Tensor::vector() const {
  return {data_.data(), static_cast<Eigen::Index>(data_.size())};
}

Tensor Tensor::slice(std::size_t index) const {
  if (shape_.size() < 2) throw ShapeError("slice needs rank >= 2, got " + to_string(shape_));
  if (index >= shape_[0]) throw std::out_of_range("slice index out of range");
  Shape sub(shape_.begin() + 1, shape_.end());
  const std::size_t n = element_count(sub);
  return Tensor(std::move(sub), std::vector<Scalar>(data_.begin() + index * n,
                                                    data_.begin() + (index + 1) * n));
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](Scalar v) { return std::isfinite(v); });
}

Scalar max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("max_abs_diff: " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  Scalar m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

namespace {

constexpr char kMagic[4] = {'E', 'I', 'T', 'T'};

template <typename T>
void put_le(std::ostream& os, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  auto bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  os.write(buf, sizeof(U));
}

template <typename T>
T get_le(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  unsigned char buf[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(U))) {
    throw std::runtime_error("tensor stream truncated");
  }
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_tensor(std::ostream& os, const Tensor& t) {
  if (t.rank() == 0) throw ShapeError("cannot serialize an empty tensor");
  os.write(kMagic, 4);
  os.put(static_cast<char>(t.rank()));
  for (auto e : t.shape()) put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e));
  for (auto v : t.data()) put_le<double>(os, v);
}

Tensor read_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) {
    throw std::runtime_error("not an EITT tensor stream");
  }
  const int rank = is.get();
  if (rank <= 0 || rank > static_cast<int>(Tensor::kMaxRank)) {
    throw std::runtime_error("invalid tensor rank in stream");
  }
  Shape shape(static_cast<std::size_t>(rank));
  for (auto& e : shape) e = get_le<std::uint32_t>(is);
  for (auto e : shape) {
    if (e == 0) throw std::runtime_error("zero extent in tensor stream");
  }
  std::vector<Scalar> data(element_count(shape));
  for (auto& v : data) v = get_le<double>(is);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::string& path, const Tensor& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  write_tensor(os, t);
}

Tensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return read_tensor(is);
}

}  // namespace eitnet
