#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "amdnet/errors.hpp"

namespace amdnet {

/// Dense row-major tensor. Rank 1 and 2 are what the library uses; on the
/// gradient tape everything is a matrix (vectors travel as 1xN rows).
template <typename T>
class Tensor {
  static_assert(std::is_floating_point_v<T>, "Tensor requires a float type");

 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), T(0)) {}

  Tensor(std::size_t rows, std::size_t cols)
      : shape_{rows, cols}, data_(rows * cols, T(0)) {}

  static Tensor vec(std::initializer_list<T> v) {
    Tensor t(std::vector<std::size_t>{v.size()});
    std::size_t i = 0;
    for (T x : v) t.data_[i++] = x;
    return t;
  }

  static Tensor row(std::initializer_list<T> v) {
    Tensor t(1, v.size());
    std::size_t i = 0;
    for (T x : v) t.data_[i++] = x;
    return t;
  }

  static Tensor from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Tensor t(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
      if (row.size() != c) throw input_error("from_rows: ragged row lengths");
      for (T x : row) t.data_[i++] = x;
    }
    return t;
  }

  static Tensor full(std::size_t rows, std::size_t cols, T value) {
    Tensor t(rows, cols);
    t.fill(value);
    return t;
  }

  static Tensor identity(std::size_t n) {
    Tensor t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = T(1);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return rank() == 2 ? shape_[0] : (rank() == 1 ? 1 : 0); }
  std::size_t cols() const { return rank() == 2 ? shape_[1] : (rank() == 1 ? shape_[0] : 0); }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
    return out;
  }

  /// Same buffer viewed as a rows x cols matrix.
  Tensor reshaped(std::size_t rows, std::size_t cols) const {
    if (rows * cols != size()) throw input_error("reshape: element count mismatch");
    Tensor out = *this;
    out.shape_ = {rows, cols};
    return out;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ']';
    return os.str();
  }

  bool operator==(const Tensor& o) const { return shape_ == o.shape_ && data_ == o.data_; }

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return s.empty() ? 0 : n;
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;

  template <typename U>
  friend class Tensor;
};

template <typename T>
void require_matrix(const Tensor<T>& t, const char* who) {
  if (t.rank() != 2) throw input_error(std::string(who) + ": expected a matrix, got shape " + t.shape_str());
}

}  // namespace amdnet
