#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "emoclim/error.hpp"

namespace emoclim {

// Dense row-major matrix. Parameters and features are stored as float;
// the double instantiation backs finite-difference gradient checks.
template <typename T>
class Tensor2 {
 public:
  using value_type = T;

  Tensor2() = default;

  Tensor2(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  Tensor2(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw ConfigError("tensor data length " + std::to_string(data_.size()) +
                        " does not match shape " + std::to_string(rows_) + "x" +
                        std::to_string(cols_));
    }
  }

  static Tensor2 from_rows(std::initializer_list<std::initializer_list<T>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<T> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw ConfigError("ragged row in Tensor2::from_rows");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor2(r, c, std::move(data));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  template <typename U>
  Tensor2<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor2<U>(rows_, cols_, std::move(out));
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  bool operator==(const Tensor2&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <typename T>
std::string shape_string(const Tensor2<T>& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

// a (n x k) times b^T, b being (m x k); the natural layout for y = x W^T.
template <typename T>
Tensor2<T> matmul_nt(const Tensor2<T>& a, const Tensor2<T>& b) {
  if (a.cols() != b.cols()) {
    throw ConfigError("matmul_nt shape mismatch: " + shape_string(a) + " vs " + shape_string(b));
  }
  Tensor2<T> out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      T acc{0};
      for (std::size_t k = 0; k < ai.size(); ++k) acc += ai[k] * bj[k];
      out(i, j) = acc;
    }
  }
  return out;
}

// a (n x k) times b (k x m).
template <typename T>
Tensor2<T> matmul(const Tensor2<T>& a, const Tensor2<T>& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul shape mismatch: " + shape_string(a) + " vs " + shape_string(b));
  }
  Tensor2<T> out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto oi = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const T aik = a(i, k);
      const auto bk = b.row(k);
      for (std::size_t j = 0; j < bk.size(); ++j) oi[j] += aik * bk[j];
    }
  }
  return out;
}

// a^T b, with a (n x k) and b (n x m); accumulates into out (k x m).
template <typename T>
void accumulate_matmul_tn(const Tensor2<T>& a, const Tensor2<T>& b, Tensor2<T>& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols()) {
    throw ConfigError("matmul_tn shape mismatch: " + shape_string(a) + " vs " + shape_string(b));
  }
  for (std::size_t n = 0; n < a.rows(); ++n) {
    const auto an = a.row(n);
    const auto bn = b.row(n);
    for (std::size_t i = 0; i < an.size(); ++i) {
      auto oi = out.row(i);
      const T ani = an[i];
      for (std::size_t j = 0; j < bn.size(); ++j) oi[j] += ani * bn[j];
    }
  }
}

template <typename T>
Tensor2<T> gather_rows(const Tensor2<T>& src, std::span<const std::size_t> indices) {
  Tensor2<T> out(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto from = src.row(indices[i]);
    std::copy(from.begin(), from.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
double dot(std::span<const T> a, std::span<const T> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace emoclim
