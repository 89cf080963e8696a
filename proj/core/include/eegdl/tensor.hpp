#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "eegdl/error.hpp"

namespace eegdl {

/// Dense row-major n-dimensional array. Most of the network runs on rank-2
/// tensors (batch x features); rank-3 appears only at the model input.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> shape)
      : shape_(std::move(shape)), data_(count(shape_), T(0)) {}

  Tensor(std::vector<std::size_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (count(shape_) != data_.size())
      throw runtime_error("ShapeMismatch", "data length does not match shape");
  }

  static Tensor full(std::vector<std::size_t> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  static Tensor identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t(i, i) = T(1);
    return t;
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_.size(); }

  const std::vector<T>& data() const { return data_; }
  std::vector<T>& data() { return data_; }

  T& at(std::size_t i) { return data_[i]; }
  T at(std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << ")";
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(d));
  }

 private:
  static std::size_t count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t(1), std::multiplies<>());
  }

  std::vector<std::size_t> shape_;
  std::vector<T> data_;
};

namespace detail {
template <typename T>
using EigenRowMajor =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<EigenRowMajor<T>>;
template <typename T>
using MapCM = Eigen::Map<const EigenRowMajor<T>>;
}  // namespace detail

template <typename T>
void require_rank2(const Tensor<T>& a, const char* op) {
  if (a.rank() != 2)
    throw runtime_error("ShapeMismatch", std::string(op) + ": rank-2 tensor required, got " + a.shape_str());
}

/// C = A * B, standard matrix product.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0))
    throw runtime_error("ShapeMismatch",
                        "matmul inner dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> c({a.dim(0), b.dim(1)});
  detail::MapCM<T> ma(a.data().data(), static_cast<Eigen::Index>(a.dim(0)),
                      static_cast<Eigen::Index>(a.dim(1)));
  detail::MapCM<T> mb(b.data().data(), static_cast<Eigen::Index>(b.dim(0)),
                      static_cast<Eigen::Index>(b.dim(1)));
  detail::MapM<T> mc(c.data().data(), static_cast<Eigen::Index>(c.dim(0)),
                     static_cast<Eigen::Index>(c.dim(1)));
  mc.noalias() = ma * mb;
  return c;
}

/// C = A^T * B.
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul_tn");
  require_rank2(b, "matmul_tn");
  if (a.dim(0) != b.dim(0))
    throw runtime_error("ShapeMismatch",
                        "matmul_tn dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> c({a.dim(1), b.dim(1)});
  detail::MapCM<T> ma(a.data().data(), static_cast<Eigen::Index>(a.dim(0)),
                      static_cast<Eigen::Index>(a.dim(1)));
  detail::MapCM<T> mb(b.data().data(), static_cast<Eigen::Index>(b.dim(0)),
                      static_cast<Eigen::Index>(b.dim(1)));
  detail::MapM<T> mc(c.data().data(), static_cast<Eigen::Index>(c.dim(0)),
                     static_cast<Eigen::Index>(c.dim(1)));
  mc.noalias() = ma.transpose() * mb;
  return c;
}

/// C = A * B^T.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.dim(1) != b.dim(1))
    throw runtime_error("ShapeMismatch",
                        "matmul_nt dims " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> c({a.dim(0), b.dim(0)});
  detail::MapCM<T> ma(a.data().data(), static_cast<Eigen::Index>(a.dim(0)),
                      static_cast<Eigen::Index>(a.dim(1)));
  detail::MapCM<T> mb(b.data().data(), static_cast<Eigen::Index>(b.dim(0)),
                      static_cast<Eigen::Index>(b.dim(1)));
  detail::MapM<T> mc(c.data().data(), static_cast<Eigen::Index>(c.dim(0)),
                     static_cast<Eigen::Index>(c.dim(1)));
  mc.noalias() = ma * mb.transpose();
  return c;
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& a, F f) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = f(a.at(i));
  return out;
}

template <typename T, typename F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, F f, const char* op) {
  if (!a.same_shape(b))
    throw runtime_error("ShapeMismatch",
                        std::string(op) + ": " + a.shape_str() + " vs " + b.shape_str());
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.at(i) = f(a.at(i), b.at(i));
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x + y; }, "add");
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x - y; }, "sub");
}
template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  return zip(a, b, [](T x, T y) { return x * y; }, "mul");
}
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  return map(a, [s](T x) { return x * s; });
}

template <typename T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b))
    throw runtime_error("ShapeMismatch", "accumulate: " + a.shape_str() + " vs " + b.shape_str());
  for (std::size_t i = 0; i < a.size(); ++i) a.at(i) += b.at(i);
}

template <typename T>
T sum(const Tensor<T>& a) {
  T s = 0;
  for (T v : a.data()) s += v;
  return s;
}

}  // namespace eegdl
