#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "girl/errors.hpp"

namespace girl {

// Dense row-major n-d array over a flat Eigen vector. The scalar is a
// template parameter; the training stack uses the float alias throughout.
template <typename Scalar>
struct NdArrayT {
  std::vector<int> shape;
  Eigen::Vector<Scalar, Eigen::Dynamic> data;

  NdArrayT() = default;

  static NdArrayT zeros(std::vector<int> s) {
    NdArrayT a;
    a.shape = std::move(s);
    a.data = Eigen::Vector<Scalar, Eigen::Dynamic>::Zero(count(a.shape));
    return a;
  }

  static NdArrayT full(std::vector<int> s, Scalar v) {
    NdArrayT a = zeros(std::move(s));
    a.data.setConstant(v);
    return a;
  }

  static NdArrayT from(std::vector<int> s, std::initializer_list<Scalar> vals) {
    NdArrayT a;
    a.shape = std::move(s);
    if (static_cast<int>(vals.size()) != count(a.shape))
      throw ShapeError("NdArray::from: value count does not match shape");
    a.data.resize(vals.size());
    int i = 0;
    for (Scalar v : vals) a.data[i++] = v;
    return a;
  }

  static int count(const std::vector<int>& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
  }

  int size() const { return static_cast<int>(data.size()); }
  int rank() const { return static_cast<int>(shape.size()); }
  bool empty() const { return data.size() == 0; }

  bool same_shape(const NdArrayT& o) const { return shape == o.shape; }

  Scalar& operator[](int i) { return data[i]; }
  Scalar operator[](int i) const { return data[i]; }

  // (c, h, w) indexing for rank-3 arrays, (r, c) for rank-2.
  Scalar& at3(int c, int h, int w) {
    return data[(c * shape[1] + h) * shape[2] + w];
  }
  Scalar at3(int c, int h, int w) const {
    return data[(c * shape[1] + h) * shape[2] + w];
  }
  Scalar& at2(int r, int c) { return data[r * shape[1] + c]; }
  Scalar at2(int r, int c) const { return data[r * shape[1] + c]; }

  using MatMap = Eigen::Map<
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatMap = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                                     Eigen::Dynamic, Eigen::RowMajor>>;

  MatMap mat(int rows, int cols) {
    if (rows * cols != size()) throw ShapeError("mat view size mismatch");
    return MatMap(data.data(), rows, cols);
  }
  ConstMatMap mat(int rows, int cols) const {
    if (rows * cols != size()) throw ShapeError("mat view size mismatch");
    return ConstMatMap(data.data(), rows, cols);
  }

  bool all_finite() const {
    for (int i = 0; i < size(); ++i)
      if (!std::isfinite(static_cast<double>(data[i]))) return false;
    return true;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i)
      os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
  }
};

using NdArray = NdArrayT<float>;
using NdArrayD = NdArrayT<double>;

inline void require_same_shape(const NdArray& a, const NdArray& b,
                               const char* where) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
}

}  // namespace girl
