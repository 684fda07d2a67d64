#pragma once

// Truncated Taylor series in the time variable.
//
// A Jet<T> holds the coefficients c_0..c_M of a scalar function of time. All
// arithmetic is exact truncated-series algebra, which makes it the carrier for
// computing trajectory derivatives of polynomial and piecewise-affine vector
// fields without truncation error.

#include <algorithm>
#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>

#include <Eigen/Core>

namespace flowcurv {

/// Hard storage capacity of a jet (coefficients c_0..c_15).
inline constexpr int kJetCapacity = 16;
/// Highest truncation order a jet can carry.
inline constexpr int kJetMaxOrder = kJetCapacity - 1;

template <typename T>
class Jet {
 public:
  using value_type = T;

  /// Constant zero. Constants are exact at every order, so they carry the
  /// maximal truncation order and never lower the order of a result.
  Jet() : order_(kJetMaxOrder) { c_.fill(T(0)); }

  // Implicit on purpose: lets templated vector fields write `S(2) * x`.
  Jet(T value) : order_(kJetMaxOrder) {  // NOLINT(google-explicit-constructor)
    c_.fill(T(0));
    c_[0] = value;
  }

  static Jet constant(T value, int order) {
    Jet j(value);
    j.order_ = checked_order(order);
    return j;
  }

  /// value + slope * t, the seed of a first-order variation.
  static Jet variable(T value, T slope, int order) {
    Jet j = constant(value, order);
    if (order >= 1) j.c_[1] = slope;
    return j;
  }

  int order() const { return order_; }
  const T& operator[](int k) const { return c_[static_cast<std::size_t>(k)]; }
  T& operator[](int k) { return c_[static_cast<std::size_t>(k)]; }
  const T& value() const { return c_[0]; }

  Jet& operator+=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int k = 0; k <= order_; ++k) c_[k] += o.c_[k];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    order_ = std::min(order_, o.order_);
    for (int k = 0; k <= order_; ++k) c_[k] -= o.c_[k];
    return *this;
  }
  Jet& operator*=(const Jet& o) {
    *this = *this * o;
    return *this;
  }
  Jet& operator*=(T s) {
    for (int k = 0; k <= order_; ++k) c_[k] *= s;
    return *this;
  }
  Jet& operator/=(T s) {
    for (int k = 0; k <= order_; ++k) c_[k] /= s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) {
    for (int k = 0; k <= a.order_; ++k) a.c_[k] = -a.c_[k];
    return a;
  }
  friend Jet operator+(const Jet& a) { return a; }

  // (f g)_k = sum_{j=0..k} f_j g_{k-j}
  friend Jet operator*(const Jet& a, const Jet& b) {
    Jet r;
    r.order_ = std::min(a.order_, b.order_);
    const int a_top = a.top(), b_top = b.top();
    for (int k = 0; k <= r.order_; ++k) {
      T acc(0);
      const int lo = std::max(0, k - b_top), hi = std::min(k, a_top);
      for (int j = lo; j <= hi; ++j) acc += a.c_[j] * b.c_[k - j];
      r.c_[k] = acc;
    }
    return r;
  }
  friend Jet operator*(Jet a, T s) { return a *= s; }
  friend Jet operator*(T s, Jet a) { return a *= s; }
  friend Jet operator/(Jet a, T s) { return a /= s; }

  friend bool operator==(const Jet& a, const Jet& b) {
    if (a.order_ != b.order_) return false;
    for (int k = 0; k <= a.order_; ++k)
      if (a.c_[k] != b.c_[k]) return false;
    return true;
  }

 private:
  static int checked_order(int order) {
    if (order < 0 || order > kJetMaxOrder)
      throw std::invalid_argument("jet order " + std::to_string(order) + " outside [0, " +
                                  std::to_string(kJetMaxOrder) + "]");
    return order;
  }

  // Index of the last nonzero coefficient (constants stop at 0).
  int top() const {
    int t = order_;
    while (t > 0 && c_[t] == T(0)) --t;
    return t;
  }

  std::array<T, kJetCapacity> c_;
  int order_;
};

/// Non-negative integer power by repeated squaring.
template <typename T>
Jet<T> pow(const Jet<T>& base, int exponent) {
  if (exponent < 0) throw std::invalid_argument("negative exponent in jet power");
  Jet<T> result(T(1));
  Jet<T> b = base;
  bool any = false;
  while (exponent > 0) {
    if (exponent & 1) {
      result = any ? result * b : b;
      any = true;
    }
    exponent >>= 1;
    if (exponent > 0) b = b * b;
  }
  return result;
}

template <typename S>
using VectorX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using MatrixX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

using JetD = Jet<double>;
using JetL = Jet<long double>;

/// Scalar value behind a (possibly jet-valued) scalar type.
template <typename S>
struct ScalarOf {
  using type = S;
};
template <typename T>
struct ScalarOf<Jet<T>> {
  using type = T;
};
template <typename S>
using scalar_of_t = typename ScalarOf<S>::type;

template <typename S>
scalar_of_t<S> value_of(const S& s) {
  if constexpr (std::is_same_v<S, scalar_of_t<S>>)
    return s;
  else
    return s.value();
}

}  // namespace flowcurv

namespace Eigen {

template <typename T>
struct NumTraits<flowcurv::Jet<T>> : GenericNumTraits<flowcurv::Jet<T>> {
  using Real = flowcurv::Jet<T>;
  using NonInteger = flowcurv::Jet<T>;
  using Nested = flowcurv::Jet<T>;
  using Literal = flowcurv::Jet<T>;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 8,
    MulCost = 64,
  };
};

}  // namespace Eigen
