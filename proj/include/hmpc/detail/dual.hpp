#pragma once

// Forward-mode tangent scalar used to differentiate the recursive dynamics
// algorithms along one input direction at a time.

#include <Eigen/Core>

#include <cmath>

namespace hmpc::detail {

struct Dual {
  double v = 0.0;  // value
  double d = 0.0;  // directional derivative

  Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    d = (d * o.v - v * o.d) / (o.v * o.v);
    v /= o.v;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
inline Dual operator+(const Dual& a) { return a; }

inline bool operator<(const Dual& a, const Dual& b) { return a.v < b.v; }
inline bool operator>(const Dual& a, const Dual& b) { return a.v > b.v; }
inline bool operator<=(const Dual& a, const Dual& b) { return a.v <= b.v; }
inline bool operator>=(const Dual& a, const Dual& b) { return a.v >= b.v; }
inline bool operator==(const Dual& a, const Dual& b) { return a.v == b.v && a.d == b.d; }
inline bool operator!=(const Dual& a, const Dual& b) { return !(a == b); }

inline Dual sin(const Dual& a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
inline Dual cos(const Dual& a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return {s, s > 0.0 ? 0.5 * a.d / s : 0.0};
}
inline Dual abs(const Dual& a) { return a.v < 0.0 ? -a : a; }
inline Dual abs2(const Dual& a) { return a * a; }
inline const Dual& conj(const Dual& a) { return a; }
inline const Dual& real(const Dual& a) { return a; }
inline Dual imag(const Dual&) { return Dual(0.0); }
inline bool isfinite(const Dual& a) { return std::isfinite(a.v) && std::isfinite(a.d); }

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.v; }

}  // namespace hmpc::detail

namespace Eigen {

template <>
struct NumTraits<hmpc::detail::Dual> : NumTraits<double> {
  using Real = hmpc::detail::Dual;
  using NonInteger = hmpc::detail::Dual;
  using Nested = hmpc::detail::Dual;
  using Literal = hmpc::detail::Dual;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 0,
    ReadCost = 2,
    AddCost = 2,
    MulCost = 3
  };
};

template <typename BinaryOp>
struct ScalarBinaryOpTraits<hmpc::detail::Dual, double, BinaryOp> {
  using ReturnType = hmpc::detail::Dual;
};
template <typename BinaryOp>
struct ScalarBinaryOpTraits<double, hmpc::detail::Dual, BinaryOp> {
  using ReturnType = hmpc::detail::Dual;
};

}  // namespace Eigen
