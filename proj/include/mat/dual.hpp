#pragma once

#include <cmath>

namespace mat {

// First-order dual number: value + one tangent component. Running the
// network forward/backward kernels on Dual yields directional second
// derivatives (Hessian-vector and mixed-partial products) in one sweep,
// which is how meta-gradients differentiate through unrolled student SGD.
struct Dual {
  double v = 0.0;  // primal value
  double d = 0.0;  // tangent

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit by design
  constexpr Dual(double value, double tangent) : v(value), d(tangent) {}
};

constexpr Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
constexpr Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
constexpr Dual operator-(Dual a) { return {-a.v, -a.d}; }
constexpr Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
constexpr Dual operator/(Dual a, Dual b) {
  const double inv = 1.0 / b.v;
  const double q = a.v * inv;
  return {q, (a.d - q * b.d) * inv};
}

constexpr Dual& operator+=(Dual& a, Dual b) { a = a + b; return a; }
constexpr Dual& operator-=(Dual& a, Dual b) { a = a - b; return a; }
constexpr Dual& operator*=(Dual& a, Dual b) { a = a * b; return a; }
constexpr Dual& operator/=(Dual& a, Dual b) { a = a / b; return a; }

// Branch decisions (ReLU masks, argmax, clipping) follow the primal value.
constexpr bool operator<(Dual a, Dual b) { return a.v < b.v; }
constexpr bool operator>(Dual a, Dual b) { return a.v > b.v; }
constexpr bool operator<=(Dual a, Dual b) { return a.v <= b.v; }
constexpr bool operator>=(Dual a, Dual b) { return a.v >= b.v; }

inline Dual exp(Dual a) {
  const double e = std::exp(a.v);
  return {e, e * a.d};
}
inline Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
inline Dual sqrt(Dual a) {
  const double s = std::sqrt(a.v);
  return {s, s > 0.0 ? a.d / (2.0 * s) : 0.0};
}

// Scalar accessors so kernels can be written once for double and Dual.
constexpr double primal(double x) { return x; }
constexpr double primal(Dual x) { return x.v; }

}  // namespace mat
