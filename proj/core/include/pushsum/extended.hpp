#pragma once

#include <cmath>

namespace pushsum {

/// Unevaluated sum hi + lo of two doubles with |lo| <= ulp(hi)/2, giving
/// roughly 106 significant bits. Node values and shares are carried in this
/// form: phase-A weights can push |s| to 1e12, where plain doubles lose the
/// digits that mass conservation and the final average depend on.
///
/// Arithmetic follows the classic error-free transformations (TwoSum,
/// TwoProd via fma). The translation unit must be compiled without
/// floating-point contraction.
struct Extended {
  double hi = 0.0;
  double lo = 0.0;

  constexpr Extended() = default;
  constexpr Extended(double v) : hi(v), lo(0.0) {}  // NOLINT: implicit by design of the numeric type
  constexpr Extended(double h, double l) : hi(h), lo(l) {}

  double to_double() const { return hi + lo; }

  Extended operator-() const { return {-hi, -lo}; }

  friend Extended operator+(const Extended& a, const Extended& b);
  friend Extended operator-(const Extended& a, const Extended& b);
  friend Extended operator*(const Extended& a, double b);
  friend Extended operator*(const Extended& a, const Extended& b);
  friend Extended operator/(const Extended& a, const Extended& b);

  Extended& operator+=(const Extended& b) { return *this = *this + b; }
  Extended& operator-=(const Extended& b) { return *this = *this - b; }

  friend bool operator==(const Extended& a, const Extended& b) {
    return a.hi == b.hi && a.lo == b.lo;
  }
  friend bool operator<(const Extended& a, const Extended& b) {
    return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo);
  }
  friend bool operator>(const Extended& a, const Extended& b) { return b < a; }
};

Extended abs(const Extended& x);

}  // namespace pushsum
