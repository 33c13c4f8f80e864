#include "pushsum/extended.hpp"

namespace pushsum {
namespace {

// Knuth's TwoSum: s + e == a + b exactly.
inline Extended two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  const double e = (a - (s - bb)) + (b - bb);
  return {s, e};
}

// Requires |a| >= |b| (or a == 0).
inline Extended quick_two_sum(double a, double b) {
  const double s = a + b;
  const double e = b - (s - a);
  return {s, e};
}

inline Extended two_prod(double a, double b) {
  const double p = a * b;
  const double e = std::fma(a, b, -p);
  return {p, e};
}

}  // namespace

Extended operator+(const Extended& a, const Extended& b) {
  Extended s = two_sum(a.hi, b.hi);
  Extended t = two_sum(a.lo, b.lo);
  s.lo += t.hi;
  s = quick_two_sum(s.hi, s.lo);
  s.lo += t.lo;
  return quick_two_sum(s.hi, s.lo);
}

Extended operator-(const Extended& a, const Extended& b) { return a + (-b); }

Extended operator*(const Extended& a, double b) {
  Extended p = two_prod(a.hi, b);
  p.lo += a.lo * b;
  return quick_two_sum(p.hi, p.lo);
}

Extended operator*(const Extended& a, const Extended& b) {
  Extended p = two_prod(a.hi, b.hi);
  p.lo += a.hi * b.lo + a.lo * b.hi;
  return quick_two_sum(p.hi, p.lo);
}

Extended operator/(const Extended& a, const Extended& b) {
  // Two Newton-style correction steps on the double quotient.
  const double q1 = a.hi / b.hi;
  Extended r = a - b * q1;
  const double q2 = r.hi / b.hi;
  r = r - b * q2;
  const double q3 = r.hi / b.hi;
  Extended q = quick_two_sum(q1, q2);
  return q + Extended(q3);
}

Extended abs(const Extended& x) { return x.hi < 0.0 ? -x : x; }

}  // namespace pushsum
