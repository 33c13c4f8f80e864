#include <gmpxx.h>
#include <gtest/gtest.h>

#include <cmath>

#include "pushsum/extended.hpp"
#include "pushsum/rng.hpp"

namespace pushsum {
namespace {

mpq_class exact(const Extended& x) { return mpq_class(x.hi) + mpq_class(x.lo); }

double rel_err(const mpq_class& got, const mpq_class& want) {
  if (want == 0) return std::abs(got.get_d());
  mpq_class d = (got - want) / want;
  return std::abs(d.get_d());
}

Extended random_extended(Rng& rng) {
  const double scale = std::ldexp(1.0, static_cast<int>(rng.below(80)) - 40);
  const double hi = rng.uniform(-1.0, 1.0) * scale;
  const double lo = hi * std::ldexp(rng.uniform(-0.5, 0.5), -53);
  return Extended(hi) + Extended(lo);
}

TEST(Extended, ArithmeticMatchesRationalOracle) {
  Rng rng(2024);
  const double tol = std::ldexp(1.0, -100);
  for (int i = 0; i < 20000; ++i) {
    const Extended a = random_extended(rng);
    const Extended b = random_extended(rng);
    const mpq_class qa = exact(a), qb = exact(b);
    // Sums can cancel, so they are checked against the operands' scale.
    const mpq_class sum_err = exact(a + b) - (qa + qb);
    const double scale = std::max(std::abs(a.hi), std::abs(b.hi));
    EXPECT_LE(std::abs(sum_err.get_d()), scale * tol);
    EXPECT_LE(rel_err(exact(a * b), qa * qb), tol);
    EXPECT_LE(rel_err(exact(a / b), qa / qb), tol);
    const double c = rng.uniform(-10.0, 10.0);
    EXPECT_LE(rel_err(exact(a * c), qa * mpq_class(c)), tol);
  }
}

TEST(Extended, RepresentationIsNormalized) {
  const Extended x = Extended(1.0) + Extended(1e-20);
  EXPECT_EQ(x.hi, 1.0);
  EXPECT_EQ(x.lo, 1e-20);
  EXPECT_EQ(x.to_double(), 1.0);
  EXPECT_TRUE(Extended(1.0) < x);
  EXPECT_EQ(abs(Extended(-2.0)), Extended(2.0));
}

TEST(Extended, RetainsDigitsPlainDoublesLose) {
  Extended acc(1e12);
  acc += Extended(0.1);
  acc -= Extended(1e12);
  EXPECT_EQ(acc.to_double(), 0.1);
}

}  // namespace
}  // namespace pushsum
