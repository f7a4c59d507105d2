#include <bit>
#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "sharpopt/core.hpp"

using namespace sharpopt;

TEST(Norms, L2Examples) {
  EXPECT_EQ(l2_norm(ParamVector{3.0, 4.0}), 5.0);
  EXPECT_EQ(l2_norm(ParamVector{0.0, 0.0, 0.0}), 0.0);
  EXPECT_EQ(l2_norm(ParamVector{1.0, 1.0, 1.0, 1.0}), 2.0);
}

TEST(Norms, LinfExamples) {
  EXPECT_EQ(linf_norm(ParamVector{3.0, -4.0}), 4.0);
  EXPECT_EQ(linf_norm(ParamVector{0.0}), 0.0);
  EXPECT_EQ(linf_norm(ParamVector{-7.0, 2.0, 7.0}), 7.0);
}

TEST(Norms, SandwichProperty) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 10.0);
  std::uniform_int_distribution<int> len(1, 40);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(len(rng)));
    for (double& x : v) x = normal(rng);
    const ParamVector p(v);
    const double inf = linf_norm(p);
    const double two = l2_norm(p);
    EXPECT_LE(inf, two * (1 + 1e-15));
    EXPECT_LE(two, std::sqrt(static_cast<double>(v.size())) * inf * (1 + 1e-15));
  }
}

TEST(ParamVector, RejectsEmptyAndNonFinite) {
  EXPECT_THROW(ParamVector(std::vector<double>{}), UsageError);
  EXPECT_THROW((ParamVector{1.0, std::numeric_limits<double>::quiet_NaN()}), NumericError);
  EXPECT_THROW((ParamVector{std::numeric_limits<double>::infinity()}), NumericError);
}

TEST(ParamVector, OverflowIsReported) {
  ParamVector v{1e308};
  EXPECT_THROW(v *= 10.0, NumericError);
  ParamVector w{1.0};
  EXPECT_THROW(w.set(0, std::nan("")), NumericError);
}

TEST(ParamVector, DimensionMismatch) {
  ParamVector a{1.0, 2.0};
  const ParamVector b{1.0};
  EXPECT_THROW(a += b, UsageError);
  EXPECT_THROW(dot(a, b), UsageError);
}

TEST(Precond, SolveExamples) {
  const ParamVector m{5.0, -2.0};
  EXPECT_EQ(precond_solve(DiagPrecond::identity(), m), m);
  EXPECT_EQ(precond_solve(DiagPrecond::diagonal(ParamVector{2.0, 4.0}), ParamVector{2.0, 4.0}),
            (ParamVector{1.0, 1.0}));
  EXPECT_EQ(precond_solve(DiagPrecond::diagonal(ParamVector{0.5}), ParamVector{3.0}),
            (ParamVector{6.0}));
}

TEST(Precond, Errors) {
  EXPECT_THROW(DiagPrecond::diagonal(ParamVector{1.0, 0.0}), UsageError);
  EXPECT_THROW(DiagPrecond::diagonal(ParamVector{-1.0}), UsageError);
  EXPECT_THROW(precond_solve(DiagPrecond::diagonal(ParamVector{1.0, 2.0}), ParamVector{1.0}),
               UsageError);
}

TEST(Precond, IdentityIsBitwise) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1e3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> v(7);
    for (double& x : v) x = normal(rng);
    const ParamVector m(v);
    const ParamVector out = precond_solve(DiagPrecond::identity(), m);
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(out[i]), std::bit_cast<std::uint64_t>(m[i]));
    }
  }
}

namespace {
std::int64_t ulp_distance(double a, double b) {
  const auto ia = std::bit_cast<std::int64_t>(a);
  const auto ib = std::bit_cast<std::int64_t>(b);
  return ia > ib ? ia - ib : ib - ia;
}
}  // namespace

TEST(Precond, ApplySolveRoundTripWithin4Ulp) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> pos(0.0, 3.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(5), v(5);
    for (double& x : d) x = pos(rng);
    for (double& x : v) x = normal(rng);
    const DiagPrecond b = DiagPrecond::diagonal(ParamVector(d));
    const ParamVector m(v);
    const ParamVector back = precond_solve(b, precond_apply(b, m));
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_LE(ulp_distance(back[i], m[i]), 4);
  }
}

TEST(Schedule, Values) {
  const Schedule c = Schedule::constant(0.3);
  EXPECT_EQ(c.value_at(1), 0.3);
  EXPECT_EQ(c.value_at(1000), 0.3);
  const Schedule s = Schedule::inverse_sqrt(2.0);
  EXPECT_EQ(s.value_at(1), 2.0);
  EXPECT_EQ(s.value_at(4), 1.0);
  EXPECT_DOUBLE_EQ(s.value_at(100), 0.2);
  EXPECT_THROW(s.value_at(0), UsageError);
  EXPECT_THROW(Schedule::constant(0.0), UsageError);
  EXPECT_THROW(Schedule::constant(-1.0), UsageError);
}
