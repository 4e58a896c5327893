#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hypergpa/path.hpp"

using namespace hypergpa;

namespace {

ControlPath three_knot() {
  const std::vector<double> t{0, 1, 2};
  return ControlPath::fit(t, Array::matrix(3, 1, {0, 1, 0}));
}

}  // namespace

TEST(ControlPath, InterpolatesKnotsExactly) {
  EXPECT_EQ(three_knot().eval(1.0).item(), 1.0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> d;
  Array v({9, 3});
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = d(rng);
  const auto times = index_times(9);
  const ControlPath p = ControlPath::fit(times, v);
  for (std::size_t k = 0; k < 9; ++k) {
    const Array x = p.eval(times[k]);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(x[c], v.at(k, c)) << "knot " << k;
  }
}

TEST(ControlPath, NaturalBoundary) {
  const ControlPath p = three_knot();
  EXPECT_NEAR(p.second_deriv(0.0).item(), 0.0, 1e-14);
  EXPECT_NEAR(p.second_deriv(2.0).item(), 0.0, 1e-14);
}

TEST(ControlPath, HandSolvedThreeKnotValue) {
  // M1 = -3, S(t) = 1.5 t - 0.5 t^3 on [0, 1].
  EXPECT_NEAR(three_knot().eval(0.5).item(), 0.6875, 1e-15);
  EXPECT_NEAR(three_knot().deriv(0.5).item(), 1.5 - 1.5 * 0.25, 1e-15);
}

TEST(ControlPath, AffineDataGivesConstantDerivative) {
  const auto times = index_times(7);
  Array v({7, 2});
  for (std::size_t k = 0; k < 7; ++k) {
    v.at(k, 0) = static_cast<double>(k + 1);
    v.at(k, 1) = -2.0 * static_cast<double>(k + 1) + 3.0;
  }
  const ControlPath p = ControlPath::fit(times, v);
  for (double t = 1.0; t <= 7.0; t += 0.37) {
    const Array d = p.deriv(t);
    EXPECT_NEAR(d[0], 1.0, 1e-12);
    EXPECT_NEAR(d[1], -2.0, 1e-12);
  }
}

TEST(ControlPath, SmoothAtInteriorKnots) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  Array v({6, 1});
  for (std::size_t i = 0; i < 6; ++i) v[i] = d(rng);
  const ControlPath p = ControlPath::fit(index_times(6), v);
  for (double k = 2.0; k <= 5.0; k += 1.0) {
    EXPECT_NEAR(p.deriv(k - 1e-9).item(), p.deriv(k + 1e-9).item(), 1e-7);
    EXPECT_NEAR(p.second_deriv(k - 1e-9).item(), p.second_deriv(k + 1e-9).item(), 1e-7);
  }
}

TEST(ControlPath, DerivIntoMatchesDeriv) {
  const ControlPath p = three_knot();
  double out = 0.0;
  p.deriv_into(1.3, &out);
  EXPECT_EQ(out, p.deriv(1.3).item());
}

TEST(ControlPath, RejectsBadInput) {
  const std::vector<double> one{0};
  EXPECT_THROW(ControlPath::fit(one, Array::matrix(1, 1, {0})), Error);
  const std::vector<double> unsorted{0, 0};
  EXPECT_THROW(ControlPath::fit(unsorted, Array::matrix(2, 1, {0, 1})), Error);
  const std::vector<double> two{0, 1};
  EXPECT_THROW(ControlPath::fit(two, Array::matrix(3, 1, {0, 1, 2})), Error);
}

TEST(ControlPath, FromSegments) {
  // X(t) = t^2 on [0, 1].
  const ControlPath p = ControlPath::from_segments({0.0, 1.0}, 1, {0.0, 0.0, 1.0, 0.0});
  EXPECT_DOUBLE_EQ(p.eval(0.5).item(), 0.25);
  EXPECT_DOUBLE_EQ(p.deriv(0.5).item(), 1.0);
}
