#pragma once

#include <span>
#include <vector>

#include "hypergpa/tensor.hpp"

namespace hypergpa {

// Piecewise-cubic control path X(t) through observed knots, one cubic per
// knot interval and channel. Immutable once built.
class ControlPath {
 public:
  // Natural cubic spline through (times[k], values row k). values is T x d.
  static ControlPath fit(std::span<const double> times, const Array& values);

  // Explicit segments: coeffs holds, for each interval k and channel c, the
  // four coefficients (a, b, c, d) of a + b s + c s^2 + d s^3 with s = t - knots[k].
  static ControlPath from_segments(std::vector<double> knots, std::size_t channels,
                                   std::vector<double> coeffs);

  std::size_t channels() const { return channels_; }
  const std::vector<double>& knots() const { return knots_; }
  double t_begin() const { return knots_.front(); }
  double t_end() const { return knots_.back(); }

  Array eval(double t) const;
  Array deriv(double t) const;
  Array second_deriv(double t) const;
  // Writes channels() values to out.
  void deriv_into(double t, double* out) const;

 private:
  ControlPath() = default;
  std::size_t segment(double& t) const;

  std::vector<double> knots_;
  std::size_t channels_ = 0;
  std::vector<double> coeffs_;  // [interval][channel][4]
  std::vector<double> last_;    // value at the final knot
};

// Knot times 1..T for T regularly sampled observations.
std::vector<double> index_times(std::size_t count);

}  // namespace hypergpa
