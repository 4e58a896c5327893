#include "hypergpa/path.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hypergpa {

std::vector<double> index_times(std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t k = 0; k < count; ++k) t[k] = static_cast<double>(k + 1);
  return t;
}

ControlPath ControlPath::fit(std::span<const double> times, const Array& values) {
  const std::size_t n = times.size();
  if (n < 2) throw Error("fit_path: need at least 2 observations, got " + std::to_string(n));
  if (values.rank() != 2 || values.shape()[0] != n) {
    throw Error("fit_path: values must be T x d with T = " + std::to_string(n));
  }
  for (std::size_t k = 1; k < n; ++k) {
    if (!(times[k] > times[k - 1])) throw Error("fit_path: knot times must be strictly increasing");
  }
  const std::size_t d = values.shape()[1];

  ControlPath path;
  path.knots_.assign(times.begin(), times.end());
  path.channels_ = d;
  path.coeffs_.assign((n - 1) * d * 4, 0.0);

  std::vector<double> h(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) h[k] = times[k + 1] - times[k];

  // Natural spline: second derivatives m_0 = m_{n-1} = 0, interior ones from a
  // tridiagonal system solved by the Thomas algorithm.
  std::vector<double> m(n, 0.0), diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    std::fill(m.begin(), m.end(), 0.0);
    if (n > 2) {
      for (std::size_t k = 1; k + 1 < n; ++k) {
        const double yl = values.at(k - 1, c), y0 = values.at(k, c), yr = values.at(k + 1, c);
        diag[k] = 2.0 * (h[k - 1] + h[k]);
        upper[k] = h[k];
        rhs[k] = 6.0 * ((yr - y0) / h[k] - (y0 - yl) / h[k - 1]);
      }
      for (std::size_t k = 2; k + 1 < n; ++k) {
        const double w = h[k - 1] / diag[k - 1];
        diag[k] -= w * upper[k - 1];
        rhs[k] -= w * rhs[k - 1];
      }
      m[n - 2] = rhs[n - 2] / diag[n - 2];
      for (std::size_t k = n - 2; k-- > 1;) m[k] = (rhs[k] - upper[k] * m[k + 1]) / diag[k];
    }
    for (std::size_t k = 0; k + 1 < n; ++k) {
      const double y0 = values.at(k, c), y1 = values.at(k + 1, c);
      double* q = &path.coeffs_[(k * d + c) * 4];
      q[0] = y0;
      q[1] = (y1 - y0) / h[k] - h[k] * (2.0 * m[k] + m[k + 1]) / 6.0;
      q[2] = m[k] / 2.0;
      q[3] = (m[k + 1] - m[k]) / (6.0 * h[k]);
    }
    path.last_.push_back(values.at(n - 1, c));
  }
  return path;
}

ControlPath ControlPath::from_segments(std::vector<double> knots, std::size_t channels,
                                       std::vector<double> coeffs) {
  if (knots.size() < 2) throw Error("control path needs at least 2 knots");
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (!(knots[k] > knots[k - 1])) throw Error("control path knots must be strictly increasing");
  }
  if (coeffs.size() != (knots.size() - 1) * channels * 4) {
    throw Error("control path coefficient count does not match knots x channels x 4");
  }
  ControlPath path;
  path.knots_ = std::move(knots);
  path.channels_ = channels;
  path.coeffs_ = std::move(coeffs);
  const std::size_t k = path.knots_.size() - 2;
  const double t = path.knots_[k + 1] - path.knots_[k];
  for (std::size_t c = 0; c < channels; ++c) {
    const double* q = &path.coeffs_[(k * channels + c) * 4];
    path.last_.push_back(q[0] + t * (q[1] + t * (q[2] + t * q[3])));
  }
  return path;
}

// Maps t to its interval and rewrites t as the offset into it. Values a few
// ulps outside the knot range (from accumulated step arithmetic) are clamped.
std::size_t ControlPath::segment(double& t) const {
  const double lo = knots_.front(), hi = knots_.back();
  const double slack = 1e-9 * std::max(1.0, hi - lo);
  if (!(t >= lo - slack && t <= hi + slack)) {
    throw Error("control path evaluated at t=" + std::to_string(t) + " outside [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  t = std::clamp(t, lo, hi);
  auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  std::size_t k = static_cast<std::size_t>(it - knots_.begin());
  k = k == 0 ? 0 : k - 1;
  k = std::min(k, knots_.size() - 2);
  t -= knots_[k];
  return k;
}

Array ControlPath::eval(double t) const {
  Array out({channels_});
  if (t == knots_.back()) {
    std::copy(last_.begin(), last_.end(), out.ptr());
    return out;
  }
  const std::size_t k = segment(t);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double* q = &coeffs_[(k * channels_ + c) * 4];
    out[c] = q[0] + t * (q[1] + t * (q[2] + t * q[3]));
  }
  return out;
}

void ControlPath::deriv_into(double t, double* out) const {
  const std::size_t k = segment(t);
  for (std::size_t c = 0; c < channels_; ++c) {
    const double* q = &coeffs_[(k * channels_ + c) * 4];
    out[c] = q[1] + t * (2.0 * q[2] + 3.0 * t * q[3]);
  }
}

Array ControlPath::deriv(double t) const {
  Array out({channels_});
  deriv_into(t, out.ptr());
  return out;
}

Array ControlPath::second_deriv(double t) const {
  const std::size_t k = segment(t);
  Array out({channels_});
  for (std::size_t c = 0; c < channels_; ++c) {
    const double* q = &coeffs_[(k * channels_ + c) * 4];
    out[c] = 2.0 * q[2] + 6.0 * t * q[3];
  }
  return out;
}

}  // namespace hypergpa
