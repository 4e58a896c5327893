#include "hypergpa/integrate.hpp"

#include <algorithm>
#include <string>

#include "hypergpa/kernels.hpp"

namespace hypergpa {

std::vector<double> uniform_grid(double t0, double t1, int steps) {
  if (steps < 1) throw Error("solver needs at least one step");
  if (!(t1 > t0)) throw Error("integration range must satisfy t0 < t1");
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) grid[static_cast<std::size_t>(j)] = t0 + (t1 - t0) * j / steps;
  grid.back() = t1;
  return grid;
}

std::vector<double> step_grid(std::span<const double> knots, double t0, double t1,
                              int steps_per_interval) {
  if (steps_per_interval < 1) throw Error("steps per knot interval must be >= 1");
  if (knots.size() < 2) throw Error("step_grid: need at least 2 knots");
  if (!(t1 > t0)) throw Error("integration range must satisfy t0 < t1");
  if (t0 < knots.front() || t1 > knots.back()) {
    throw Error("integration range [" + std::to_string(t0) + ", " + std::to_string(t1) +
                "] leaves the path's knot range");
  }
  std::vector<double> grid{t0};
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    const double a = std::max(t0, knots[k]);
    const double b = std::min(t1, knots[k + 1]);
    if (!(b > a)) continue;
    for (int j = 1; j <= steps_per_interval; ++j) grid.push_back(a + (b - a) * j / steps_per_interval);
    grid.back() = b;
  }
  return grid;
}

Dynamics cde_dynamics(CdeField field, std::shared_ptr<const std::vector<ControlPath>> paths) {
  if (!paths || paths->empty()) throw Error("integrate_cde: no control paths");
  return [field = std::move(field), paths](Tape& tape, double t, const Tensor& h,
                                           std::span<const Tensor> params) {
    const std::size_t rows = h.value().rows();
    const std::size_t hidden = h.value().cols();
    const std::size_t channels = paths->front().channels();
    if (paths->size() != 1 && paths->size() != rows) {
      throw Error("integrate_cde: " + std::to_string(paths->size()) + " paths for " +
                  std::to_string(rows) + " state rows");
    }
    Tensor f = field(tape, h, params);
    if (f.size() != rows * hidden * channels) {
      throw Error("integrate_cde: field returned shape " + shape_string(f.shape()) + ", expected [" +
                  std::to_string(rows) + "," + std::to_string(hidden * channels) + "]");
    }
    Array dx({rows * hidden, channels});
    std::vector<double> d(channels);
    for (std::size_t r = 0; r < rows; ++r) {
      (*paths)[paths->size() == 1 ? 0 : r].deriv_into(t, d.data());
      for (std::size_t k = 0; k < hidden; ++k) {
        std::copy(d.begin(), d.end(), dx.ptr() + (r * hidden + k) * channels);
      }
    }
    Tensor prod = mul(reshape(f, {rows * hidden, channels}), tape.constant(std::move(dx)));
    return reshape(sum_cols(prod), h.shape());
  };
}

namespace {

void check_finite(const Array& h, std::size_t step) {
  if (!h.all_finite()) {
    throw Error("integration produced a non-finite state at step " + std::to_string(step));
  }
}

Tensor rk4_recorded(const Tensor& h0, const Dynamics& f, std::span<const Tensor> params,
                    std::span<const double> grid) {
  Tape& tape = h0.tape();
  Tensor h = h0;
  for (std::size_t s = 0; s + 1 < grid.size(); ++s) {
    const double t = grid[s], dt = grid[s + 1] - grid[s];
    Tensor k1 = f(tape, t, h, params);
    Tensor k2 = f(tape, t + dt / 2, add(h, scale(k1, dt / 2)), params);
    Tensor k3 = f(tape, t + dt / 2, add(h, scale(k2, dt / 2)), params);
    Tensor k4 = f(tape, t + dt, add(h, scale(k3, dt)), params);
    Tensor incr = add(add(k1, scale(k2, 2.0)), add(scale(k3, 2.0), k4));
    h = add(h, scale(incr, dt / 6));
    check_finite(h.value(), s);
  }
  return h;
}

// Evaluates f on a scratch tape with everything held constant.
Array eval_plain(const Dynamics& f, double t, const Array& h, std::span<const Array> params) {
  Tape scratch;
  Tensor hl = scratch.constant(h);
  std::vector<Tensor> pl;
  pl.reserve(params.size());
  for (const Array& p : params) pl.push_back(scratch.constant(p));
  return f(scratch, t, hl, pl).value();
}

// One bundle of same-shaped arrays, for the augmented adjoint state.
using Bundle = std::vector<Array>;

void bundle_axpy(double alpha, const Bundle& x, Bundle& y) {
  for (std::size_t i = 0; i < y.size(); ++i) {
    kernels::active().axpy(y[i].size(), alpha, x[i].ptr(), y[i].ptr());
  }
}

Bundle bundle_plus(const Bundle& z, double alpha, const Bundle& k) {
  Bundle out = z;
  bundle_axpy(alpha, k, out);
  return out;
}

struct AdjointSystem {
  const Dynamics* f;
  std::vector<Array> param_values;
  std::vector<bool> param_wanted;

  // z = {h, a, g_0 .. g_{p-1}}; returns dz/dt.
  Bundle operator()(double t, const Bundle& z) const {
    Tape scratch;
    Tensor hl = scratch.leaf(z[0]);
    std::vector<Tensor> pl;
    std::vector<Tensor> wrt{hl};
    for (std::size_t i = 0; i < param_values.size(); ++i) {
      pl.push_back(scratch.leaf(param_values[i], param_wanted[i]));
      if (param_wanted[i]) wrt.push_back(pl.back());
    }
    Tensor out = (*f)(scratch, t, hl, pl);
    Tensor pairing = sum(mul(out, scratch.constant(z[1])));
    std::vector<Array> g = scratch.grad(pairing, wrt);

    Bundle dz;
    dz.reserve(z.size());
    dz.push_back(out.value());
    Array da = std::move(g[0]);
    for (std::size_t k = 0; k < da.size(); ++k) da[k] = -da[k];
    dz.push_back(std::move(da));
    std::size_t gi = 1;
    for (std::size_t i = 0; i < param_values.size(); ++i) {
      if (!param_wanted[i]) {
        dz.push_back(Array(param_values[i].shape(), 0.0));
        continue;
      }
      Array dp = std::move(g[gi++]);
      for (std::size_t k = 0; k < dp.size(); ++k) dp[k] = -dp[k];
      dz.push_back(std::move(dp));
    }
    return dz;
  }
};

Tensor rk4_adjoint(const Tensor& h0, const Dynamics& f, std::span<const Tensor> params,
                   std::span<const double> grid) {
  Tape& tape = h0.tape();
  std::vector<Array> pvals;
  for (const Tensor& p : params) pvals.push_back(p.value());

  Array h = h0.value();
  for (std::size_t s = 0; s + 1 < grid.size(); ++s) {
    const double t = grid[s], dt = grid[s + 1] - grid[s];
    Array k1 = eval_plain(f, t, h, pvals);
    Array tmp = h;
    kernels::active().axpy(h.size(), dt / 2, k1.ptr(), tmp.ptr());
    Array k2 = eval_plain(f, t + dt / 2, tmp, pvals);
    tmp = h;
    kernels::active().axpy(h.size(), dt / 2, k2.ptr(), tmp.ptr());
    Array k3 = eval_plain(f, t + dt / 2, tmp, pvals);
    tmp = h;
    kernels::active().axpy(h.size(), dt, k3.ptr(), tmp.ptr());
    Array k4 = eval_plain(f, t + dt, tmp, pvals);
    for (std::size_t i = 0; i < h.size(); ++i) {
      h[i] += dt / 6 * ((k1[i] + 2.0 * k2[i]) + (2.0 * k3[i] + k4[i]));
    }
    check_finite(h, s);
  }

  std::vector<Tensor> parents{h0};
  parents.insert(parents.end(), params.begin(), params.end());
  std::vector<double> grid_copy(grid.begin(), grid.end());
  return tape.record(
      std::move(h), parents,
      [f, grid = std::move(grid_copy), parents](const Tape& tp, NodeId self, const Array& gout,
                                               GradSink& sink) {
        AdjointSystem sys{&f, {}, {}};
        for (std::size_t i = 1; i < parents.size(); ++i) {
          sys.param_values.push_back(tp.value(parents[i].id()));
          sys.param_wanted.push_back(sink.wants(parents[i].id()));
        }
        Bundle z{tp.value(self), gout};
        for (const Array& p : sys.param_values) z.emplace_back(p.shape(), 0.0);

        for (std::size_t s = grid.size() - 1; s > 0; --s) {
          const double t = grid[s], dt = grid[s] - grid[s - 1];
          Bundle k1 = sys(t, z);
          Bundle k2 = sys(t - dt / 2, bundle_plus(z, -dt / 2, k1));
          Bundle k3 = sys(t - dt / 2, bundle_plus(z, -dt / 2, k2));
          Bundle k4 = sys(t - dt, bundle_plus(z, -dt, k3));
          bundle_axpy(-dt / 6, k1, z);
          bundle_axpy(-dt / 3, k2, z);
          bundle_axpy(-dt / 3, k3, z);
          bundle_axpy(-dt / 6, k4, z);
        }
        if (sink.wants(parents[0].id())) {
          kernels::active().axpy(z[1].size(), 1.0, z[1].ptr(), sink.slot(parents[0].id()).ptr());
        }
        for (std::size_t i = 1; i < parents.size(); ++i) {
          if (!sys.param_wanted[i - 1]) continue;
          const Array& g = z[i + 1];
          kernels::active().axpy(g.size(), 1.0, g.ptr(), sink.slot(parents[i].id()).ptr());
        }
      });
}

}  // namespace

Tensor integrate_ode(const Tensor& h0, const Dynamics& f, std::span<const Tensor> params,
                     std::span<const double> grid, GradMode mode) {
  if (grid.size() < 2) throw Error("integrate: grid needs at least 2 points");
  if (mode == GradMode::Adjoint) return rk4_adjoint(h0, f, params, grid);
  return rk4_recorded(h0, f, params, grid);
}

Tensor integrate_cde(const Tensor& h0, const CdeField& field, std::span<const Tensor> params,
                     std::shared_ptr<const std::vector<ControlPath>> paths, double t0, double t1,
                     const SolverConfig& config) {
  if (!paths || paths->empty()) throw Error("integrate_cde: no control paths");
  const std::vector<double> grid =
      step_grid(paths->front().knots(), t0, t1, config.steps_per_interval);
  return integrate_ode(h0, cde_dynamics(field, paths), params, grid, config.mode);
}

}  // namespace hypergpa
