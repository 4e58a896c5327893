#pragma once

// Fixed-step RK4 for ODEs and controlled differential equations, differentiable
// either by recording every stage on the tape or by a backward adjoint solve
// that keeps only the final state.

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "hypergpa/path.hpp"
#include "hypergpa/tensor.hpp"

namespace hypergpa {

enum class GradMode { Backprop, Adjoint };

struct SolverConfig {
  int steps_per_interval = 4;
  GradMode mode = GradMode::Backprop;
};

// dh/dt = f(t, h; params). Must build its result only from h and params.
using Dynamics =
    std::function<Tensor(Tape& tape, double t, const Tensor& h, std::span<const Tensor> params)>;

// CDE vector field: maps the [R, H] state to [R, H*C], i.e. one H x C matrix
// per row that multiplies that row's dX/dt.
using CdeField = std::function<Tensor(Tape& tape, const Tensor& h, std::span<const Tensor> params)>;

// Time points t0 < ... < t1 with `steps_per_interval` RK4 steps inside every
// knot interval that overlaps [t0, t1]; knots inside the range are grid points.
std::vector<double> step_grid(std::span<const double> knots, double t0, double t1,
                              int steps_per_interval);

// Uniform grid with `steps` steps.
std::vector<double> uniform_grid(double t0, double t1, int steps);

// Integrates along `grid`. Throws on a non-finite state, naming the step.
Tensor integrate_ode(const Tensor& h0, const Dynamics& f, std::span<const Tensor> params,
                     std::span<const double> grid, GradMode mode);

// h(t1) = h(t0) + int field(h) dX(t). `paths` has one entry per state row, or a
// single path shared by all rows.
Tensor integrate_cde(const Tensor& h0, const CdeField& field, std::span<const Tensor> params,
                     std::shared_ptr<const std::vector<ControlPath>> paths, double t0, double t1,
                     const SolverConfig& config);

// The ODE right-hand side the CDE reduces to along the given paths.
Dynamics cde_dynamics(CdeField field, std::shared_ptr<const std::vector<ControlPath>> paths);

}  // namespace hypergpa
