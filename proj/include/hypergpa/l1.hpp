#pragma once

// Shared multi-task layer: per-series initial embeddings followed by one NCDE
// over all series jointly, whose vector field mixes series through adaptive
// graph convolution.

#include <span>
#include <string>
#include <vector>

#include "hypergpa/integrate.hpp"
#include "hypergpa/optim.hpp"
#include "hypergpa/tensor.hpp"

namespace hypergpa {

struct L1Config {
  std::size_t series = 1;       // M
  std::size_t input_dim = 1;    // dim(x)
  std::size_t hidden_dim = 32;  // dim(h')
  std::size_t gamma_hidden = 32;
  std::size_t gamma_layers = 2;
  std::size_t embed_dim = 32;   // d_e
  std::size_t field_hidden = 32;
  bool use_agc = true;
  SolverConfig solver;

  void validate() const;
};

// Adds every L1 parameter under the "l1." prefix.
void init_l1_params(ParamStore& store, const L1Config& cfg, Rng& rng);

// Row-softmax(ReLU(E E^T)).
Tensor agc_adjacency(const Tensor& e);

// (I + A) Z W + b with A from agc_adjacency(e). When e is not valid the
// propagation term is dropped and this is a plain affine map.
Tensor agc(const Tensor& z, const Tensor& e, const Tensor& w, const Tensor& b);

// x_first is M x dim(x); returns M x dim(h').
Tensor embed_initial(const BoundParams& params, const L1Config& cfg, const Tensor& x_first);

// The CDE field parameters in the order field_G expects.
std::vector<Tensor> field_params(const BoundParams& params, const L1Config& cfg);

// H is M x dim(h'); returns M x (dim(h') * dim(x)), row i holding the
// dim(h') x dim(x) map applied to dX_i.
Tensor field_G(const Tensor& h, std::span<const Tensor> field, const L1Config& cfg);

// series[i] is the T x dim(x) concatenation of series i's K input periods.
// Returns the M x dim(h') final states.
Tensor encode_periods(const BoundParams& params, const L1Config& cfg,
                      std::span<const Array> series);

}  // namespace hypergpa
