#pragma once

// Parameter-generating layer: per-node queries from a series representation,
// refined over the target's parameter graph, then attention over a bank of
// candidate parameter sets.

#include <string>
#include <vector>

#include "hypergpa/optim.hpp"
#include "hypergpa/target.hpp"
#include "hypergpa/tensor.hpp"

namespace hypergpa {

enum class GraphFn { Gat, Gcn, Agc };

std::string_view to_string(GraphFn fn);
GraphFn parse_graph_fn(std::string_view text);

struct L2Config {
  std::size_t repr_dim = 32;     // dim(h'), the size of h_{i,N}
  std::size_t query_dim = 512;   // dim(z)
  std::size_t refined_dim = 128; // dim(q)
  std::size_t heads = 4;
  std::size_t layers = 3;
  std::size_t hidden = 128;
  std::size_t candidates = 3;    // C
  std::size_t agc_embed_dim = 32;
  GraphFn graph_fn = GraphFn::Gat;

  void validate() const;
};

// Adds "l2." (query map and graph function), "bank." (candidates, one
// [C, numel] tensor per node) and "key." (one [dim(q), C] tensor per node).
void init_l2_params(ParamStore& store, const L2Config& cfg, const ParamGraph& graph, Rng& rng);

// h is [B, dim(h')]; returns [B * L, dim(z)], series-major.
Tensor initial_queries(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                       const Tensor& h);

// z is [B * L, dim(z)] for B independent copies of the graph; returns
// [B * L, dim(q)].
Tensor refine_queries(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                      const Tensor& z);

// q is [B * L, dim(q)]; returns L tensors of shape [B, C].
std::vector<Tensor> attention_coeffs(const BoundParams& params, const L2Config& cfg,
                                     const ParamGraph& graph, const Tensor& q);

// Row b of every coefficient tensor blends node candidates into series b's
// parameter set.
std::vector<ParamSet> assemble_params(const BoundParams& params, const ParamGraph& graph,
                                      const std::vector<Tensor>& coeffs);

struct Selection {
  // indices[b][l] is the 0-based winning candidate of node l for row b.
  std::vector<std::vector<std::size_t>> indices;
  std::vector<ParamSet> params;
};

// Lowest index wins ties; the selected candidate is taken verbatim.
Selection argmax_select(const BoundParams& params, const ParamGraph& graph,
                        const std::vector<Tensor>& coeffs);

// Full generation for a batch of representations.
struct Generated {
  std::vector<Tensor> coeffs;
  std::vector<ParamSet> blended;
  Selection selected;
};

Generated generate(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                   const Tensor& h);

}  // namespace hypergpa
