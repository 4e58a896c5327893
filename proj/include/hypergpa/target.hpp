#pragma once

// Target forecasters whose weights are either trained directly or generated.
// Each architecture exposes its trainable tensors as the nodes of a ParamGraph;
// a ParamSet supplies one tensor per node, in node order.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hypergpa/integrate.hpp"
#include "hypergpa/optim.hpp"
#include "hypergpa/tensor.hpp"

namespace hypergpa {

enum class TargetKind { Gru, Lstm, SeqToSeqGru, SeqToSeqLstm, OdeRnn, Ncde };

std::string_view to_string(TargetKind kind);
TargetKind parse_target_kind(std::string_view text);
bool is_gru_family(TargetKind kind);

struct TargetArch {
  TargetKind kind = TargetKind::Gru;
  std::size_t input_dim = 1;
  std::size_t hidden_dim = 16;
  std::size_t layers = 1;
  std::size_t s_in = 10;
  std::size_t s_out = 2;
  // RK4 steps per unit time for the ODE-RNN flow and per knot interval for NCDE.
  int solver_steps = 4;

  void validate() const;
};

struct ParamNode {
  std::string name;
  Shape shape;
};

class ParamGraph {
 public:
  std::size_t size() const { return nodes_.size(); }
  const std::vector<ParamNode>& nodes() const { return nodes_; }
  const ParamNode& node(std::size_t l) const { return nodes_[l]; }
  std::size_t index_of(std::string_view name) const;
  bool adjacent(std::size_t a, std::size_t b) const { return adj_[a * size() + b] != 0; }
  // L x L 0/1 matrix, self-loops included.
  Array adjacency() const;
  bool connected() const;

  // Builder interface.
  std::size_t add_node(std::string name, Shape shape);
  void connect(std::size_t a, std::size_t b);

 private:
  std::vector<ParamNode> nodes_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::uint8_t> adj_;
};

// Nodes cover every weight and bias, output head included. Edges: tensors of
// one affine transform are mutually connected; tensor groups whose ops are
// directly linked by dataflow are fully connected to each other; every node
// has a self-loop.
ParamGraph build_param_graph(const TargetArch& arch);

struct ParamSet {
  std::vector<Tensor> values;
};

struct GruWeights {
  Tensor wx_r, wh_r, b_r;
  Tensor wx_z, wh_z, b_z;
  Tensor wx_g, wh_g, b_g;
};

struct LstmWeights {
  Tensor wx_i, wh_i, b_i;
  Tensor wx_f, wh_f, b_f;
  Tensor wx_g, wh_g, b_g;
  Tensor wx_o, wh_o, b_o;
};

// Batched over rows: x is [P, in], h and c are [P, hidden]; W_x is [in, hidden],
// W_h is [hidden, hidden], biases are [hidden].
Tensor gru_step(const Tensor& x, const Tensor& h, const GruWeights& w);
std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmWeights& w);

GruWeights gru_weights(const ParamGraph& graph, const ParamSet& params, const std::string& prefix);
LstmWeights lstm_weights(const ParamGraph& graph, const ParamSet& params, const std::string& prefix);

// A batch of P input windows: steps[k] is the [P, input_dim] slice at step k.
struct WindowBatch {
  std::vector<Array> steps;
  std::size_t size() const { return steps.empty() ? 0 : steps.front().rows(); }
};

// Returns [P, s_out * input_dim], step-major within each row.
Tensor forecast(const TargetArch& arch, const ParamGraph& graph, const ParamSet& params,
                Tape& tape, const WindowBatch& windows);

// Same, with the input steps given as tensors (for differentiable input
// transforms). `windows` must hold the matching raw values; the NCDE control
// path is fitted to them and, when `path_scale` ([dim]) is valid, its
// increments are scaled per channel.
Tensor forecast_tensors(const TargetArch& arch, const ParamGraph& graph, const ParamSet& params, Tape& tape,
                        std::span<const Tensor> steps, const WindowBatch& windows, const Tensor& path_scale);

// Single-window convenience: window is s_in x dim(x), result s_out x dim(x).
Array forecast(const TargetArch& arch, const ParamGraph& graph, const ParamStore& params,
               const Array& window);

// Xavier weights, zero biases; names and order follow the graph.
ParamStore init_target_params(const ParamGraph& graph, Rng& rng);

// Leaves for a store laid out in graph order.
ParamSet bind_param_set(Tape& tape, const ParamStore& store, const ParamGraph& graph);

}  // namespace hypergpa
