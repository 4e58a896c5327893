#include "hypergpa/l2.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hypergpa/l1.hpp"

namespace hypergpa {

std::string_view to_string(GraphFn fn) {
  switch (fn) {
    case GraphFn::Gat: return "gat";
    case GraphFn::Gcn: return "gcn";
    case GraphFn::Agc: return "agc";
  }
  return "?";
}

GraphFn parse_graph_fn(std::string_view text) {
  for (GraphFn f : {GraphFn::Gat, GraphFn::Gcn, GraphFn::Agc}) {
    if (to_string(f) == text) return f;
  }
  throw Error("unknown graph function '" + std::string(text) + "'");
}

void L2Config::validate() const {
  if (repr_dim == 0 || query_dim == 0 || refined_dim == 0 || layers == 0 || hidden == 0 ||
      agc_embed_dim == 0) {
    throw Error("L2 dimensions must be positive");
  }
  if (candidates < 1) throw Error("candidate count must be >= 1");
  if (heads == 0 || hidden % heads != 0) throw Error("GAT hidden size must be a multiple of the head count");
}

namespace {

constexpr double kMasked = -1e30;
constexpr double kLeakySlope = 0.2;

std::string layer_name(std::size_t k, const char* what) {
  return "l2.g" + std::to_string(k) + "." + what;
}

std::size_t layer_in(const L2Config& cfg, std::size_t k) { return k == 0 ? cfg.query_dim : cfg.hidden; }
bool is_last(const L2Config& cfg, std::size_t k) { return k + 1 == cfg.layers; }

// Output width of one GAT head at layer k.
std::size_t head_width(const L2Config& cfg, std::size_t k) {
  return is_last(cfg, k) ? cfg.refined_dim : cfg.hidden / cfg.heads;
}

std::size_t layer_out(const L2Config& cfg, std::size_t k) {
  return is_last(cfg, k) ? cfg.refined_dim : cfg.hidden;
}

Array block_diagonal(const Array& a, std::size_t copies, double off) {
  const std::size_t n = a.rows();
  Array out({n * copies, n * copies}, off);
  for (std::size_t b = 0; b < copies; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) out.at(b * n + i, b * n + j) = a.at(i, j);
  return out;
}

Tensor gat_layer(const BoundParams& params, const L2Config& cfg, std::size_t k, const Tensor& x,
                 const Tensor& mask) {
  const std::size_t dk = head_width(cfg, k);
  Tensor wh = matmul(x, params[layer_name(k, "W")]);
  const Tensor& a_src = params[layer_name(k, "a_src")];
  const Tensor& a_dst = params[layer_name(k, "a_dst")];
  std::vector<Tensor> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Tensor wh_h = slice_cols(wh, h * dk, (h + 1) * dk);
    Tensor s_src = matmul(wh_h, slice_cols(a_src, h, h + 1));
    Tensor s_dst = matmul(wh_h, slice_cols(a_dst, h, h + 1));
    Tensor e = add(leaky_relu(add(s_dst, transpose(s_src)), kLeakySlope), mask);
    heads.push_back(matmul(softmax(e), wh_h));
  }
  const Tensor& b = params[layer_name(k, "b")];
  if (!is_last(cfg, k)) return tanh(add(concat_cols(heads), b));
  Tensor acc = heads.front();
  for (std::size_t h = 1; h < heads.size(); ++h) acc = add(acc, heads[h]);
  return add(scale(acc, 1.0 / static_cast<double>(cfg.heads)), b);
}

// D^{-1/2} A D^{-1/2}; A already carries self-loops.
Array gcn_normalized(const Array& a) {
  const std::size_t n = a.rows();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i] += a.at(i, j);
  Array out({n, n});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) out.at(i, j) = a.at(i, j) / std::sqrt(d[i] * d[j]);
  return out;
}

}  // namespace

void init_l2_params(ParamStore& store, const L2Config& cfg, const ParamGraph& graph, Rng& rng) {
  cfg.validate();
  const std::size_t n = graph.size();
  if (n == 0) throw Error("parameter graph is empty");
  store.add("l2.phi.W", xavier_uniform({cfg.repr_dim, n * cfg.query_dim}, rng));
  switch (cfg.graph_fn) {
    case GraphFn::Gat:
      for (std::size_t k = 0; k < cfg.layers; ++k) {
        const std::size_t dk = head_width(cfg, k);
        store.add(layer_name(k, "W"), xavier_uniform({layer_in(cfg, k), dk * cfg.heads}, rng));
        store.add(layer_name(k, "a_src"), xavier_uniform({dk, cfg.heads}, dk, 1, rng));
        store.add(layer_name(k, "a_dst"), xavier_uniform({dk, cfg.heads}, dk, 1, rng));
        store.add(layer_name(k, "b"), Array({layer_out(cfg, k)}, 0.0));
      }
      break;
    case GraphFn::Gcn:
    case GraphFn::Agc:
      if (cfg.graph_fn == GraphFn::Agc) {
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.agc_embed_dim)));
        Array e({n, cfg.agc_embed_dim});
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = dist(rng);
        store.add("l2.E", std::move(e));
      }
      for (std::size_t k = 0; k < cfg.layers; ++k) {
        store.add(layer_name(k, "W"), xavier_uniform({layer_in(cfg, k), layer_out(cfg, k)}, rng));
        store.add(layer_name(k, "b"), Array({layer_out(cfg, k)}, 0.0));
      }
      break;
  }
  for (const ParamNode& node : graph.nodes()) {
    const std::size_t numel = shape_numel(node.shape);
    Array bank({cfg.candidates, numel}, 0.0);
    if (node.shape.size() >= 2) {
      for (std::size_t c = 0; c < cfg.candidates; ++c) {
        Array cand = xavier_uniform(node.shape, rng);
        std::copy(cand.ptr(), cand.ptr() + numel, bank.ptr() + c * numel);
      }
    }
    store.add("bank." + node.name, std::move(bank));
  }
  for (const ParamNode& node : graph.nodes()) {
    store.add("key." + node.name, xavier_uniform({cfg.refined_dim, cfg.candidates}, rng));
  }
}

Tensor initial_queries(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                       const Tensor& h) {
  if (h.value().rank() != 2 || h.value().cols() != cfg.repr_dim) {
    throw Error("initial_queries: representation has shape " + shape_string(h.shape()));
  }
  const std::size_t batch = h.value().rows();
  Tensor z = matmul(h, params["l2.phi.W"]);
  return reshape(z, {batch * graph.size(), cfg.query_dim});
}

Tensor refine_queries(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                      const Tensor& z) {
  const std::size_t n = graph.size();
  if (n == 0) throw Error("refine_queries: empty graph");
  if (z.value().rank() != 2 || z.value().rows() % n != 0 || z.value().cols() != cfg.query_dim) {
    throw Error("refine_queries: queries have shape " + shape_string(z.shape()));
  }
  const std::size_t copies = z.value().rows() / n;
  Tape& tape = z.tape();
  Tensor x = z;
  switch (cfg.graph_fn) {
    case GraphFn::Gat: {
      Array adj = graph.adjacency();
      Array mask({n, n});
      for (std::size_t i = 0; i < adj.size(); ++i) mask[i] = adj[i] != 0.0 ? 0.0 : kMasked;
      Tensor m = tape.constant(block_diagonal(mask, copies, kMasked));
      for (std::size_t k = 0; k < cfg.layers; ++k) x = gat_layer(params, cfg, k, x, m);
      break;
    }
    case GraphFn::Gcn: {
      Tensor a = tape.constant(block_diagonal(gcn_normalized(graph.adjacency()), copies, 0.0));
      for (std::size_t k = 0; k < cfg.layers; ++k) {
        x = affine(matmul(a, x), params[layer_name(k, "W")], params[layer_name(k, "b")]);
        if (!is_last(cfg, k)) x = tanh(x);
      }
      break;
    }
    case GraphFn::Agc: {
      const Tensor& e = params["l2.E"];
      for (std::size_t k = 0; k < cfg.layers; ++k) {
        std::vector<Tensor> parts;
        for (std::size_t b = 0; b < copies; ++b) {
          parts.push_back(agc(slice_rows(x, b * n, (b + 1) * n), e, params[layer_name(k, "W")],
                              params[layer_name(k, "b")]));
        }
        x = concat_rows(parts);
        if (!is_last(cfg, k)) x = tanh(x);
      }
      break;
    }
  }
  return x;
}

std::vector<Tensor> attention_coeffs(const BoundParams& params, const L2Config& cfg,
                                     const ParamGraph& graph, const Tensor& q) {
  const std::size_t n = graph.size();
  if (q.value().rank() != 2 || q.value().cols() != cfg.refined_dim || q.value().rows() % n != 0) {
    throw Error("attention_coeffs: queries have shape " + shape_string(q.shape()));
  }
  const std::size_t batch = q.value().rows() / n;
  Tensor wide = reshape(q, {batch, n * cfg.refined_dim});
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t l = 0; l < n; ++l) {
    Tensor ql = slice_cols(wide, l * cfg.refined_dim, (l + 1) * cfg.refined_dim);
    out.push_back(softmax(matmul(ql, params["key." + graph.node(l).name])));
  }
  return out;
}

std::vector<ParamSet> assemble_params(const BoundParams& params, const ParamGraph& graph,
                                      const std::vector<Tensor>& coeffs) {
  if (coeffs.size() != graph.size()) throw Error("assemble_params: one coefficient tensor per node required");
  const std::size_t batch = coeffs.front().value().rows();
  std::vector<ParamSet> out(batch);
  for (std::size_t l = 0; l < graph.size(); ++l) {
    const ParamNode& node = graph.node(l);
    const Tensor& bank = params["bank." + node.name];
    if (coeffs[l].value().cols() != bank.value().rows() || coeffs[l].value().rows() != batch) {
      throw Error("assemble_params: coefficients for '" + node.name + "' have shape " +
                  shape_string(coeffs[l].shape()) + " for " + std::to_string(bank.value().rows()) +
                  " candidates");
    }
    if (bank.value().cols() != shape_numel(node.shape)) {
      throw Error("assemble_params: candidate size mismatch for '" + node.name + "'");
    }
    Tensor blended = matmul(coeffs[l], bank);
    for (std::size_t b = 0; b < batch; ++b) {
      out[b].values.push_back(reshape(batch == 1 ? blended : slice_rows(blended, b, b + 1), node.shape));
    }
  }
  return out;
}

Selection argmax_select(const BoundParams& params, const ParamGraph& graph,
                        const std::vector<Tensor>& coeffs) {
  if (coeffs.size() != graph.size()) throw Error("argmax_select: one coefficient tensor per node required");
  const std::size_t batch = coeffs.front().value().rows();
  Selection sel;
  sel.indices.assign(batch, std::vector<std::size_t>(graph.size(), 0));
  sel.params.resize(batch);
  for (std::size_t l = 0; l < graph.size(); ++l) {
    const ParamNode& node = graph.node(l);
    const Tensor& bank = params["bank." + node.name];
    const Array& a = coeffs[l].value();
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < a.cols(); ++c) {
        if (a.at(b, c) > a.at(b, best)) best = c;
      }
      sel.indices[b][l] = best;
      sel.params[b].values.push_back(reshape(slice_rows(bank, best, best + 1), node.shape));
    }
  }
  return sel;
}

Generated generate(const BoundParams& params, const L2Config& cfg, const ParamGraph& graph,
                   const Tensor& h) {
  Tensor q = refine_queries(params, cfg, graph, initial_queries(params, cfg, graph, h));
  Generated out;
  out.coeffs = attention_coeffs(params, cfg, graph, q);
  out.blended = assemble_params(params, graph, out.coeffs);
  out.selected = argmax_select(params, graph, out.coeffs);
  return out;
}

}  // namespace hypergpa
