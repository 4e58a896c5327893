#include "hypergpa/target.hpp"

#include <algorithm>

namespace hypergpa {

std::string_view to_string(TargetKind kind) {
  switch (kind) {
    case TargetKind::Gru: return "gru";
    case TargetKind::Lstm: return "lstm";
    case TargetKind::SeqToSeqGru: return "seq2seq-gru";
    case TargetKind::SeqToSeqLstm: return "seq2seq-lstm";
    case TargetKind::OdeRnn: return "odernn";
    case TargetKind::Ncde: return "ncde";
  }
  return "?";
}

TargetKind parse_target_kind(std::string_view text) {
  for (TargetKind k : {TargetKind::Gru, TargetKind::Lstm, TargetKind::SeqToSeqGru,
                       TargetKind::SeqToSeqLstm, TargetKind::OdeRnn, TargetKind::Ncde}) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown target kind '" + std::string(text) + "'");
}

bool is_gru_family(TargetKind kind) {
  return kind == TargetKind::Gru || kind == TargetKind::SeqToSeqGru;
}

void TargetArch::validate() const {
  if (input_dim == 0 || hidden_dim == 0 || layers == 0 || s_in == 0 || s_out == 0) {
    throw Error("target architecture dimensions must be positive");
  }
  if ((kind == TargetKind::OdeRnn || kind == TargetKind::Ncde) && layers != 1) {
    throw Error("odernn and ncde targets support a single layer");
  }
  if (kind == TargetKind::Ncde && s_in < 2) throw Error("ncde target needs s_in >= 2");
  if (solver_steps < 1) throw Error("target solver steps must be >= 1");
}

// ---------------------------------------------------------------------------

std::size_t ParamGraph::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw Error("parameter graph has no node '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamGraph::add_node(std::string name, Shape shape) {
  if (index_.count(name)) throw Error("duplicate parameter node '" + name + "'");
  const std::size_t old = nodes_.size();
  const std::size_t n = old + 1;
  std::vector<std::uint8_t> grown(n * n, 0);
  for (std::size_t a = 0; a < old; ++a)
    for (std::size_t b = 0; b < old; ++b) grown[a * n + b] = adj_[a * old + b];
  grown[old * n + old] = 1;
  adj_ = std::move(grown);
  index_.emplace(name, old);
  nodes_.push_back(ParamNode{std::move(name), std::move(shape)});
  return old;
}

void ParamGraph::connect(std::size_t a, std::size_t b) {
  adj_[a * size() + b] = 1;
  adj_[b * size() + a] = 1;
}

Array ParamGraph::adjacency() const {
  Array out({size(), size()});
  for (std::size_t i = 0; i < adj_.size(); ++i) out[i] = adj_[i];
  return out;
}

bool ParamGraph::connected() const {
  if (nodes_.empty()) return false;
  std::vector<bool> seen(size(), false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < size(); ++v) {
      if (adjacent(u, v) && !seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  return std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
}

namespace {

using Group = std::vector<std::size_t>;

struct Cell {
  std::vector<Group> gates;
  std::vector<std::size_t> writers;  // gates whose output forms the emitted state
};

Group add_group(ParamGraph& g, std::vector<std::pair<std::string, Shape>> members) {
  Group out;
  for (auto& [name, shape] : members) out.push_back(g.add_node(std::move(name), std::move(shape)));
  for (std::size_t a : out)
    for (std::size_t b : out) g.connect(a, b);
  return out;
}

void link(ParamGraph& g, const Group& a, const Group& b) {
  for (std::size_t x : a)
    for (std::size_t y : b) g.connect(x, y);
}

Group merge(const std::vector<Group>& groups, const std::vector<std::size_t>& which) {
  Group out;
  for (std::size_t i : which) out.insert(out.end(), groups[i].begin(), groups[i].end());
  return out;
}

Group all_of(const std::vector<Group>& groups) {
  Group out;
  for (const Group& gr : groups) out.insert(out.end(), gr.begin(), gr.end());
  return out;
}

Group affine_group(ParamGraph& g, const std::string& prefix, std::size_t in, std::size_t out) {
  return add_group(g, {{prefix + ".W", {in, out}}, {prefix + ".b", {out}}});
}

Cell add_cell(ParamGraph& g, const std::string& prefix, bool lstm, std::size_t in, std::size_t hidden) {
  static const char* gru_gates[] = {"r", "z", "g"};
  static const char* lstm_gates[] = {"i", "f", "g", "o"};
  Cell cell;
  const std::size_t count = lstm ? 4 : 3;
  for (std::size_t k = 0; k < count; ++k) {
    const std::string p = prefix + "." + (lstm ? lstm_gates[k] : gru_gates[k]);
    cell.gates.push_back(
        add_group(g, {{p + ".W_x", {in, hidden}}, {p + ".W_h", {hidden, hidden}}, {p + ".b", {hidden}}}));
  }
  // Every gate reads the recurrent state that the others produce.
  for (std::size_t a = 0; a < count; ++a)
    for (std::size_t b = a + 1; b < count; ++b) link(g, cell.gates[a], cell.gates[b]);
  cell.writers = lstm ? std::vector<std::size_t>{3} : std::vector<std::size_t>{1, 2};
  return cell;
}

std::vector<Cell> add_stack(ParamGraph& g, const std::string& prefix, bool lstm, const TargetArch& arch) {
  std::vector<Cell> cells;
  for (std::size_t l = 0; l < arch.layers; ++l) {
    const std::size_t in = l == 0 ? arch.input_dim : arch.hidden_dim;
    cells.push_back(add_cell(g, prefix + std::to_string(l), lstm, in, arch.hidden_dim));
    if (l > 0) {
      link(g, merge(cells[l - 1].gates, cells[l - 1].writers), all_of(cells[l].gates));
    }
  }
  return cells;
}

}  // namespace

ParamGraph build_param_graph(const TargetArch& arch) {
  arch.validate();
  ParamGraph g;
  const std::size_t dx = arch.input_dim, dh = arch.hidden_dim;
  switch (arch.kind) {
    case TargetKind::Gru:
    case TargetKind::Lstm: {
      const bool lstm = arch.kind == TargetKind::Lstm;
      auto cells = add_stack(g, lstm ? "lstm" : "gru", lstm, arch);
      Group head = affine_group(g, "head", dh, arch.s_out * dx);
      link(g, merge(cells.back().gates, cells.back().writers), head);
      break;
    }
    case TargetKind::SeqToSeqGru:
    case TargetKind::SeqToSeqLstm: {
      const bool lstm = arch.kind == TargetKind::SeqToSeqLstm;
      const std::string cell = lstm ? "lstm" : "gru";
      auto enc = add_stack(g, "enc." + cell, lstm, arch);
      auto dec = add_stack(g, "dec." + cell, lstm, arch);
      for (std::size_t l = 0; l < arch.layers; ++l) {
        link(g, merge(enc[l].gates, enc[l].writers), all_of(dec[l].gates));
      }
      Group head = affine_group(g, "head", dh, dx);
      link(g, merge(dec.back().gates, dec.back().writers), head);
      link(g, head, all_of(dec.front().gates));  // predictions feed back as decoder input
      break;
    }
    case TargetKind::OdeRnn: {
      Group f1 = affine_group(g, "ode.l1", dh, dh);
      Group f2 = affine_group(g, "ode.l2", dh, dh);
      link(g, f1, f2);
      Cell cell = add_cell(g, "gru0", false, dx, dh);
      link(g, f2, all_of(cell.gates));
      link(g, merge(cell.gates, cell.writers), f1);
      Group head = affine_group(g, "head", dh, arch.s_out * dx);
      link(g, merge(cell.gates, cell.writers), head);
      break;
    }
    case TargetKind::Ncde: {
      Group init = affine_group(g, "init", dx, dh);
      Group f1 = affine_group(g, "field.l1", dh, dh);
      Group f2 = affine_group(g, "field.l2", dh, dh * dx);
      Group head = affine_group(g, "head", dh, arch.s_out * dx);
      link(g, init, f1);
      link(g, f1, f2);
      link(g, f2, head);
      link(g, init, head);
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

Tensor gru_step(const Tensor& x, const Tensor& h, const GruWeights& w) {
  Tensor r = sigmoid(add(add(matmul(x, w.wx_r), matmul(h, w.wh_r)), w.b_r));
  Tensor z = sigmoid(add(add(matmul(x, w.wx_z), matmul(h, w.wh_z)), w.b_z));
  Tensor g = tanh(add(add(matmul(x, w.wx_g), mul(r, matmul(h, w.wh_g))), w.b_g));
  return add(mul(one_minus(z), g), mul(z, h));
}

std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h, const Tensor& c,
                                    const LstmWeights& w) {
  Tensor i = sigmoid(add(add(matmul(x, w.wx_i), matmul(h, w.wh_i)), w.b_i));
  Tensor f = sigmoid(add(add(matmul(x, w.wx_f), matmul(h, w.wh_f)), w.b_f));
  Tensor g = tanh(add(add(matmul(x, w.wx_g), matmul(h, w.wh_g)), w.b_g));
  Tensor o = sigmoid(add(add(matmul(x, w.wx_o), matmul(h, w.wh_o)), w.b_o));
  Tensor c_next = add(mul(f, c), mul(i, g));
  return {mul(o, tanh(c_next)), c_next};
}

namespace {

const Tensor& lookup(const ParamGraph& graph, const ParamSet& params, const std::string& name) {
  const std::size_t l = graph.index_of(name);
  if (l >= params.values.size()) throw Error("parameter set is missing node '" + name + "'");
  const Tensor& t = params.values[l];
  if (t.shape() != graph.node(l).shape) {
    throw Error("parameter '" + name + "' has shape " + shape_string(t.shape()) + ", expected " +
                shape_string(graph.node(l).shape));
  }
  return t;
}

}  // namespace

GruWeights gru_weights(const ParamGraph& graph, const ParamSet& params, const std::string& prefix) {
  auto get = [&](const char* gate, const char* what) {
    return lookup(graph, params, prefix + "." + gate + "." + what);
  };
  return GruWeights{get("r", "W_x"), get("r", "W_h"), get("r", "b"),
                    get("z", "W_x"), get("z", "W_h"), get("z", "b"),
                    get("g", "W_x"), get("g", "W_h"), get("g", "b")};
}

LstmWeights lstm_weights(const ParamGraph& graph, const ParamSet& params, const std::string& prefix) {
  auto get = [&](const char* gate, const char* what) {
    return lookup(graph, params, prefix + "." + gate + "." + what);
  };
  return LstmWeights{get("i", "W_x"), get("i", "W_h"), get("i", "b"), get("f", "W_x"),
                     get("f", "W_h"), get("f", "b"),   get("g", "W_x"), get("g", "W_h"),
                     get("g", "b"),   get("o", "W_x"), get("o", "W_h"), get("o", "b")};
}

namespace {

struct RecurrentStack {
  bool lstm = false;
  std::vector<GruWeights> gru;
  std::vector<LstmWeights> lstm_w;
  std::vector<Tensor> h, c;

  RecurrentStack(const ParamGraph& graph, const ParamSet& params, const std::string& prefix,
                 bool is_lstm, std::size_t layers, Tape& tape, std::size_t batch, std::size_t hidden)
      : lstm(is_lstm) {
    for (std::size_t l = 0; l < layers; ++l) {
      const std::string p = prefix + std::to_string(l);
      if (lstm) {
        lstm_w.push_back(lstm_weights(graph, params, p));
      } else {
        gru.push_back(gru_weights(graph, params, p));
      }
      h.push_back(tape.constant(Array({batch, hidden}, 0.0)));
      c.push_back(tape.constant(Array({batch, hidden}, 0.0)));
    }
  }

  // Feeds one input through every layer; returns the top state.
  Tensor step(Tensor x) {
    for (std::size_t l = 0; l < h.size(); ++l) {
      if (lstm) {
        auto [hn, cn] = lstm_step(x, h[l], c[l], lstm_w[l]);
        h[l] = hn;
        c[l] = cn;
      } else {
        h[l] = gru_step(x, h[l], gru[l]);
      }
      x = h[l];
    }
    return x;
  }
};

Tensor ode_field(const Tensor& h, std::span<const Tensor> p) {
  return affine(tanh(affine(h, p[0], p[1])), p[2], p[3]);
}

}  // namespace

Tensor forecast(const TargetArch& arch, const ParamGraph& graph, const ParamSet& params, Tape& tape,
                const WindowBatch& windows) {
  std::vector<Tensor> xs;
  xs.reserve(windows.steps.size());
  for (const Array& s : windows.steps) xs.push_back(tape.constant(s));
  return forecast_tensors(arch, graph, params, tape, xs, windows, Tensor{});
}

Tensor forecast_tensors(const TargetArch& arch, const ParamGraph& graph, const ParamSet& params, Tape& tape,
                        std::span<const Tensor> xs, const WindowBatch& windows, const Tensor& path_scale) {
  if (windows.steps.size() != arch.s_in || xs.size() != arch.s_in) {
    throw Error("forecast: window has " + std::to_string(windows.steps.size()) + " steps, expected " +
                std::to_string(arch.s_in));
  }
  const std::size_t batch = windows.size();
  for (const Array& s : windows.steps) {
    if (s.rank() != 2 || s.shape()[0] != batch || s.shape()[1] != arch.input_dim) {
      throw Error("forecast: window step has shape " + shape_string(s.shape()));
    }
  }
  const std::size_t dh = arch.hidden_dim, dx = arch.input_dim;

  auto head = [&](const Tensor& state) {
    return affine(state, lookup(graph, params, "head.W"), lookup(graph, params, "head.b"));
  };

  Tensor out;
  switch (arch.kind) {
    case TargetKind::Gru:
    case TargetKind::Lstm: {
      const bool lstm = arch.kind == TargetKind::Lstm;
      RecurrentStack stack(graph, params, lstm ? "lstm" : "gru", lstm, arch.layers, tape, batch, dh);
      Tensor top;
      for (const Tensor& x : xs) top = stack.step(x);
      out = head(top);
      break;
    }
    case TargetKind::SeqToSeqGru:
    case TargetKind::SeqToSeqLstm: {
      const bool lstm = arch.kind == TargetKind::SeqToSeqLstm;
      const std::string cell = lstm ? "lstm" : "gru";
      RecurrentStack enc(graph, params, "enc." + cell, lstm, arch.layers, tape, batch, dh);
      for (const Tensor& x : xs) enc.step(x);
      RecurrentStack dec(graph, params, "dec." + cell, lstm, arch.layers, tape, batch, dh);
      dec.h = enc.h;
      dec.c = enc.c;
      Tensor input = xs.back();
      std::vector<Tensor> preds;
      for (std::size_t s = 0; s < arch.s_out; ++s) {
        Tensor y = head(dec.step(input));
        preds.push_back(y);
        input = y;
      }
      out = concat_cols(preds);
      break;
    }
    case TargetKind::OdeRnn: {
      const std::vector<Tensor> fp{lookup(graph, params, "ode.l1.W"), lookup(graph, params, "ode.l1.b"),
                                   lookup(graph, params, "ode.l2.W"), lookup(graph, params, "ode.l2.b")};
      const GruWeights cell = gru_weights(graph, params, "gru0");
      const Dynamics flow = [](Tape&, double, const Tensor& h, std::span<const Tensor> p) {
        return ode_field(h, p);
      };
      Tensor h = tape.constant(Array({batch, dh}, 0.0));
      for (std::size_t k = 0; k < xs.size(); ++k) {
        if (k > 0) {
          const double t = static_cast<double>(k);
          h = integrate_ode(h, flow, fp, uniform_grid(t, t + 1.0, arch.solver_steps), GradMode::Backprop);
        }
        h = gru_step(xs[k], h, cell);
      }
      out = head(h);
      break;
    }
    case TargetKind::Ncde: {
      const std::vector<double> times = index_times(arch.s_in);
      auto paths = std::make_shared<std::vector<ControlPath>>();
      paths->reserve(batch);
      for (std::size_t p = 0; p < batch; ++p) {
        Array obs({arch.s_in, dx});
        for (std::size_t k = 0; k < arch.s_in; ++k)
          for (std::size_t c = 0; c < dx; ++c) obs.at(k, c) = windows.steps[k].at(p, c);
        paths->push_back(ControlPath::fit(times, obs));
      }
      std::vector<Tensor> fp{lookup(graph, params, "field.l1.W"), lookup(graph, params, "field.l1.b"),
                             lookup(graph, params, "field.l2.W"), lookup(graph, params, "field.l2.b")};
      if (path_scale.valid()) fp.push_back(path_scale);
      const CdeField field = [dh, dx](Tape&, const Tensor& h, std::span<const Tensor> p) {
        Tensor f = tanh(affine(tanh(affine(h, p[0], p[1])), p[2], p[3]));
        if (p.size() == 4) return f;
        const std::size_t rows = h.value().rows();
        return reshape(mul(reshape(f, {rows * dh, dx}), p[4]), {rows, dh * dx});
      };
      Tensor h0 = affine(xs.front(), lookup(graph, params, "init.W"), lookup(graph, params, "init.b"));
      SolverConfig cfg{arch.solver_steps, GradMode::Backprop};
      Tensor h = integrate_cde(h0, field, fp, paths, times.front(), times.back(), cfg);
      out = head(h);
      break;
    }
  }
  if (!out.value().all_finite()) throw Error("forecast produced non-finite output");
  return out;
}

ParamSet bind_param_set(Tape& tape, const ParamStore& store, const ParamGraph& graph) {
  ParamSet set;
  set.values.reserve(graph.size());
  for (const ParamNode& node : graph.nodes()) {
    const Array& v = store.get(node.name);
    if (v.shape() != node.shape) {
      throw Error("parameter '" + node.name + "' has shape " + shape_string(v.shape()) +
                  ", expected " + shape_string(node.shape));
    }
    set.values.push_back(tape.leaf(v));
  }
  return set;
}

Array forecast(const TargetArch& arch, const ParamGraph& graph, const ParamStore& params,
               const Array& window) {
  if (window.rank() != 2 || window.shape()[0] != arch.s_in || window.shape()[1] != arch.input_dim) {
    throw Error("forecast: window must be s_in x dim(x)");
  }
  WindowBatch batch;
  for (std::size_t k = 0; k < arch.s_in; ++k) {
    Array step({1, arch.input_dim});
    for (std::size_t c = 0; c < arch.input_dim; ++c) step[c] = window.at(k, c);
    batch.steps.push_back(std::move(step));
  }
  Tape tape;
  ParamSet set = bind_param_set(tape, params, graph);
  return forecast(arch, graph, set, tape, batch).value().reshaped({arch.s_out, arch.input_dim});
}

ParamStore init_target_params(const ParamGraph& graph, Rng& rng) {
  ParamStore store;
  for (const ParamNode& node : graph.nodes()) store.add(node.name, xavier_uniform(node.shape, rng));
  return store;
}

}  // namespace hypergpa
