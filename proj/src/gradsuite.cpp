#include "hypergpa/gradsuite.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "hypergpa/baselines.hpp"
#include "hypergpa/l1.hpp"
#include "hypergpa/l2.hpp"
#include "hypergpa/target.hpp"
#include "hypergpa/training.hpp"

namespace hypergpa {

namespace {

using Builder = std::function<Tensor(Tape&, const BoundParams&)>;

struct CaseDef {
  std::string name;
  double tolerance;
  std::size_t sample;  // entries per tensor, 0 = all
  std::function<ParamStore(Rng&)> init;
  Builder build;
};

Array randn(const Shape& shape, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> dist(0.0, sd);
  Array a(shape);
  for (std::size_t k = 0; k < a.size(); ++k) a[k] = dist(rng);
  return a;
}

// Fixed pseudo-random projection of t onto a scalar.
Tensor probe(const Tensor& t, double salt) {
  Array w(t.value().shape());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::cos(0.37 * static_cast<double>(k) + salt) + 0.1;
  return sum(mul(t, t.tape().constant(std::move(w))));
}

Tensor probe_all(const std::vector<Tensor>& ts) {
  Tensor acc = probe(ts.front(), 0.0);
  for (std::size_t i = 1; i < ts.size(); ++i) acc = add(acc, probe(ts[i], static_cast<double>(i)));
  return acc;
}

void add_gru(ParamStore& s, const std::string& p, std::size_t in, std::size_t h, Rng& rng) {
  for (const char* g : {"r", "z", "g"}) {
    s.add(p + g + ".W_x", randn({in, h}, rng, 0.5));
    s.add(p + g + ".W_h", randn({h, h}, rng, 0.5));
    s.add(p + g + ".b", randn({h}, rng, 0.3));
  }
}

void add_lstm(ParamStore& s, const std::string& p, std::size_t in, std::size_t h, Rng& rng) {
  for (const char* g : {"i", "f", "g", "o"}) {
    s.add(p + g + ".W_x", randn({in, h}, rng, 0.5));
    s.add(p + g + ".W_h", randn({h, h}, rng, 0.5));
    s.add(p + g + ".b", randn({h}, rng, 0.3));
  }
}

using NameFilter = std::function<bool(const std::string&)>;

void add_subset(ParamStore& s, const ParamStore& full, const NameFilter& keep) {
  for (std::size_t i = 0; i < full.size(); ++i)
    if (keep(full.name(i))) s.add(full.name(i), full.value(i));
}

void add_l1_subset(ParamStore& s, const L1Config& c, Rng& rng, const NameFilter& keep) {
  ParamStore full;
  init_l1_params(full, c, rng);
  add_subset(s, full, keep);
}

void add_l2_subset(ParamStore& s, const L2Config& c, const ParamGraph& g, Rng& rng, const NameFilter& keep) {
  ParamStore full;
  init_l2_params(full, c, g, rng);
  add_subset(s, full, keep);
}

NameFilter prefixed(std::string prefix) {
  return [prefix](const std::string& n) { return n.starts_with(prefix); };
}

L1Config small_l1() {
  L1Config c;
  c.series = 3;
  c.input_dim = 2;
  c.hidden_dim = 4;
  c.gamma_hidden = 5;
  c.gamma_layers = 2;
  c.embed_dim = 2;
  c.field_hidden = 5;
  c.solver.steps_per_interval = 2;
  return c;
}

L2Config small_l2(GraphFn fn) {
  L2Config c;
  c.repr_dim = 4;
  c.query_dim = 6;
  c.refined_dim = 5;
  c.heads = 2;
  c.layers = 2;
  c.hidden = 4;
  c.candidates = 3;
  c.agc_embed_dim = 3;
  c.graph_fn = fn;
  return c;
}

TargetArch small_arch(TargetKind kind) {
  TargetArch a;
  a.kind = kind;
  a.input_dim = 2;
  a.hidden_dim = 3;
  a.s_in = 4;
  a.s_out = 2;
  a.solver_steps = 2;
  return a;
}

std::vector<Array> toy_series(std::size_t m, std::size_t t, std::size_t d) {
  std::vector<Array> out;
  for (std::size_t i = 0; i < m; ++i) {
    Array a({t, d});
    for (std::size_t k = 0; k < t; ++k)
      for (std::size_t c = 0; c < d; ++c)
        a.at(k, c) = std::sin(0.7 * static_cast<double>(k) + static_cast<double>(i + 2 * c)) * (1.0 + 0.2 * i);
    out.push_back(std::move(a));
  }
  return out;
}

WindowBatch toy_windows(std::size_t p, std::size_t t, std::size_t d) {
  WindowBatch w;
  for (std::size_t k = 0; k < t; ++k) {
    Array s({p, d});
    for (std::size_t r = 0; r < p; ++r)
      for (std::size_t c = 0; c < d; ++c)
        s.at(r, c) = std::cos(0.9 * static_cast<double>(k + r) + 0.5 * static_cast<double>(c)) + 0.3 * r;
    w.steps.push_back(std::move(s));
  }
  return w;
}

TimeSeriesCorpus toy_corpus() {
  SynthConfig sc;
  sc.series = 2;
  sc.periods = 5;
  sc.period_length = 8;
  sc.dim = 2;
  sc.seed = 11;
  return normalize(synth_drift(sc)).corpus;
}

std::vector<CaseDef> cases() {
  std::vector<CaseDef> out;

  out.push_back({"gru_step", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("x", randn({3, 2}, rng));
                   s.add("h", randn({3, 4}, rng, 0.5));
                   add_gru(s, "", 2, 4, rng);
                   return s;
                 },
                 [](Tape&, const BoundParams& p) {
                   GruWeights w{p["r.W_x"], p["r.W_h"], p["r.b"], p["z.W_x"], p["z.W_h"],
                                p["z.b"],   p["g.W_x"], p["g.W_h"], p["g.b"]};
                   return probe(gru_step(p["x"], p["h"], w), 0.0);
                 }});

  out.push_back({"lstm_step", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("x", randn({3, 2}, rng));
                   s.add("h", randn({3, 4}, rng, 0.5));
                   s.add("c", randn({3, 4}, rng, 0.5));
                   add_lstm(s, "", 2, 4, rng);
                   return s;
                 },
                 [](Tape&, const BoundParams& p) {
                   LstmWeights w{p["i.W_x"], p["i.W_h"], p["i.b"], p["f.W_x"], p["f.W_h"], p["f.b"],
                                 p["g.W_x"], p["g.W_h"], p["g.b"], p["o.W_x"], p["o.W_h"], p["o.b"]};
                   auto [h, c] = lstm_step(p["x"], p["h"], p["c"], w);
                   return add(probe(h, 0.0), probe(c, 1.0));
                 }});

  out.push_back({"hypergru_step", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("x", randn({3, 2}, rng));
                   s.add("h", randn({3, 4}, rng, 0.5));
                   s.add("hh", randn({3, 3}, rng, 0.5));
                   init_hypergru_params(s, HyperGruCell{"c", 2, 4, {3, 2, false}}, rng);
                   // Perturb the scalings away from their constant initialization.
                   for (std::size_t i = 0; i < s.size(); ++i) {
                     if (s.name(i).find("scale.") != std::string::npos) s.value(i) = randn(s.value(i).shape(), rng, 0.3);
                   }
                   return s;
                 },
                 [](Tape&, const BoundParams& p) {
                   HyperGruState st = hypergru_step(p["x"], {p["h"], p["hh"]}, p, HyperGruCell{"c", 2, 4, {3, 2, false}});
                   return add(probe(st.h, 0.0), probe(st.h_hat, 1.0));
                 }});

  out.push_back({"agc_adjacency", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("e", randn({4, 3}, rng));
                   return s;
                 },
                 [](Tape&, const BoundParams& p) { return probe(agc_adjacency(p["e"]), 0.0); }});

  out.push_back({"agc", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("z", randn({4, 3}, rng));
                   s.add("e", randn({4, 2}, rng));
                   s.add("w", randn({3, 5}, rng, 0.5));
                   s.add("b", randn({5}, rng, 0.3));
                   return s;
                 },
                 [](Tape&, const BoundParams& p) { return probe(agc(p["z"], p["e"], p["w"], p["b"]), 0.0); }});

  for (bool use_agc : {true, false}) {
    const std::string suffix = use_agc ? "" : ".no_agc";
    out.push_back({"field_G" + suffix, 1e-4, 0,
                   [use_agc](Rng& rng) {
                     L1Config c = small_l1();
                     c.use_agc = use_agc;
                     ParamStore s;
                     s.add("h", randn({3, 4}, rng));
                     add_l1_subset(s, c, rng, [use_agc](const std::string& n) {
                       return n.starts_with("l1.agc") || n.starts_with("l1.out") || (use_agc && n == "l1.E");
                     });
                     return s;
                   },
                   [use_agc](Tape&, const BoundParams& p) {
                     L1Config c = small_l1();
                     c.use_agc = use_agc;
                     return probe(field_G(p["h"], field_params(p, c), c), 0.0);
                   }});
  }

  out.push_back({"embed_initial", 1e-4, 0,
                 [](Rng& rng) {
                   ParamStore s;
                   s.add("x", randn({3, 2}, rng));
                   add_l1_subset(s, small_l1(), rng,
                                 [](const std::string& n) { return n.starts_with("l1.gamma"); });
                   return s;
                 },
                 [](Tape&, const BoundParams& p) { return probe(embed_initial(p, small_l1(), p["x"]), 0.0); }});

  for (GradMode mode : {GradMode::Backprop, GradMode::Adjoint}) {
    const std::string suffix = mode == GradMode::Adjoint ? ".adjoint" : ".backprop";
    // The adjoint gradient matches the discrete one only up to solver error.
    const bool adjoint = mode == GradMode::Adjoint;
    out.push_back({"encode_periods" + suffix, 1e-4, 0,
                   [](Rng& rng) {
                     ParamStore s;
                     init_l1_params(s, small_l1(), rng);
                     return s;
                   },
                   [mode, adjoint](Tape&, const BoundParams& p) {
                     L1Config c = small_l1();
                     c.solver.mode = mode;
                     if (adjoint) c.solver.steps_per_interval = 16;
                     const std::vector<Array> series = toy_series(3, 6, 2);
                     return probe(encode_periods(p, c, series), 0.0);
                   }});
  }

  const ParamGraph graph = build_param_graph(small_arch(TargetKind::Gru));
  out.push_back({"phi", 1e-4, 0,
                 [graph](Rng& rng) {
                   ParamStore s;
                   s.add("h", randn({2, 4}, rng));
                   add_l2_subset(s, small_l2(GraphFn::Gat), graph, rng, prefixed("l2.phi"));
                   return s;
                 },
                 [graph](Tape&, const BoundParams& p) {
                   return probe(initial_queries(p, small_l2(GraphFn::Gat), graph, p["h"]), 0.0);
                 }});

  for (GraphFn fn : {GraphFn::Gat, GraphFn::Gcn, GraphFn::Agc}) {
    out.push_back({"refine." + std::string(to_string(fn)), 1e-4, 0,
                   [graph, fn](Rng& rng) {
                     ParamStore s;
                     s.add("z", randn({2 * graph.size(), 6}, rng));
                     add_l2_subset(s, small_l2(fn), graph, rng, [](const std::string& n) {
                       return n.starts_with("l2.") && !n.starts_with("l2.phi");
                     });
                     return s;
                   },
                   [graph, fn](Tape&, const BoundParams& p) {
                     return probe(refine_queries(p, small_l2(fn), graph, p["z"]), 0.0);
                   }});
  }

  out.push_back({"attention", 1e-4, 0,
                 [graph](Rng& rng) {
                   ParamStore s;
                   s.add("q", randn({2 * graph.size(), 5}, rng));
                   add_l2_subset(s, small_l2(GraphFn::Gat), graph, rng, prefixed("key."));
                   return s;
                 },
                 [graph](Tape&, const BoundParams& p) {
                   return probe_all(attention_coeffs(p, small_l2(GraphFn::Gat), graph, p["q"]));
                 }});

  out.push_back({"assembly", 1e-4, 0,
                 [graph](Rng& rng) {
                   ParamStore s;
                   for (std::size_t l = 0; l < graph.size(); ++l) s.add("a" + std::to_string(l), randn({2, 3}, rng));
                   add_l2_subset(s, small_l2(GraphFn::Gat), graph, rng, prefixed("bank."));
                   return s;
                 },
                 [graph](Tape&, const BoundParams& p) {
                   std::vector<Tensor> coeffs;
                   for (std::size_t l = 0; l < graph.size(); ++l) coeffs.push_back(p["a" + std::to_string(l)]);
                   std::vector<Tensor> flat;
                   for (const ParamSet& set : assemble_params(p, graph, coeffs))
                     flat.insert(flat.end(), set.values.begin(), set.values.end());
                   return probe_all(flat);
                 }});

  for (TargetKind kind : {TargetKind::Gru, TargetKind::Lstm, TargetKind::SeqToSeqGru, TargetKind::SeqToSeqLstm,
                          TargetKind::OdeRnn, TargetKind::Ncde}) {
    out.push_back({"forecast." + std::string(to_string(kind)), 1e-4, 0,
                   [kind](Rng& rng) {
                     const ParamGraph g = build_param_graph(small_arch(kind));
                     ParamStore s;
                     for (const ParamNode& n : g.nodes()) s.add(n.name, randn(n.shape, rng, 0.5));
                     return s;
                   },
                   [kind](Tape& tape, const BoundParams& p) {
                     const TargetArch a = small_arch(kind);
                     const ParamGraph g = build_param_graph(a);
                     return probe(forecast(a, g, ParamSet{{p.all().begin(), p.all().end()}}, tape,
                                           toy_windows(3, a.s_in, a.input_dim)),
                                  0.0);
                   }});
  }

  for (TargetKind kind : {TargetKind::Gru, TargetKind::Ncde}) {
    out.push_back({"revin." + std::string(to_string(kind)), 1e-4, 0,
                   [kind](Rng& rng) {
                     DirectModel m = make_direct_model(DirectMethod::Revin, small_arch(kind), 1, rng());
                     m.params.get("s0.revin.gamma") = Array({2}, std::vector<double>{1.3, 0.8});
                     m.params.get("s0.revin.beta") = Array({2}, std::vector<double>{0.2, -0.1});
                     return m.params;
                   },
                   [kind](Tape& tape, const BoundParams& p) {
                     DirectModel m = make_direct_model(DirectMethod::Revin, small_arch(kind), 1, 0);
                     return probe(direct_forecast(m, 0, p, tape, toy_windows(3, 4, 2)), 0.0);
                   }});
  }

  for (double lambda : {0.0, 0.1}) {
    const std::string name = lambda == 0.0 ? "loss.mse1" : "loss.mse1+mse2";
    out.push_back({name, 1e-3, 4,
                   [](Rng& rng) {
                     L1Config l1 = small_l1();
                     l1.series = 2;
                     return make_model(small_arch(TargetKind::Gru), l1, small_l2(GraphFn::Gat), rng()).params;
                   },
                   [lambda](Tape&, const BoundParams& p) {
                     L1Config l1 = small_l1();
                     l1.series = 2;
                     HyperGpaModel model{small_arch(TargetKind::Gru), l1, small_l2(GraphFn::Gat),
                                         build_param_graph(small_arch(TargetKind::Gru)), {}};
                     const TimeSeriesCorpus corpus = toy_corpus();
                     const PeriodBatch batch = make_period_batches(4, 2).front();
                     std::vector<PairBatch> pairs;
                     for (std::size_t i = 0; i < 2; ++i)
                       pairs.push_back(stack_pairs(make_pairs(corpus.block(i, batch.target - 1), 4, 2)));
                     return hypergpa_loss(model, p, corpus, batch, pairs, lambda).loss;
                   }});
  }
  return out;
}

}  // namespace

std::vector<std::string> grad_case_names() {
  std::vector<std::string> names;
  for (const CaseDef& c : cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCase> run_grad_suite(std::uint64_t seed, const std::string& filter) {
  std::vector<GradCase> out;
  for (const CaseDef& c : cases()) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    Rng rng(seed);
    const ParamStore store = c.init(rng);
    std::vector<Array> values;
    for (std::size_t i = 0; i < store.size(); ++i) values.push_back(store.value(i));
    GradCheckOptions opts;
    opts.max_entries_per_param = c.sample;
    opts.seed = seed;
    const Builder& build = c.build;
    GradCheckResult r;
    try {
      r = finite_diff_check(
          [&](Tape& tape, std::span<const Tensor> leaves) {
            BoundParams bound(store, leaves);
            return build(tape, bound);
          },
          values, opts);
    } catch (const Error& e) {
      throw Error("gradcheck case '" + c.name + "': " + e.what());
    }
    out.push_back({c.name, c.tolerance, r});
  }
  return out;
}

}  // namespace hypergpa
