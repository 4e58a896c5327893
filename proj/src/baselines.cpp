#include "hypergpa/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hypergpa {

std::pair<Array, RevinState> revin_apply(const Array& window, const Array& gamma, const Array& beta) {
  if (window.rank() != 2 || window.rows() < 2) throw Error("revin_apply: window must be T x dim with T >= 2");
  const std::size_t t = window.rows(), d = window.cols();
  if (gamma.size() != d || beta.size() != d) throw Error("revin_apply: affine size does not match the window");
  RevinState st{Array({d}, 0.0), Array({d}, 0.0)};
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t k = 0; k < t; ++k) mean += window.at(k, c);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t k = 0; k < t; ++k) var += (window.at(k, c) - mean) * (window.at(k, c) - mean);
    st.mean[c] = mean;
    st.stdev[c] = std::max(std::sqrt(var / static_cast<double>(t)), kRevinEps);
  }
  Array out(window.shape());
  for (std::size_t k = 0; k < t; ++k)
    for (std::size_t c = 0; c < d; ++c)
      out.at(k, c) = (window.at(k, c) - st.mean[c]) / st.stdev[c] * gamma[c] + beta[c];
  return {std::move(out), std::move(st)};
}

Array revin_invert(const Array& outputs, const RevinState& state, const Array& gamma, const Array& beta) {
  const std::size_t d = state.mean.size();
  if (outputs.rank() != 2 || outputs.cols() != d) throw Error("revin_invert: outputs must be n x dim");
  Array out(outputs.shape());
  for (std::size_t k = 0; k < outputs.rows(); ++k)
    for (std::size_t c = 0; c < d; ++c)
      out.at(k, c) = (outputs.at(k, c) - beta[c]) / gamma[c] * state.stdev[c] + state.mean[c];
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const char* const kGates[] = {"r", "z", "g"};
const char* const kScaled[] = {"h", "x", "b"};

std::string hp(const HyperGruCell& c, const std::string& rest) { return c.prefix + "." + rest; }

Tensor norm(const Tensor& v, const BoundParams& params, const HyperGruCell& cell, const std::string& name) {
  if (cell.cfg.identity_norm) return v;
  return add(mul(layer_norm(v), params[hp(cell, name + ".ln_g")]), params[hp(cell, name + ".ln_b")]);
}

}  // namespace

void init_hypergru_params(ParamStore& store, const HyperGruCell& cell, Rng& rng) {
  const std::size_t in = cell.input_dim, h = cell.hidden_dim;
  const std::size_t hh = cell.cfg.hyper_hidden, da = cell.cfg.embed_dim;
  if (in == 0 || h == 0 || hh == 0 || da == 0) throw Error("HyperGRU dimensions must be positive");
  for (const char* y : kGates) {
    const std::string g = std::string(y);
    store.add(hp(cell, g + ".W_x"), xavier_uniform({in, h}, rng));
    store.add(hp(cell, g + ".W_h"), xavier_uniform({h, h}, rng));
    store.add(hp(cell, "ln." + g + ".ln_g"), Array({h}, 1.0));
    store.add(hp(cell, "ln." + g + ".ln_b"), Array({h}, 0.0));
  }
  for (const char* y : kGates) {
    const std::string g = "hyper." + std::string(y);
    store.add(hp(cell, g + ".W_x"), xavier_uniform({in + h, hh}, rng));
    store.add(hp(cell, g + ".W_h"), xavier_uniform({hh, hh}, rng));
    store.add(hp(cell, g + ".b"), Array({hh}, 0.0));
    store.add(hp(cell, g + ".ln_g"), Array({hh}, 1.0));
    store.add(hp(cell, g + ".ln_b"), Array({hh}, 0.0));
  }
  for (const char* y : kGates) {
    for (const char* k : kScaled) {
      const std::string tag = std::string(k) + "." + y;
      store.add(hp(cell, "emb." + tag + ".W"), xavier_uniform({hh, da}, rng));
      store.add(hp(cell, "emb." + tag + ".b"), Array({da}, 0.0));
      store.add(hp(cell, "scale." + tag + ".W"), Array({da, h}, 0.0));
      store.add(hp(cell, "scale." + tag + ".b"), Array({h}, std::string(k) == "b" ? 0.0 : 1.0));
    }
  }
}

HyperGruState hypergru_step(const Tensor& x, const HyperGruState& state, const BoundParams& params,
                            const HyperGruCell& cell) {
  const Tensor& h = state.h;
  const Tensor& hh = state.h_hat;
  if (x.value().cols() != cell.input_dim || h.value().cols() != cell.hidden_dim ||
      hh.value().cols() != cell.cfg.hyper_hidden) {
    throw Error("hypergru_step: shape mismatch");
  }

  // Hyper GRU over x^ = x (+) h.
  const std::vector<Tensor> cat{x, h};
  Tensor xh = concat_cols(cat);
  auto hyper_pre = [&](const char* y) {
    const std::string g = "hyper." + std::string(y);
    return std::pair{matmul(xh, params[hp(cell, g + ".W_x")]), matmul(hh, params[hp(cell, g + ".W_h")])};
  };
  auto [rx, rh] = hyper_pre("r");
  auto [zx, zh] = hyper_pre("z");
  auto [gx, gh] = hyper_pre("g");
  Tensor r_hat = sigmoid(norm(add(add(rx, rh), params[hp(cell, "hyper.r.b")]), params, cell, "hyper.r"));
  Tensor z_hat = sigmoid(norm(add(add(zx, zh), params[hp(cell, "hyper.z.b")]), params, cell, "hyper.z"));
  Tensor g_hat =
      tanh(norm(add(add(gx, mul(r_hat, gh)), params[hp(cell, "hyper.g.b")]), params, cell, "hyper.g"));
  Tensor h_hat_next = add(mul(one_minus(z_hat), g_hat), mul(z_hat, hh));

  // Scalings from the previous hyper state.
  auto scaling = [&](const char* k, const char* y) {
    const std::string tag = std::string(k) + "." + y;
    Tensor a = affine(hh, params[hp(cell, "emb." + tag + ".W")], params[hp(cell, "emb." + tag + ".b")]);
    return affine(a, params[hp(cell, "scale." + tag + ".W")], params[hp(cell, "scale." + tag + ".b")]);
  };
  auto gate_terms = [&](const char* y) {
    const std::string g(y);
    return std::pair{mul(scaling("x", y), matmul(x, params[hp(cell, g + ".W_x")])),
                     mul(scaling("h", y), matmul(h, params[hp(cell, g + ".W_h")]))};
  };
  auto [mrx, mrh] = gate_terms("r");
  auto [mzx, mzh] = gate_terms("z");
  auto [mgx, mgh] = gate_terms("g");
  Tensor r = sigmoid(norm(add(add(mrx, mrh), scaling("b", "r")), params, cell, "ln.r"));
  Tensor z = sigmoid(norm(add(add(mzx, mzh), scaling("b", "z")), params, cell, "ln.z"));
  Tensor g = tanh(norm(add(add(mgx, mul(r, mgh)), scaling("b", "g")), params, cell, "ln.g"));
  return {add(mul(one_minus(z), g), mul(z, h)), h_hat_next};
}

// ---------------------------------------------------------------------------

std::string_view to_string(DirectMethod m) {
  switch (m) {
    case DirectMethod::Vanilla: return "vanilla";
    case DirectMethod::Revin: return "revin";
    case DirectMethod::HyperGru: return "hypergru";
  }
  return "?";
}

namespace {

std::string series_prefix(std::size_t i) { return "s" + std::to_string(i) + "."; }

std::vector<HyperGruCell> hyper_cells(const DirectModel& m, std::size_t i, const std::string& stack) {
  std::vector<HyperGruCell> cells;
  for (std::size_t l = 0; l < m.arch.layers; ++l) {
    cells.push_back(HyperGruCell{series_prefix(i) + stack + std::to_string(l),
                                 l == 0 ? m.arch.input_dim : m.arch.hidden_dim, m.arch.hidden_dim, m.hyper});
  }
  return cells;
}

std::vector<std::string> hyper_stacks(TargetKind kind) {
  if (kind == TargetKind::Gru) return {"gru"};
  return {"enc.gru", "dec.gru"};
}

ParamSet series_set(const DirectModel& m, std::size_t i, const BoundParams& params) {
  ParamSet set;
  for (const ParamNode& node : m.graph.nodes()) set.values.push_back(params[series_prefix(i) + node.name]);
  return set;
}

Tensor hypergru_forecast(const DirectModel& m, std::size_t i, const BoundParams& params, Tape& tape,
                         const WindowBatch& windows) {
  const std::size_t p = windows.size();
  auto run = [&](const std::vector<HyperGruCell>& cells, std::vector<HyperGruState>& states, Tensor x) {
    for (std::size_t l = 0; l < cells.size(); ++l) {
      states[l] = hypergru_step(x, states[l], params, cells[l]);
      x = states[l].h;
    }
    return x;
  };
  auto fresh = [&](std::size_t layers) {
    std::vector<HyperGruState> s;
    for (std::size_t l = 0; l < layers; ++l) {
      s.push_back({tape.constant(Array({p, m.arch.hidden_dim}, 0.0)),
                   tape.constant(Array({p, m.hyper.hyper_hidden}, 0.0))});
    }
    return s;
  };
  const std::string pre = series_prefix(i);
  auto head = [&](const Tensor& s) { return affine(s, params[pre + "head.W"], params[pre + "head.b"]); };
  std::vector<Tensor> xs;
  for (const Array& s : windows.steps) xs.push_back(tape.constant(s));

  if (m.arch.kind == TargetKind::Gru) {
    auto cells = hyper_cells(m, i, "gru");
    auto states = fresh(cells.size());
    Tensor top;
    for (const Tensor& x : xs) top = run(cells, states, x);
    return head(top);
  }
  auto enc = hyper_cells(m, i, "enc.gru");
  auto dec = hyper_cells(m, i, "dec.gru");
  auto states = fresh(enc.size());
  for (const Tensor& x : xs) run(enc, states, x);
  Tensor input = xs.back();
  std::vector<Tensor> preds;
  for (std::size_t s = 0; s < m.arch.s_out; ++s) {
    Tensor y = head(run(dec, states, input));
    preds.push_back(y);
    input = y;
  }
  return concat_cols(preds);
}

Tensor revin_forecast(const DirectModel& m, std::size_t i, const BoundParams& params, Tape& tape,
                      const WindowBatch& windows) {
  const std::size_t p = windows.size(), d = m.arch.input_dim, t = windows.steps.size();
  Array mean({p, d}, 0.0), sd({p, d}, 0.0);
  for (const Array& s : windows.steps)
    for (std::size_t k = 0; k < s.size(); ++k) mean[k] += s[k];
  for (std::size_t k = 0; k < mean.size(); ++k) mean[k] /= static_cast<double>(t);
  for (const Array& s : windows.steps)
    for (std::size_t k = 0; k < s.size(); ++k) sd[k] += (s[k] - mean[k]) * (s[k] - mean[k]);
  for (std::size_t k = 0; k < sd.size(); ++k) sd[k] = std::max(std::sqrt(sd[k] / static_cast<double>(t)), kRevinEps);

  const std::string pre = series_prefix(i);
  const Tensor& gamma = params[pre + "revin.gamma"];
  const Tensor& beta = params[pre + "revin.beta"];
  WindowBatch normed;
  std::vector<Tensor> xs;
  for (const Array& s : windows.steps) {
    Array z(s.shape());
    for (std::size_t k = 0; k < s.size(); ++k) z[k] = (s[k] - mean[k]) / sd[k];
    xs.push_back(add(mul(tape.constant(z), gamma), beta));
    normed.steps.push_back(std::move(z));
  }
  Tensor pred = forecast_tensors(m.arch, m.graph, series_set(m, i, params), tape, xs, normed, gamma);

  const std::size_t so = m.arch.s_out;
  Array mean_rep({p * so, d}), sd_rep({p * so, d});
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t s = 0; s < so; ++s)
      for (std::size_t c = 0; c < d; ++c) {
        mean_rep.at(r * so + s, c) = mean.at(r, c);
        sd_rep.at(r * so + s, c) = sd.at(r, c);
      }
  Tensor y = mul(sub(reshape(pred, {p * so, d}), beta), reciprocal(gamma));
  y = add(mul(y, tape.constant(std::move(sd_rep))), tape.constant(std::move(mean_rep)));
  return reshape(y, {p, so * d});
}

}  // namespace

DirectModel make_direct_model(DirectMethod method, const TargetArch& arch, std::size_t series,
                              std::uint64_t seed, const HyperGruConfig& hyper) {
  arch.validate();
  if (series == 0) throw Error("direct model needs at least one series");
  if (method == DirectMethod::HyperGru && !is_gru_family(arch.kind)) {
    throw Error("incompatible method/arch: hypergru requires a GRU-family target, got " +
                std::string(to_string(arch.kind)));
  }
  DirectModel m{method, arch, hyper, build_param_graph(arch), series, {}};
  Rng rng(seed);
  for (std::size_t i = 0; i < series; ++i) {
    const std::string pre = series_prefix(i);
    if (method == DirectMethod::HyperGru) {
      for (const std::string& stack : hyper_stacks(arch.kind)) {
        for (const HyperGruCell& cell : hyper_cells(m, i, stack)) init_hypergru_params(m.params, cell, rng);
      }
      const ParamNode& w = m.graph.node(m.graph.index_of("head.W"));
      m.params.add(pre + "head.W", xavier_uniform(w.shape, rng));
      m.params.add(pre + "head.b", Array(m.graph.node(m.graph.index_of("head.b")).shape, 0.0));
      continue;
    }
    for (const ParamNode& node : m.graph.nodes()) m.params.add(pre + node.name, xavier_uniform(node.shape, rng));
    if (method == DirectMethod::Revin) {
      m.params.add(pre + "revin.gamma", Array({arch.input_dim}, 1.0));
      m.params.add(pre + "revin.beta", Array({arch.input_dim}, 0.0));
    }
  }
  return m;
}

Tensor direct_forecast(const DirectModel& model, std::size_t series, const BoundParams& params, Tape& tape,
                       const WindowBatch& windows) {
  if (series >= model.series) throw Error("direct_forecast: series index out of range");
  Tensor out;
  switch (model.method) {
    case DirectMethod::Vanilla:
      out = forecast(model.arch, model.graph, series_set(model, series, params), tape, windows);
      break;
    case DirectMethod::Revin:
      out = revin_forecast(model, series, params, tape, windows);
      break;
    case DirectMethod::HyperGru:
      out = hypergru_forecast(model, series, params, tape, windows);
      break;
  }
  if (!out.value().all_finite()) throw Error("forecast produced non-finite output");
  return out;
}

PeriodForecast direct_forecast_period(const DirectModel& model, const TimeSeriesCorpus& corpus,
                                      std::size_t target) {
  if (corpus.series() != model.series) throw Error("corpus series count does not match the model");
  PeriodForecast out;
  Tape tape;
  BoundParams params(tape, model.params);
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    PairBatch batch = stack_pairs(make_pairs(corpus.block(i, target - 1), model.arch.s_in, model.arch.s_out));
    out.pred.push_back(direct_forecast(model, i, params, tape, batch.windows).value());
    out.truth.push_back(std::move(batch.targets));
  }
  return out;
}

PeriodForecast persistence_forecast(const TimeSeriesCorpus& corpus, std::size_t target, std::size_t s_in,
                                    std::size_t s_out) {
  PeriodForecast out;
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    PairBatch batch = stack_pairs(make_pairs(corpus.block(i, target - 1), s_in, s_out));
    const Array& last = batch.windows.steps.back();
    Array pred(batch.targets.shape());
    for (std::size_t r = 0; r < pred.rows(); ++r)
      for (std::size_t k = 0; k < pred.cols(); ++k) pred.at(r, k) = last.at(r, k % last.cols());
    out.pred.push_back(std::move(pred));
    out.truth.push_back(std::move(batch.targets));
  }
  return out;
}

DirectTrainResult train_direct(const TimeSeriesCorpus& corpus, DirectModel model, const DirectTrainConfig& cfg,
                               ProgressFn progress) {
  const std::size_t n = corpus.periods();
  if (n < 3) throw Error("insufficient periods: direct training needs at least 3");
  if (corpus.series() != model.series || corpus.dim() != model.arch.input_dim) {
    throw Error("corpus shape does not match the model configuration");
  }
  if (cfg.pair_batch == 0) throw Error("pair batch size must be positive");
  std::vector<std::vector<Pair>> pool(corpus.series());
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    for (std::size_t j = 1; j + 2 <= n; ++j) {
      std::vector<Pair> p = make_pairs(corpus.block(i, j - 1), model.arch.s_in, model.arch.s_out);
      pool[i].insert(pool[i].end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
    }
  }
  const std::size_t count = pool.front().size();
  const double nan = std::numeric_limits<double>::quiet_NaN();

  auto batch_loss = [&](Tape& tape, const BoundParams& params, std::span<const std::size_t> order) {
    std::vector<Tensor> terms;
    std::size_t entries = 0;
    for (std::size_t i = 0; i < corpus.series(); ++i) {
      PairBatch b = stack_pairs(pool[i], order);
      Tensor pred = direct_forecast(model, i, params, tape, b.windows);
      terms.push_back(sum(square(sub(pred, tape.constant(b.targets)))));
      entries += b.targets.size();
    }
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, 1.0 / static_cast<double>(entries));
  };

  Rng rng(cfg.seed ^ 0x51ed270b2a3f9c4dull);
  AdamState adam(model.params, cfg.adam);
  DirectTrainResult result{model, {}, 0, 0.0};
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  {
    Tape tape;
    BoundParams params(tape, model.params);
    const double loss = batch_loss(tape, params, order).value().item();
    HistoryRow row0{0, loss, loss, nan, period_mse(direct_forecast_period(model, corpus, n - 1))};
    result.history.push_back(row0);
    result.best_val = row0.val_mse;
    if (progress) progress(row0);
  }

  std::size_t stale = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    HistoryRow row{epoch, 0.0, 0.0, nan, 0.0};
    double weight = 0.0;
    try {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < count; start += cfg.pair_batch) {
        std::span<const std::size_t> chunk(order.data() + start, std::min(count, start + cfg.pair_batch) - start);
        Tape tape;
        BoundParams params(tape, model.params);
        Tensor loss = batch_loss(tape, params, chunk);
        if (!std::isfinite(loss.value().item())) throw Error("non-finite training loss");
        adam_step(model.params, tape.grad(loss, params.all()), adam);
        row.train_loss += static_cast<double>(chunk.size()) * loss.value().item();
        weight += static_cast<double>(chunk.size());
      }
      row.val_mse = period_mse(direct_forecast_period(model, corpus, n - 1));
      if (!std::isfinite(row.val_mse)) throw Error("non-finite validation MSE");
    } catch (const Error& e) {
      throw Error("training diverged in epoch " + std::to_string(epoch) + " (last finite epoch " +
                  std::to_string(epoch - 1) + "): " + e.what());
    }
    row.train_loss /= weight;
    row.mse1 = row.train_loss;
    result.history.push_back(row);
    if (progress) progress(row);
    if (row.val_mse < result.best_val) {
      result.best_val = row.val_mse;
      result.best_epoch = epoch;
      result.model.params = model.params;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace hypergpa
