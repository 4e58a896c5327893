#include "hypergpa/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace hypergpa {

std::vector<PeriodBatch> make_period_batches(std::size_t periods, std::size_t k) {
  if (k < 1) throw Error("K must be >= 1");
  if (periods < k + 2) {
    throw Error("insufficient periods: " + std::to_string(periods) + " periods for K=" + std::to_string(k));
  }
  std::vector<PeriodBatch> out;
  for (std::size_t b = k + 1; b <= periods - 1; ++b) {
    PeriodBatch batch{b, {}};
    for (std::size_t j = b - k; j < b; ++j) batch.inputs.push_back(j);
    out.push_back(std::move(batch));
  }
  return out;
}

std::vector<Pair> make_pairs(const Array& period, std::size_t s_in, std::size_t s_out) {
  if (s_in == 0 || s_out == 0) throw Error("make_pairs: s_in and s_out must be positive");
  if (period.rank() != 2 || period.rows() < s_in + s_out) {
    throw Error("make_pairs: period of " + std::to_string(period.rows()) + " steps is shorter than s_in + s_out = " +
                std::to_string(s_in + s_out));
  }
  const std::size_t d = period.cols();
  const std::size_t count = period.rows() - s_in - s_out + 1;
  std::vector<Pair> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    Pair p{Array({s_in, d}), Array({s_out, d})};
    std::copy(period.ptr() + n * d, period.ptr() + (n + s_in) * d, p.input.ptr());
    std::copy(period.ptr() + (n + s_in) * d, period.ptr() + (n + s_in + s_out) * d, p.target.ptr());
    out.push_back(std::move(p));
  }
  return out;
}

PairBatch stack_pairs(std::span<const Pair> pairs, std::span<const std::size_t> order) {
  if (order.empty()) throw Error("stack_pairs: empty selection");
  const std::size_t s_in = pairs[order[0]].input.rows();
  const std::size_t d = pairs[order[0]].input.cols();
  const std::size_t out_len = pairs[order[0]].target.size();
  const std::size_t p = order.size();
  PairBatch batch;
  batch.windows.steps.assign(s_in, Array({p, d}));
  batch.targets = Array({p, out_len});
  for (std::size_t r = 0; r < p; ++r) {
    const Pair& pair = pairs[order[r]];
    for (std::size_t k = 0; k < s_in; ++k)
      for (std::size_t c = 0; c < d; ++c) batch.windows.steps[k].at(r, c) = pair.input.at(k, c);
    std::copy(pair.target.ptr(), pair.target.ptr() + out_len, batch.targets.ptr() + r * out_len);
  }
  return batch;
}

PairBatch stack_pairs(std::span<const Pair> pairs) {
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  return stack_pairs(pairs, order);
}

void TrainConfig::validate() const {
  if (k < 1) throw Error("K must be >= 1");
  if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
  if (pair_batch == 0) throw Error("pair batch size must be positive");
  if (!(adam.learning_rate > 0.0)) throw Error("learning rate must be positive");
}

HyperGpaModel make_model(const TargetArch& arch, const L1Config& l1, const L2Config& l2, std::uint64_t seed) {
  arch.validate();
  l1.validate();
  l2.validate();
  if (l1.input_dim != arch.input_dim) throw Error("L1 input dim does not match the target input dim");
  if (l2.repr_dim != l1.hidden_dim) throw Error("L2 representation size must equal the L1 hidden size");
  HyperGpaModel model{arch, l1, l2, build_param_graph(arch), {}};
  Rng rng(seed);
  init_l1_params(model.params, l1, rng);
  init_l2_params(model.params, l2, model.graph, rng);
  return model;
}

namespace {

std::vector<Array> input_series(const TimeSeriesCorpus& corpus, const PeriodBatch& batch) {
  std::vector<Array> out;
  out.reserve(corpus.series());
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    out.push_back(corpus.concat(i, batch.inputs.front() - 1, batch.inputs.size()));
  }
  return out;
}

PeriodBatch batch_for(std::size_t target, std::size_t k) {
  if (target <= k) throw Error("period " + std::to_string(target) + " has fewer than K predecessors");
  PeriodBatch b{target, {}};
  for (std::size_t j = target - k; j < target; ++j) b.inputs.push_back(j);
  return b;
}

ParamStore to_store(const ParamGraph& graph, const ParamSet& set) {
  ParamStore store;
  for (std::size_t l = 0; l < graph.size(); ++l) store.add(graph.node(l).name, set.values[l].value());
  return store;
}

}  // namespace

LossParts hypergpa_loss(const HyperGpaModel& model, const BoundParams& params,
                        const TimeSeriesCorpus& corpus, const PeriodBatch& batch,
                        std::span<const PairBatch> pairs, double lambda) {
  const std::size_t m = corpus.series();
  if (pairs.size() != m) throw Error("hypergpa_loss: one pair batch per series required");
  const std::vector<Array> inputs = input_series(corpus, batch);
  Tensor h = encode_periods(params, model.l1, inputs);
  Generated gen = generate(params, model.l2, model.graph, h);

  Tape& tape = h.tape();
  std::vector<Tensor> se1, se2;
  std::size_t count = 0;
  LossParts parts;
  for (std::size_t i = 0; i < m; ++i) {
    Tensor truth = tape.constant(pairs[i].targets);
    Tensor p1 = forecast(model.arch, model.graph, gen.blended[i], tape, pairs[i].windows);
    Tensor p2 = forecast(model.arch, model.graph, gen.selected.params[i], tape, pairs[i].windows);
    se1.push_back(sum(square(sub(p1, truth))));
    se2.push_back(sum(square(sub(p2, truth))));
    parts.per_series.push_back(se1.back().value().item() / static_cast<double>(pairs[i].targets.size()));
    count += pairs[i].targets.size();
  }
  auto total = [&](const std::vector<Tensor>& terms) {
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return scale(acc, 1.0 / static_cast<double>(count));
  };
  Tensor mse1 = total(se1);
  Tensor mse2 = total(se2);
  parts.loss = lambda == 0.0 ? mse1 : add(mse1, scale(mse2, lambda));
  parts.mse1 = mse1.value().item();
  parts.mse2 = mse2.value().item();
  if (!std::isfinite(parts.loss.value().item())) {
    throw Error("non-finite loss on batch targeting period " + std::to_string(batch.target));
  }
  return parts;
}

GeneratedTargets generate_targets(const HyperGpaModel& model, const TimeSeriesCorpus& corpus,
                                  std::size_t target, std::size_t k) {
  const PeriodBatch batch = batch_for(target, k);
  Tape tape;
  BoundParams params(tape, model.params);
  Tensor h = encode_periods(params, model.l1, input_series(corpus, batch));
  Generated gen = generate(params, model.l2, model.graph, h);
  GeneratedTargets out;
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    out.blended.push_back(to_store(model.graph, gen.blended[i]));
    out.selected.push_back(to_store(model.graph, gen.selected.params[i]));
  }
  out.indices = gen.selected.indices;
  for (const Tensor& a : gen.coeffs) out.coeffs.push_back(a.value());
  return out;
}

PeriodForecast forecast_period(const HyperGpaModel& model, const TimeSeriesCorpus& corpus,
                               std::size_t target, std::size_t k) {
  GeneratedTargets gen = generate_targets(model, corpus, target, k);
  PeriodForecast out;
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    const std::vector<Pair> pairs = make_pairs(corpus.block(i, target - 1), model.arch.s_in, model.arch.s_out);
    PairBatch batch = stack_pairs(pairs);
    Tape tape;
    ParamSet set = bind_param_set(tape, gen.blended[i], model.graph);
    out.pred.push_back(forecast(model.arch, model.graph, set, tape, batch.windows).value());
    out.truth.push_back(std::move(batch.targets));
  }
  return out;
}

double period_mse(const PeriodForecast& f) {
  double sse = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < f.pred.size(); ++i) {
    for (std::size_t k = 0; k < f.pred[i].size(); ++k) {
      const double r = f.pred[i][k] - f.truth[i][k];
      sse += r * r;
    }
    n += f.pred[i].size();
  }
  if (n == 0) throw Error("period_mse: no predictions");
  return sse / static_cast<double>(n);
}

TrainResult train(const TimeSeriesCorpus& corpus, HyperGpaModel model, const TrainConfig& cfg,
                  ProgressFn progress) {
  cfg.validate();
  const std::size_t n = corpus.periods();
  if (n < cfg.k + 3) {
    throw Error("insufficient periods: training with K=" + std::to_string(cfg.k) + " needs at least " +
                std::to_string(cfg.k + 3) + ", corpus has " + std::to_string(n));
  }
  if (corpus.series() != model.l1.series || corpus.dim() != model.arch.input_dim) {
    throw Error("corpus shape does not match the model configuration");
  }
  const std::vector<PeriodBatch> batches = make_period_batches(n - 1, cfg.k);
  std::vector<std::vector<std::vector<Pair>>> pairs(batches.size());
  for (std::size_t b = 0; b < batches.size(); ++b) {
    for (std::size_t i = 0; i < corpus.series(); ++i) {
      pairs[b].push_back(make_pairs(corpus.block(i, batches[b].target - 1), model.arch.s_in, model.arch.s_out));
    }
  }

  Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  AdamState adam(model.params, cfg.adam);
  TrainResult result{model, {}, 0, 0.0};

  auto step_batches = [&](std::size_t b, std::span<const std::size_t> order) {
    std::vector<PairBatch> stacked;
    for (const auto& series_pairs : pairs[b]) stacked.push_back(stack_pairs(series_pairs, order));
    return stacked;
  };

  HistoryRow row0{0, 0.0, 0.0, 0.0, 0.0};
  {
    double weight = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<std::size_t> order(pairs[b].front().size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Tape tape;
      BoundParams bp(tape, model.params);
      LossParts parts = hypergpa_loss(model, bp, corpus, batches[b], step_batches(b, order), cfg.lambda);
      const double w = static_cast<double>(order.size());
      row0.train_loss += w * parts.loss.value().item();
      row0.mse1 += w * parts.mse1;
      row0.mse2 += w * parts.mse2;
      weight += w;
    }
    row0.train_loss /= weight;
    row0.mse1 /= weight;
    row0.mse2 /= weight;
    row0.val_mse = period_mse(forecast_period(model, corpus, n - 1, cfg.k));
  }
  result.history.push_back(row0);
  result.best_val = row0.val_mse;
  if (progress) progress(row0);

  std::size_t stale = 0;
  std::vector<std::size_t> batch_order(batches.size());
  std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    HistoryRow row{epoch, 0.0, 0.0, 0.0, 0.0};
    double weight = 0.0;
    try {
      std::shuffle(batch_order.begin(), batch_order.end(), rng);
      for (std::size_t b : batch_order) {
        std::vector<std::size_t> order(pairs[b].front().size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.pair_batch) {
          const std::size_t end = std::min(order.size(), start + cfg.pair_batch);
          std::span<const std::size_t> chunk(order.data() + start, end - start);
          Tape tape;
          BoundParams bp(tape, model.params);
          LossParts parts = hypergpa_loss(model, bp, corpus, batches[b], step_batches(b, chunk), cfg.lambda);
          const std::vector<Array> grads = tape.grad(parts.loss, bp.all());
          adam_step(model.params, grads, adam);
          const double w = static_cast<double>(chunk.size());
          row.train_loss += w * parts.loss.value().item();
          row.mse1 += w * parts.mse1;
          row.mse2 += w * parts.mse2;
          weight += w;
        }
      }
      row.val_mse = period_mse(forecast_period(model, corpus, n - 1, cfg.k));
      if (!std::isfinite(row.val_mse)) throw Error("non-finite validation MSE");
    } catch (const Error& e) {
      throw Error("training diverged in epoch " + std::to_string(epoch) + " (last finite epoch " +
                  std::to_string(epoch - 1) + "): " + e.what());
    }
    row.train_loss /= weight;
    row.mse1 /= weight;
    row.mse2 /= weight;
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

// ---------------------------------------------------------------------------

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("failed to format value");
  return std::string(buf, ptr);
}

void write_history(std::ostream& out, const std::vector<HistoryRow>& history) {
  std::string text = "epoch,train_loss,mse1,mse2,val_mse\n";
  for (const HistoryRow& r : history) {
    text += std::to_string(r.epoch) + ',' + format_double(r.train_loss) + ',' + format_double(r.mse1) + ',' +
            format_double(r.mse2) + ',' + format_double(r.val_mse) + '\n';
  }
  out << text;
  if (!out) throw Error("history: write failed");
}

void write_history(const std::string& path, const std::vector<HistoryRow>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_history(out, history);
}

namespace {
constexpr const char* kCheckpointMagic = "hypergpa-params 1";
}

void write_params(std::ostream& out, const ParamStore& store) {
  std::string text = std::string(kCheckpointMagic) + "\n" + std::to_string(store.size()) + "\n";
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Array& v = store.value(i);
    text += store.name(i) + ' ' + std::to_string(v.rank());
    for (std::size_t e : v.shape()) text += ' ' + std::to_string(e);
    text += '\n';
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (k) text += ' ';
      text += format_double(v[k]);
    }
    text += '\n';
  }
  out << text;
  if (!out) throw Error("checkpoint: write failed");
}

ParamStore read_params(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw Error("checkpoint: bad header");
  std::size_t count = 0;
  if (!(in >> count)) throw Error("checkpoint: missing tensor count");
  ParamStore store;
  for (std::size_t t = 0; t < count; ++t) {
    std::string name;
    std::size_t rank = 0;
    if (!(in >> name >> rank)) throw Error("checkpoint: truncated at tensor " + std::to_string(t));
    Shape shape(rank);
    for (std::size_t& e : shape)
      if (!(in >> e)) throw Error("checkpoint: bad shape for '" + name + "'");
    Array v(shape);
    for (std::size_t k = 0; k < v.size(); ++k) {
      std::string tok;
      if (!(in >> tok)) throw Error("checkpoint: truncated values for '" + name + "'");
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v[k]);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        throw Error("checkpoint: bad value '" + tok + "' in '" + name + "'");
      }
    }
    store.add(name, std::move(v));
  }
  return store;
}

void save_params(const std::string& path, const ParamStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_params(out, store);
}

ParamStore load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_params(in);
}

}  // namespace hypergpa
