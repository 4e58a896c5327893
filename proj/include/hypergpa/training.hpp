#pragma once

// Period-wise mini-batches, forecasting pairs, the MSE1 + lambda * MSE2 loss
// and the optimization loop over every HyperGPA parameter.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hypergpa/data.hpp"
#include "hypergpa/l1.hpp"
#include "hypergpa/l2.hpp"
#include "hypergpa/optim.hpp"
#include "hypergpa/target.hpp"

namespace hypergpa {

// Period indices are 1-based: the batch forecasts period `target` from
// periods target-K .. target-1.
struct PeriodBatch {
  std::size_t target = 0;
  std::vector<std::size_t> inputs;
};

// One batch per b in [K+1, periods-1].
std::vector<PeriodBatch> make_period_batches(std::size_t periods, std::size_t k);

struct Pair {
  Array input;   // s_in x dim
  Array target;  // s_out x dim
};

std::vector<Pair> make_pairs(const Array& period, std::size_t s_in, std::size_t s_out);

struct PairBatch {
  WindowBatch windows;
  Array targets;  // P x (s_out * dim), step-major
};

PairBatch stack_pairs(std::span<const Pair> pairs, std::span<const std::size_t> order);
PairBatch stack_pairs(std::span<const Pair> pairs);

struct TrainConfig {
  std::size_t k = 2;
  double lambda = 0.1;
  AdamConfig adam;
  std::size_t pair_batch = 256;
  std::size_t epochs = 300;
  std::size_t patience = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

struct HyperGpaModel {
  TargetArch arch;
  L1Config l1;
  L2Config l2;
  ParamGraph graph;
  ParamStore params;
};

// l1.series / l1.input_dim / l2.repr_dim must already be consistent.
HyperGpaModel make_model(const TargetArch& arch, const L1Config& l1, const L2Config& l2, std::uint64_t seed);

struct LossParts {
  Tensor loss;
  double mse1 = 0.0;
  double mse2 = 0.0;
  std::vector<double> per_series;  // MSE1 per series
};

// pairs[i] holds series i's pairs in the target period.
LossParts hypergpa_loss(const HyperGpaModel& model, const BoundParams& params,
                        const TimeSeriesCorpus& corpus, const PeriodBatch& batch,
                        std::span<const PairBatch> pairs, double lambda);

// Target parameters generated for forecasting period `target` (1-based) from
// its K predecessors, one store per series.
struct GeneratedTargets {
  std::vector<ParamStore> blended;
  std::vector<ParamStore> selected;
  std::vector<std::vector<std::size_t>> indices;
  std::vector<Array> coeffs;  // per node, M x C
};
GeneratedTargets generate_targets(const HyperGpaModel& model, const TimeSeriesCorpus& corpus,
                                  std::size_t target, std::size_t k);

// Forecasts for every pair of period `target`, stacked over series:
// (sum over series of P) x (s_out * dim) predictions and truths.
struct PeriodForecast {
  std::vector<Array> pred;   // per series, P x (s_out * dim)
  std::vector<Array> truth;
};
PeriodForecast forecast_period(const HyperGpaModel& model, const TimeSeriesCorpus& corpus,
                               std::size_t target, std::size_t k);

double period_mse(const PeriodForecast& f);

struct HistoryRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double mse1 = 0.0;
  double mse2 = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  HyperGpaModel model;  // best-validation snapshot
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

using ProgressFn = std::function<void(const HistoryRow&)>;

// Uses periods 1..N-1 only: batches target 1..N-2, validation targets N-1.
TrainResult train(const TimeSeriesCorpus& corpus, HyperGpaModel model, const TrainConfig& cfg,
                  ProgressFn progress = {});

void write_history(std::ostream& out, const std::vector<HistoryRow>& history);
void write_history(const std::string& path, const std::vector<HistoryRow>& history);

// Text checkpoint: a version line, then per tensor "name rank d0 .. dk" and
// one line of shortest round-trip values.
void write_params(std::ostream& out, const ParamStore& store);
ParamStore read_params(std::istream& in);
void save_params(const std::string& path, const ParamStore& store);
ParamStore load_params(const std::string& path);

std::string format_double(double v);

}  // namespace hypergpa
