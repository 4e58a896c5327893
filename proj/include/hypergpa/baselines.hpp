#pragma once

// Comparison methods trained directly on historical periods: Vanilla target
// models, RevIN-wrapped target models and HyperGRU.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hypergpa/data.hpp"
#include "hypergpa/optim.hpp"
#include "hypergpa/target.hpp"
#include "hypergpa/training.hpp"

namespace hypergpa {

constexpr double kRevinEps = 1e-5;

// Per-feature statistics of one input window.
struct RevinState {
  Array mean;   // [dim]
  Array stdev;  // [dim], floored at kRevinEps
};

// window is T x dim; gamma and beta are the learnable [dim] affine.
std::pair<Array, RevinState> revin_apply(const Array& window, const Array& gamma, const Array& beta);
// outputs is n x dim in the transformed space.
Array revin_invert(const Array& outputs, const RevinState& state, const Array& gamma, const Array& beta);

struct HyperGruConfig {
  std::size_t hyper_hidden = 8;  // dim(h^)
  std::size_t embed_dim = 4;     // dim(a)
  // Replaces every layer normalization by the identity (reduction tests).
  bool identity_norm = false;
};

// One HyperGRU cell. Main-GRU tensors keep the plain GRU names under `prefix`
// (prefix.y.W_x, prefix.y.W_h for y in r, z, g; the bias is generated).
struct HyperGruCell {
  std::string prefix;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  HyperGruConfig cfg;
};

void init_hypergru_params(ParamStore& store, const HyperGruCell& cell, Rng& rng);

struct HyperGruState {
  Tensor h;      // [P, hidden]
  Tensor h_hat;  // [P, dim(h^)]
};

HyperGruState hypergru_step(const Tensor& x, const HyperGruState& state, const BoundParams& params,
                            const HyperGruCell& cell);

enum class DirectMethod { Vanilla, Revin, HyperGru };

std::string_view to_string(DirectMethod m);

// One independently parameterized forecaster per series, all held in one
// store under the prefix "s<i>.".
struct DirectModel {
  DirectMethod method = DirectMethod::Vanilla;
  TargetArch arch;
  HyperGruConfig hyper;
  ParamGraph graph;
  std::size_t series = 0;
  ParamStore params;
};

DirectModel make_direct_model(DirectMethod method, const TargetArch& arch, std::size_t series,
                              std::uint64_t seed, const HyperGruConfig& hyper = {});

// Forecast of series i for a batch of windows: [P, s_out * dim].
Tensor direct_forecast(const DirectModel& model, std::size_t series, const BoundParams& params, Tape& tape,
                       const WindowBatch& windows);

struct DirectTrainConfig {
  AdamConfig adam{1e-3, 0.9, 0.999, 1e-8, 1e-5};
  std::size_t pair_batch = 256;
  std::size_t epochs = 2000;
  std::size_t patience = 200;
  std::uint64_t seed = 0;
};

struct DirectTrainResult {
  DirectModel model;  // best-validation snapshot
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

// Trains on every pair of periods 1..N-2 and validates on period N-1.
DirectTrainResult train_direct(const TimeSeriesCorpus& corpus, DirectModel model, const DirectTrainConfig& cfg,
                               ProgressFn progress = {});

// Forecasts for every pair of period `target` (1-based).
PeriodForecast direct_forecast_period(const DirectModel& model, const TimeSeriesCorpus& corpus,
                                      std::size_t target);

// Loss-free forecast of the last value over the horizon, for comparison.
PeriodForecast persistence_forecast(const TimeSeriesCorpus& corpus, std::size_t target, std::size_t s_in,
                                    std::size_t s_out);

}  // namespace hypergpa
