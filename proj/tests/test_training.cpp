#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hypergpa/training.hpp"

using namespace hypergpa;

namespace {

TimeSeriesCorpus tiny_corpus(std::size_t periods = 6) {
  SynthConfig cfg;
  cfg.series = 2;
  cfg.periods = periods;
  cfg.period_length = 10;
  cfg.dim = 1;
  cfg.seed = 4;
  return normalize(synth_drift(cfg)).corpus;
}

HyperGpaModel tiny_model(std::size_t candidates = 2, std::uint64_t seed = 3) {
  TargetArch arch;
  arch.kind = TargetKind::Gru;
  arch.input_dim = 1;
  arch.hidden_dim = 3;
  arch.s_in = 4;
  arch.s_out = 2;
  L1Config l1;
  l1.series = 2;
  l1.input_dim = 1;
  l1.hidden_dim = 4;
  l1.gamma_hidden = 4;
  l1.embed_dim = 2;
  l1.field_hidden = 4;
  L2Config l2;
  l2.repr_dim = 4;
  l2.query_dim = 4;
  l2.refined_dim = 4;
  l2.heads = 2;
  l2.layers = 2;
  l2.hidden = 4;
  l2.candidates = candidates;
  return make_model(arch, l1, l2, seed);
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig cfg;
  cfg.k = 2;
  cfg.epochs = epochs;
  cfg.patience = epochs;
  cfg.pair_batch = 3;
  cfg.adam.learning_rate = 1e-2;
  return cfg;
}

std::vector<PairBatch> period_pairs(const TimeSeriesCorpus& c, const HyperGpaModel& m, std::size_t target) {
  std::vector<PairBatch> out;
  for (std::size_t i = 0; i < c.series(); ++i) {
    out.push_back(stack_pairs(make_pairs(c.block(i, target - 1), m.arch.s_in, m.arch.s_out)));
  }
  return out;
}

}  // namespace

TEST(PeriodBatches, CountAndLayout) {
  const auto b = make_period_batches(9, 2);
  ASSERT_EQ(b.size(), 6u);
  EXPECT_EQ(b.front().target, 3u);
  EXPECT_EQ(b.front().inputs, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(b.back().target, 8u);
  EXPECT_EQ(b.back().inputs, (std::vector<std::size_t>{6, 7}));
  EXPECT_EQ(make_period_batches(4, 2).size(), 1u);
  EXPECT_THROW(make_period_batches(3, 2), Error);
  EXPECT_THROW(make_period_batches(9, 0), Error);
}

TEST(Pairs, CountAndBoundaries) {
  Array period({52, 1});
  for (std::size_t k = 0; k < 52; ++k) period[k] = static_cast<double>(k);
  const auto pairs = make_pairs(period, 10, 2);
  ASSERT_EQ(pairs.size(), 41u);
  EXPECT_EQ(pairs.front().input[0], 0.0);
  EXPECT_EQ(pairs.front().target, Array::matrix(2, 1, {10, 11}));
  EXPECT_EQ(pairs.back().input[0], 40.0);
  EXPECT_EQ(pairs.back().target, Array::matrix(2, 1, {50, 51}));
  EXPECT_EQ(make_pairs(Array({12, 1}), 10, 2).size(), 1u);
  EXPECT_THROW(make_pairs(Array({11, 1}), 10, 2), Error);
}

TEST(Pairs, StackingIsStepMajor) {
  Array period = Array::matrix(4, 2, {1, 2, 3, 4, 5, 6, 7, 8});
  const auto pairs = make_pairs(period, 2, 2);
  const PairBatch b = stack_pairs(pairs);
  ASSERT_EQ(b.windows.steps.size(), 2u);
  EXPECT_EQ(b.windows.steps[1], Array::matrix(1, 2, {3, 4}));
  EXPECT_EQ(b.targets, Array::matrix(1, 4, {5, 6, 7, 8}));
}

TEST(Loss, LambdaZeroIsMse1) {
  const TimeSeriesCorpus c = tiny_corpus();
  const HyperGpaModel m = tiny_model();
  const auto pairs = period_pairs(c, m, 3);
  Tape tape;
  BoundParams p(tape, m.params);
  const LossParts parts = hypergpa_loss(m, p, c, make_period_batches(5, 2)[0], pairs, 0.0);
  EXPECT_EQ(parts.loss.value().item(), parts.mse1);
  EXPECT_GT(parts.mse2, 0.0);
  ASSERT_EQ(parts.per_series.size(), 2u);
  EXPECT_NEAR((parts.per_series[0] + parts.per_series[1]) / 2.0, parts.mse1, 1e-12);
}

TEST(Loss, SingleCandidateGivesOnePlusLambdaMse1) {
  const TimeSeriesCorpus c = tiny_corpus();
  const HyperGpaModel m = tiny_model(1);
  const auto pairs = period_pairs(c, m, 3);
  Tape tape;
  BoundParams p(tape, m.params);
  const LossParts parts = hypergpa_loss(m, p, c, make_period_batches(5, 2)[0], pairs, 0.3);
  EXPECT_EQ(parts.mse1, parts.mse2);
  EXPECT_NEAR(parts.loss.value().item(), 1.3 * parts.mse1, 1e-14);
}

TEST(Loss, WrongPairCountThrows) {
  const TimeSeriesCorpus c = tiny_corpus();
  const HyperGpaModel m = tiny_model();
  auto pairs = period_pairs(c, m, 3);
  pairs.pop_back();
  Tape tape;
  BoundParams p(tape, m.params);
  EXPECT_THROW(hypergpa_loss(m, p, c, make_period_batches(5, 2)[0], pairs, 0.1), Error);
}

TEST(Model, RejectsInconsistentDimensions) {
  TargetArch arch;
  arch.input_dim = 2;
  L1Config l1;
  l1.series = 2;
  l1.input_dim = 1;
  L2Config l2;
  l2.repr_dim = l1.hidden_dim;
  EXPECT_THROW(make_model(arch, l1, l2, 0), Error);
  arch.input_dim = 1;
  l2.repr_dim = l1.hidden_dim + 1;
  EXPECT_THROW(make_model(arch, l1, l2, 0), Error);
}

TEST(Generation, SelectionMatchesArgmax) {
  const TimeSeriesCorpus c = tiny_corpus();
  const HyperGpaModel m = tiny_model(3);
  const GeneratedTargets g = generate_targets(m, c, 5, 2);
  ASSERT_EQ(g.blended.size(), 2u);
  ASSERT_EQ(g.coeffs.size(), m.graph.size());
  for (std::size_t l = 0; l < m.graph.size(); ++l) {
    for (std::size_t i = 0; i < 2; ++i) {
      const std::size_t pick = g.indices[i][l];
      for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(g.coeffs[l].at(i, k), g.coeffs[l].at(i, pick));
    }
  }
  EXPECT_THROW(generate_targets(m, c, 2, 2), Error);
}

TEST(Train, ValidationImprovesAndHistoryIsComplete) {
  const TimeSeriesCorpus c = tiny_corpus();
  const TrainResult r = train(c, tiny_model(), quick(15));
  ASSERT_EQ(r.history.size(), 16u);
  EXPECT_EQ(r.history.front().epoch, 0u);
  EXPECT_LT(r.best_val, r.history.front().val_mse);
  EXPECT_GT(r.best_epoch, 0u);
  EXPECT_EQ(r.history[r.best_epoch].val_mse, r.best_val);
  EXPECT_EQ(period_mse(forecast_period(r.model, c, 5, 2)), r.best_val);
}

TEST(Train, DeterministicForFixedSeed) {
  const TimeSeriesCorpus c = tiny_corpus();
  const TrainResult a = train(c, tiny_model(), quick(4));
  const TrainResult b = train(c, tiny_model(), quick(4));
  EXPECT_EQ(a.model.params, b.model.params);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
}

TEST(Train, PatienceStopsEarly) {
  // A vanishing step size leaves the validation error exactly flat.
  TrainConfig cfg = quick(50);
  cfg.patience = 3;
  cfg.adam.learning_rate = 1e-300;
  const TrainResult r = train(tiny_corpus(), tiny_model(), cfg);
  EXPECT_EQ(r.history.size(), 4u);
  EXPECT_EQ(r.best_epoch, 0u);
}

TEST(Train, RejectsShortCorpus) {
  try {
    train(tiny_corpus(4), tiny_model(), quick(1));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient periods"), std::string::npos);
  }
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const HyperGpaModel m = tiny_model();
  std::stringstream ss;
  write_params(ss, m.params);
  EXPECT_EQ(read_params(ss), m.params);
  std::stringstream bad("not a checkpoint\n");
  EXPECT_THROW(read_params(bad), Error);
  std::stringstream truncated("hypergpa-params 1\n1\nw 1 3\n1 2\n");
  EXPECT_THROW(read_params(truncated), Error);
}

TEST(History, CsvLayout) {
  std::ostringstream out;
  write_history(out, {{0, 1.5, 1.0, 5.0, 2.0}, {1, 0.25, 0.125, 1.25, 0.5}});
  EXPECT_EQ(out.str(), "epoch,train_loss,mse1,mse2,val_mse\n0,1.5,1,5,2\n1,0.25,0.125,1.25,0.5\n");
}
