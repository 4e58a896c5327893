#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hypergpa/target.hpp"

using namespace hypergpa;

namespace {

TargetArch arch(TargetKind kind, std::size_t layers = 1) {
  TargetArch a;
  a.kind = kind;
  a.input_dim = 2;
  a.hidden_dim = 5;
  a.layers = layers;
  a.s_in = 6;
  a.s_out = 3;
  return a;
}

Array randn(const Shape& s, std::mt19937_64& rng, double sd = 0.5) {
  std::normal_distribution<double> d(0.0, sd);
  Array a(s);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = d(rng);
  return a;
}

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Straight-line re-implementation: out[j] = sum_i x[i] W[i][j] + ...
std::vector<double> lin(const Array& x, std::size_t row, const Array& w) {
  std::vector<double> out(w.cols(), 0.0);
  for (std::size_t j = 0; j < w.cols(); ++j)
    for (std::size_t i = 0; i < w.rows(); ++i) out[j] += x.at(row, i) * w.at(i, j);
  return out;
}

const std::vector<TargetKind> kAllKinds{TargetKind::Gru,         TargetKind::Lstm,   TargetKind::SeqToSeqGru,
                                        TargetKind::SeqToSeqLstm, TargetKind::OdeRnn, TargetKind::Ncde};

}  // namespace

TEST(TargetKind, ParseRoundTrip) {
  for (TargetKind k : kAllKinds) EXPECT_EQ(parse_target_kind(to_string(k)), k);
  EXPECT_THROW(parse_target_kind("transformer"), Error);
  EXPECT_TRUE(is_gru_family(TargetKind::SeqToSeqGru));
  EXPECT_TRUE(is_gru_family(TargetKind::Gru));
  EXPECT_FALSE(is_gru_family(TargetKind::Ncde));
  EXPECT_FALSE(is_gru_family(TargetKind::Lstm));
}

TEST(TargetArch, Validation) {
  TargetArch a = arch(TargetKind::Gru);
  a.hidden_dim = 0;
  EXPECT_THROW(a.validate(), Error);
  EXPECT_THROW(arch(TargetKind::Ncde, 2).validate(), Error);
  EXPECT_THROW(arch(TargetKind::OdeRnn, 2).validate(), Error);
  EXPECT_NO_THROW(arch(TargetKind::Gru, 2).validate());
}

TEST(ParamGraph, NodeCounts) {
  auto count = [](TargetKind k) { return build_param_graph(arch(k)).size(); };
  EXPECT_EQ(count(TargetKind::Gru), 11u);
  EXPECT_EQ(count(TargetKind::Lstm), 14u);
  EXPECT_EQ(count(TargetKind::SeqToSeqGru), 20u);
  EXPECT_EQ(count(TargetKind::SeqToSeqLstm), 26u);
  EXPECT_EQ(count(TargetKind::OdeRnn), 15u);
  EXPECT_EQ(count(TargetKind::Ncde), 8u);
  EXPECT_EQ(build_param_graph(arch(TargetKind::Gru, 2)).size(), 20u);
}

TEST(ParamGraph, SymmetricWithSelfLoopsAndConnected) {
  for (TargetKind k : kAllKinds) {
    for (std::size_t layers : {std::size_t{1}, std::size_t{2}}) {
      if (layers == 2 && (k == TargetKind::OdeRnn || k == TargetKind::Ncde)) continue;
      const ParamGraph g = build_param_graph(arch(k, layers));
      const std::size_t n = g.size();
      for (std::size_t a = 0; a < n; ++a) {
        EXPECT_TRUE(g.adjacent(a, a));
        for (std::size_t b = 0; b < n; ++b) EXPECT_EQ(g.adjacent(a, b), g.adjacent(b, a));
      }
      std::vector<bool> seen(n, false);
      std::vector<std::size_t> stack{0};
      seen[0] = true;
      while (!stack.empty()) {
        const std::size_t a = stack.back();
        stack.pop_back();
        for (std::size_t b = 0; b < n; ++b) {
          if (g.adjacent(a, b) && !seen[b]) {
            seen[b] = true;
            stack.push_back(b);
          }
        }
      }
      for (std::size_t a = 0; a < n; ++a) EXPECT_TRUE(seen[a]) << to_string(k) << " node " << g.node(a).name;
    }
  }
}

TEST(ParamGraph, NamesAndShapes) {
  const ParamGraph g = build_param_graph(arch(TargetKind::Gru));
  EXPECT_EQ(g.node(g.index_of("gru0.r.W_x")).shape, (Shape{2, 5}));
  EXPECT_EQ(g.node(g.index_of("gru0.z.W_h")).shape, (Shape{5, 5}));
  EXPECT_EQ(g.node(g.index_of("head.W")).shape, (Shape{5, 6}));
  EXPECT_THROW(g.index_of("nope"), Error);
  const ParamGraph s = build_param_graph(arch(TargetKind::SeqToSeqLstm));
  EXPECT_EQ(s.node(s.index_of("head.W")).shape, (Shape{5, 2}));
  EXPECT_NO_THROW(s.index_of("dec.lstm0.o.b"));
  const ParamGraph n = build_param_graph(arch(TargetKind::Ncde));
  EXPECT_EQ(n.node(n.index_of("field.l2.W")).shape, (Shape{5, 10}));
}

TEST(GruStep, ZeroParamsGiveZeroState) {
  Tape tape;
  const Tensor zero_w = tape.constant(Array({2, 3}, 0.0)), zero_u = tape.constant(Array({3, 3}, 0.0)),
               zero_b = tape.constant(Array({3}, 0.0));
  GruWeights w{zero_w, zero_u, zero_b, zero_w, zero_u, zero_b, zero_w, zero_u, zero_b};
  Tensor h = gru_step(tape.constant(Array::matrix(1, 2, {0.4, -1.0})), tape.constant(Array({1, 3}, 0.0)), w);
  EXPECT_EQ(h.value(), Array({1, 3}, 0.0));
}

TEST(GruStep, SaturatedUpdateGateCarriesState) {
  std::mt19937_64 rng(1);
  Tape tape;
  auto r = [&](Shape s) { return tape.constant(randn(s, rng)); };
  GruWeights w{r({2, 3}), r({3, 3}), r({3}), r({2, 3}), r({3, 3}), tape.constant(Array({3}, 60.0)),
               r({2, 3}), r({3, 3}), r({3})};
  const Array h0 = Array::matrix(1, 3, {0.3, -0.2, 0.9});
  Tensor h = gru_step(tape.constant(Array::matrix(1, 2, {0.1, 0.2})), tape.constant(h0), w);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(h.value()[i], h0[i], 1e-12);
}

TEST(GruStep, MatchesStraightLineImplementation) {
  std::mt19937_64 rng(2);
  const Array x = randn({2, 2}, rng, 1.0), h = randn({2, 2}, rng, 1.0);
  std::vector<Array> p;
  for (int g = 0; g < 3; ++g) {
    p.push_back(randn({2, 2}, rng));
    p.push_back(randn({2, 2}, rng));
    p.push_back(randn({2}, rng));
  }
  Tape tape;
  auto c = [&](int i) { return tape.constant(p[i]); };
  GruWeights w{c(0), c(1), c(2), c(3), c(4), c(5), c(6), c(7), c(8)};
  const Array got = gru_step(tape.constant(x), tape.constant(h), w).value();
  for (std::size_t row = 0; row < 2; ++row) {
    auto xr = lin(x, row, p[0]), hr = lin(h, row, p[1]);
    auto xz = lin(x, row, p[3]), hz = lin(h, row, p[4]);
    auto xg = lin(x, row, p[6]), hg = lin(h, row, p[7]);
    for (std::size_t j = 0; j < 2; ++j) {
      const double r = sig(xr[j] + hr[j] + p[2][j]);
      const double z = sig(xz[j] + hz[j] + p[5][j]);
      const double g = std::tanh(xg[j] + r * hg[j] + p[8][j]);
      EXPECT_NEAR(got.at(row, j), (1 - z) * g + z * h.at(row, j), 1e-14);
    }
  }
}

TEST(LstmStep, ZeroParamsAndSaturatedGates) {
  Tape tape;
  const Tensor w = tape.constant(Array({2, 3}, 0.0)), u = tape.constant(Array({3, 3}, 0.0)),
               b = tape.constant(Array({3}, 0.0));
  LstmWeights zero{w, u, b, w, u, b, w, u, b, w, u, b};
  auto [h, c] = lstm_step(tape.constant(Array::matrix(1, 2, {1, 2})), tape.constant(Array({1, 3}, 0.0)),
                          tape.constant(Array({1, 3}, 0.0)), zero);
  EXPECT_EQ(h.value(), Array({1, 3}, 0.0));
  EXPECT_EQ(c.value(), Array({1, 3}, 0.0));

  LstmWeights keep{w, u, tape.constant(Array({3}, -60.0)), w, u, tape.constant(Array({3}, 60.0)), w, u, b, w, u, b};
  const Array c0 = Array::matrix(1, 3, {0.5, -1.5, 2.0});
  auto [h2, c2] = lstm_step(tape.constant(Array::matrix(1, 2, {1, 2})), tape.constant(Array({1, 3}, 0.1)),
                            tape.constant(c0), keep);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(c2.value()[i], c0[i], 1e-12);
}

TEST(LstmStep, MatchesStraightLineImplementation) {
  std::mt19937_64 rng(3);
  const Array x = randn({2, 3}, rng, 1.0), h = randn({2, 2}, rng, 1.0), c = randn({2, 2}, rng, 1.0);
  std::vector<Array> p;
  for (int g = 0; g < 4; ++g) {
    p.push_back(randn({3, 2}, rng));
    p.push_back(randn({2, 2}, rng));
    p.push_back(randn({2}, rng));
  }
  Tape tape;
  auto k = [&](int i) { return tape.constant(p[i]); };
  LstmWeights w{k(0), k(1), k(2), k(3), k(4), k(5), k(6), k(7), k(8), k(9), k(10), k(11)};
  auto [hn, cn] = lstm_step(tape.constant(x), tape.constant(h), tape.constant(c), w);
  for (std::size_t row = 0; row < 2; ++row) {
    std::vector<std::vector<double>> pre(4);
    for (int g = 0; g < 4; ++g) {
      auto a = lin(x, row, p[3 * g]), b = lin(h, row, p[3 * g + 1]);
      for (std::size_t j = 0; j < 2; ++j) pre[g].push_back(a[j] + b[j] + p[3 * g + 2][j]);
    }
    for (std::size_t j = 0; j < 2; ++j) {
      const double cc = sig(pre[1][j]) * c.at(row, j) + sig(pre[0][j]) * std::tanh(pre[2][j]);
      EXPECT_NEAR(cn.value().at(row, j), cc, 1e-14);
      EXPECT_NEAR(hn.value().at(row, j), sig(pre[3][j]) * std::tanh(cc), 1e-14);
    }
  }
}

TEST(Forecast, OutputShapeForEveryKind) {
  std::mt19937_64 rng(4);
  for (TargetKind k : kAllKinds) {
    const TargetArch a = arch(k);
    const ParamGraph g = build_param_graph(a);
    Rng init(5);
    const ParamStore p = init_target_params(g, init);
    const Array y = forecast(a, g, p, randn({a.s_in, a.input_dim}, rng, 1.0));
    EXPECT_EQ(y.shape(), (Shape{3, 2})) << to_string(k);
    EXPECT_TRUE(y.all_finite());
  }
}

TEST(Forecast, ZeroGruGivesZeroForecast) {
  const TargetArch a = arch(TargetKind::Gru);
  const ParamGraph g = build_param_graph(a);
  ParamStore p;
  for (const ParamNode& n : g.nodes()) p.add(n.name, Array(n.shape, 0.0));
  std::mt19937_64 rng(6);
  EXPECT_EQ(forecast(a, g, p, randn({6, 2}, rng, 1.0)), Array({3, 2}, 0.0));
}

TEST(Forecast, NcdeZeroFieldDependsOnlyOnFirstObservation) {
  const TargetArch a = arch(TargetKind::Ncde);
  const ParamGraph g = build_param_graph(a);
  Rng init(7);
  ParamStore p = init_target_params(g, init);
  p.get("field.l2.W") = Array(p.get("field.l2.W").shape(), 0.0);
  std::mt19937_64 rng(8);
  Array w1 = randn({6, 2}, rng, 1.0), w2 = randn({6, 2}, rng, 1.0);
  for (std::size_t c = 0; c < 2; ++c) w2.at(0, c) = w1.at(0, c);
  const Array y1 = forecast(a, g, p, w1), y2 = forecast(a, g, p, w2);
  EXPECT_EQ(y1, y2);
  // head(init(x_1)) by hand.
  const Array& iw = p.get("init.W");
  const Array& hw = p.get("head.W");
  for (std::size_t o = 0; o < 6; ++o) {
    double acc = p.get("head.b")[o];
    for (std::size_t j = 0; j < 5; ++j) {
      double h0 = p.get("init.b")[j];
      for (std::size_t c = 0; c < 2; ++c) h0 += w1.at(0, c) * iw.at(c, j);
      acc += h0 * hw.at(j, o);
    }
    EXPECT_NEAR(y1[o], acc, 1e-12);
  }
}

TEST(Forecast, BatchRowsAreIndependent) {
  const TargetArch a = arch(TargetKind::SeqToSeqGru);
  const ParamGraph g = build_param_graph(a);
  Rng init(9);
  const ParamStore p = init_target_params(g, init);
  std::mt19937_64 rng(10);
  WindowBatch batch;
  for (std::size_t k = 0; k < a.s_in; ++k) batch.steps.push_back(randn({3, 2}, rng, 1.0));
  Tape tape;
  const Array all = forecast(a, g, bind_param_set(tape, p, g), tape, batch).value();
  for (std::size_t r = 0; r < 3; ++r) {
    Array w({a.s_in, 2});
    for (std::size_t k = 0; k < a.s_in; ++k)
      for (std::size_t c = 0; c < 2; ++c) w.at(k, c) = batch.steps[k].at(r, c);
    const Array one = forecast(a, g, p, w);
    for (std::size_t i = 0; i < one.size(); ++i) EXPECT_NEAR(all.at(r, i), one[i], 1e-14);
  }
}

TEST(Forecast, ShapeMismatchIsReported) {
  const TargetArch a = arch(TargetKind::Gru);
  const ParamGraph g = build_param_graph(a);
  Rng init(11);
  ParamStore p = init_target_params(g, init);
  EXPECT_THROW(forecast(a, g, p, Array({5, 2})), Error);
  p.get("head.W") = Array({2, 2});
  Tape tape;
  EXPECT_THROW(bind_param_set(tape, p, g), Error);
}

TEST(InitTargetParams, FollowsGraphOrderWithZeroBiases) {
  const ParamGraph g = build_param_graph(arch(TargetKind::Lstm));
  Rng init(12);
  const ParamStore p = init_target_params(g, init);
  ASSERT_EQ(p.size(), g.size());
  for (std::size_t l = 0; l < g.size(); ++l) {
    EXPECT_EQ(p.name(l), g.node(l).name);
    EXPECT_EQ(p.value(l).shape(), g.node(l).shape);
    if (g.node(l).shape.size() == 1) {
      EXPECT_EQ(p.value(l), Array(g.node(l).shape, 0.0));
    }
  }
}
