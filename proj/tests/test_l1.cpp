#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hypergpa/l1.hpp"

using namespace hypergpa;

namespace {

L1Config cfg(std::size_t series = 3, bool use_agc = true) {
  L1Config c;
  c.series = series;
  c.input_dim = 2;
  c.hidden_dim = 4;
  c.gamma_hidden = 6;
  c.embed_dim = 3;
  c.field_hidden = 5;
  c.use_agc = use_agc;
  return c;
}

ParamStore params(const L1Config& c, std::uint64_t seed = 1) {
  ParamStore s;
  Rng rng(seed);
  init_l1_params(s, c, rng);
  return s;
}

std::vector<Array> series_data(std::size_t m, std::size_t t) {
  std::vector<Array> out;
  for (std::size_t i = 0; i < m; ++i) {
    Array a({t, 2});
    for (std::size_t k = 0; k < t; ++k) {
      a.at(k, 0) = std::sin(0.5 * k + i);
      a.at(k, 1) = std::cos(0.3 * k - 2.0 * i);
    }
    out.push_back(std::move(a));
  }
  return out;
}

void zero(ParamStore& s, const std::string& name) { s.get(name) = Array(s.get(name).shape(), 0.0); }

}  // namespace

TEST(L1Params, OneGammaGroupPerSeries) {
  const ParamStore s = params(cfg(3));
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(s.find("l1.gamma" + std::to_string(i) + ".W0"));
    EXPECT_TRUE(s.find("l1.gamma" + std::to_string(i) + ".b1"));
  }
  EXPECT_FALSE(s.find("l1.gamma3.W0"));
  EXPECT_EQ(s.get("l1.E").shape(), (Shape{3, 3}));
  EXPECT_EQ(s.get("l1.out.W").shape(), (Shape{5, 8}));
  EXPECT_FALSE(params(cfg(3, false)).find("l1.E"));
}

TEST(AgcAdjacency, HandEvaluatedIdentityCase) {
  Tape tape;
  Tensor eye = tape.constant(Array::matrix(2, 2, {1, 0, 0, 1}));
  const Array a = agc_adjacency(eye).value();
  const double e = std::exp(1.0);
  EXPECT_NEAR(a.at(0, 0), e / (e + 1), 1e-15);
  EXPECT_NEAR(a.at(0, 1), 1 / (e + 1), 1e-15);
  EXPECT_NEAR(a.at(1, 0), 1 / (e + 1), 1e-15);
  EXPECT_NEAR(a.at(1, 1), e / (e + 1), 1e-15);
  const Array out = agc(eye, eye, eye, tape.constant(Array({2}, 0.0))).value();
  EXPECT_NEAR(out.at(0, 0), 1 + e / (e + 1), 1e-15);
  EXPECT_NEAR(out.at(0, 1), 1 / (e + 1), 1e-15);
}

TEST(AgcAdjacency, ZeroEmbeddingsAreUniform) {
  Tape tape;
  const Array a = agc_adjacency(tape.constant(Array({4, 3}, 0.0))).value();
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_DOUBLE_EQ(a[k], 0.25);
}

TEST(AgcAdjacency, RowsAreSimplex) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> d;
  for (int trial = 0; trial < 20; ++trial) {
    Array e({5, 3});
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = 2.0 * d(rng);
    Tape tape;
    const Array a = agc_adjacency(tape.constant(e)).value();
    for (std::size_t r = 0; r < 5; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 5; ++c) {
        EXPECT_GE(a.at(r, c), 0.0);
        acc += a.at(r, c);
      }
      EXPECT_NEAR(acc, 1.0, 1e-14);
    }
  }
}

TEST(AgcAdjacency, SingleSeriesIsOne) {
  Tape tape;
  EXPECT_EQ(agc_adjacency(tape.constant(Array::matrix(1, 2, {0.3, -2.0}))).value().item(), 1.0);
}

TEST(Agc, WithoutEmbeddingsIsAffine) {
  Tape tape;
  Tensor z = tape.constant(Array::matrix(2, 2, {1, 2, 3, 4}));
  Tensor w = tape.constant(Array::matrix(2, 1, {1, -1}));
  Tensor b = tape.constant(Array({1}, 0.5));
  EXPECT_EQ(agc(z, Tensor(), w, b).value(), Array::matrix(2, 1, {-0.5, -0.5}));
}

TEST(EmbedInitial, ZeroGammaGivesZeroState) {
  const L1Config c = cfg();
  ParamStore s = params(c);
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s.name(i).find("gamma") != std::string::npos) s.value(i) = Array(s.value(i).shape(), 0.0);
  Tape tape;
  BoundParams p(tape, s);
  EXPECT_EQ(embed_initial(p, c, tape.constant(Array({3, 2}, 0.7))).value(), Array({3, 4}, 0.0));
}

TEST(EmbedInitial, PerSeriesParameters) {
  const L1Config c = cfg(2);
  const ParamStore s = params(c);
  Tape tape;
  BoundParams p(tape, s);
  const Array h = embed_initial(p, c, tape.constant(Array({2, 2}, 0.7))).value();
  double diff = 0.0;
  for (std::size_t j = 0; j < 4; ++j) diff += std::fabs(h.at(0, j) - h.at(1, j));
  EXPECT_GT(diff, 1e-3);
}

TEST(FieldG, ShapeAndBoundedness) {
  const L1Config c = cfg();
  const ParamStore s = params(c);
  Tape tape;
  BoundParams p(tape, s);
  const Array f = field_G(tape.constant(Array({3, 4}, 0.3)), field_params(p, c), c).value();
  EXPECT_EQ(f.shape(), (Shape{3, 8}));
  for (std::size_t k = 0; k < f.size(); ++k) EXPECT_LE(std::fabs(f[k]), 1.0);
}

TEST(FieldG, CouplingCarriesPerturbations) {
  const L1Config c = cfg();
  const ParamStore s = params(c);
  auto eval = [&](double bump) {
    Tape tape;
    BoundParams p(tape, s);
    Array h({3, 4}, 0.2);
    h.at(2, 1) += bump;
    return field_G(tape.constant(h), field_params(p, c), c).value();
  };
  const Array a = eval(0.0), b = eval(0.5);
  for (std::size_t r = 0; r < 2; ++r) {
    double diff = 0.0;
    for (std::size_t k = 0; k < 8; ++k) diff += std::fabs(a.at(r, k) - b.at(r, k));
    EXPECT_GT(diff, 1e-6) << "row " << r;
  }

  const L1Config plain = cfg(3, false);
  const ParamStore s2 = params(plain);
  auto eval_plain = [&](double bump) {
    Tape tape;
    BoundParams p(tape, s2);
    Array h({3, 4}, 0.2);
    h.at(2, 1) += bump;
    return field_G(tape.constant(h), field_params(p, plain), plain).value();
  };
  const Array x = eval_plain(0.0), y = eval_plain(0.5);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(x.at(0, k), y.at(0, k));
}

TEST(EncodePeriods, ZeroFieldReturnsInitialEmbedding) {
  const L1Config c = cfg();
  ParamStore s = params(c);
  zero(s, "l1.out.W");
  zero(s, "l1.out.b");
  const auto data = series_data(3, 10);
  Tape tape;
  BoundParams p(tape, s);
  Array first({3, 2});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 2; ++k) first.at(i, k) = data[i].at(0, k);
  const Array encoded = encode_periods(p, c, data).value();
  EXPECT_EQ(encoded, embed_initial(p, c, tape.constant(first)).value());
}

TEST(EncodePeriods, ShapeAndDeterminism) {
  const L1Config c = cfg();
  const ParamStore s = params(c);
  const auto data = series_data(3, 12);
  auto run = [&] {
    Tape tape;
    BoundParams p(tape, s);
    return encode_periods(p, c, data).value();
  };
  const Array a = run();
  EXPECT_EQ(a.shape(), (Shape{3, 4}));
  EXPECT_EQ(a, run());
}

TEST(EncodePeriods, SingleSeriesMatchesUncoupledEncoding) {
  // With M = 1 the adjacency is [[1]], so (I + A) Z = 2 Z.
  L1Config c = cfg(1);
  const ParamStore s = params(c);
  const auto data = series_data(1, 8);
  Tape tape;
  BoundParams p(tape, s);
  const Array coupled = encode_periods(p, c, data).value();
  ParamStore manual;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s.name(i) == "l1.E") continue;
    Array v = s.value(i);
    if (s.name(i) == "l1.agc1.W" || s.name(i) == "l1.agc2.W")
      for (std::size_t k = 0; k < v.size(); ++k) v[k] *= 2.0;
    manual.add(s.name(i), v);
  }
  L1Config plain = c;
  plain.use_agc = false;
  Tape t2;
  BoundParams p2(t2, manual);
  const Array uncoupled = encode_periods(p2, plain, data).value();
  for (std::size_t k = 0; k < coupled.size(); ++k) EXPECT_NEAR(coupled[k], uncoupled[k], 1e-13);
}

TEST(EncodePeriods, RejectsMismatchedSeries) {
  const L1Config c = cfg();
  const ParamStore s = params(c);
  Tape tape;
  BoundParams p(tape, s);
  auto data = series_data(3, 8);
  data[1] = Array({7, 2});
  EXPECT_THROW(encode_periods(p, c, data), Error);
  EXPECT_THROW(encode_periods(p, c, series_data(2, 8)), Error);
}
