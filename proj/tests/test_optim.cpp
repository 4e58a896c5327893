#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hypergpa/gradcheck.hpp"
#include "hypergpa/optim.hpp"

using namespace hypergpa;

TEST(ParamStore, AddFindAndDuplicates) {
  ParamStore s;
  s.add("a", Array({2}, 1.0));
  s.add("b", Array({2, 3}, 0.0));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(*s.find("b"), 1u);
  EXPECT_FALSE(s.find("c").has_value());
  EXPECT_EQ(s.scalar_count(), 8u);
  EXPECT_THROW(s.add("a", Array({1})), Error);
  EXPECT_THROW(s.get("zz"), Error);
}

TEST(BoundParams, LookupByName) {
  ParamStore s;
  s.add("w", Array({2}, 3.0));
  Tape tape;
  BoundParams p(tape, s);
  EXPECT_EQ(p["w"].value(), Array({2}, 3.0));
  EXPECT_TRUE(p["w"].requires_grad());
  EXPECT_THROW(p["x"], Error);
  std::vector<Tensor> leaves{tape.leaf(Array({2}, 1.0))};
  BoundParams q(s, leaves);
  EXPECT_EQ(q["w"].id(), leaves[0].id());
  EXPECT_THROW(BoundParams(s, std::span<const Tensor>{}), Error);
}

TEST(Xavier, BoundsAndZeroBiases) {
  Rng rng(3);
  Array w = xavier_uniform({6, 10}, rng);
  const double bound = std::sqrt(6.0 / 16.0);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_LE(std::fabs(w[i]), bound);
  EXPECT_EQ(xavier_uniform({5}, rng), Array({5}, 0.0));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore s;
  s.add("p", Array::scalar(1.0));
  AdamState st(s, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  adam_step(s, std::vector<Array>{Array::scalar(1.0)}, st);
  // m_hat = 1, v_hat = 1: p = 1 - 0.1 * 1 / (1 + 1e-8).
  EXPECT_NEAR(s.get("p").item(), 0.9, 1e-8);
}

TEST(Adam, ZeroGradientWithoutDecayKeepsParams) {
  ParamStore s;
  s.add("p", Array({3}, std::vector<double>{1, -2, 3}));
  const ParamStore before = s;
  AdamState st(s, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  for (int i = 0; i < 3; ++i) adam_step(s, std::vector<Array>{Array({3}, 0.0)}, st);
  EXPECT_EQ(s, before);
}

TEST(Adam, DecoupledWeightDecay) {
  ParamStore s;
  s.add("p", Array::scalar(2.0));
  AdamState st(s, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.5});
  adam_step(s, std::vector<Array>{Array::scalar(0.0)}, st);
  EXPECT_DOUBLE_EQ(s.get("p").item(), 2.0 - 0.1 * 0.5 * 2.0);
}

TEST(Adam, MomentShapesFollowParams) {
  ParamStore s;
  s.add("a", Array({2, 3}));
  s.add("b", Array({4}));
  AdamState st(s);
  EXPECT_EQ(st.first_moment[0].shape(), (Shape{2, 3}));
  EXPECT_EQ(st.second_moment[1].shape(), (Shape{4}));
}

TEST(Adam, DeterministicAcrossIdenticalCalls) {
  auto run = [] {
    ParamStore s;
    s.add("p", Array({2}, std::vector<double>{0.3, -0.7}));
    AdamState st(s);
    for (int i = 0; i < 5; ++i) adam_step(s, std::vector<Array>{Array({2}, std::vector<double>{0.1 * i, -0.2})}, st);
    return s;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, NonFiniteGradientLeavesStoreUntouched) {
  ParamStore s;
  s.add("ok", Array({1}, 1.0));
  s.add("bad", Array({1}, 1.0));
  const ParamStore before = s;
  AdamState st(s);
  try {
    adam_step(s, std::vector<Array>{Array({1}, 1.0), Array({1}, std::numeric_limits<double>::quiet_NaN())}, st);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
  }
  EXPECT_EQ(s, before);
  EXPECT_EQ(st.step, 0);
}

TEST(GradCheck, QuadraticIsExactToTolerance) {
  GradCheckOptions opts;
  opts.eps = 1e-6;
  auto r = finite_diff_check([](Tape&, std::span<const Tensor> p) { return sum(mul(p[0], p[0])); },
                             std::vector<Array>{Array::scalar(3.0)}, opts);
  EXPECT_LT(r.max_rel_error, 1e-7);
  EXPECT_EQ(r.entries_checked, 1u);
}

TEST(GradCheck, DetectsAWrongGradient) {
  // A loss whose recorded backward is deliberately wrong by a factor of two.
  auto r = finite_diff_check(
      [](Tape& tape, std::span<const Tensor> p) {
        const double v = p[0].value().item();
        const NodeId id = p[0].id();
        return tape.record(Array::scalar(v * v), {p[0]},
                           [id, v](const Tape&, NodeId, const Array& g, GradSink& sink) {
                             sink.slot(id)[0] += 4.0 * v * g[0];
                           });
      },
      std::vector<Array>{Array::scalar(1.5)});
  EXPECT_GT(r.max_rel_error, 0.4);
}

TEST(GradCheck, SamplingLimitsEntries) {
  GradCheckOptions opts;
  opts.max_entries_per_param = 3;
  auto r = finite_diff_check([](Tape&, std::span<const Tensor> p) { return sum(tanh(p[0])); },
                             std::vector<Array>{Array({10}, 0.2)}, opts);
  EXPECT_EQ(r.entries_checked, 3u);
  EXPECT_LT(r.max_rel_error, 1e-6);
}
