#include <gtest/gtest.h>

#include "hypergpa/config.hpp"

using namespace hypergpa;

namespace {

std::string config_error(const std::string& text) {
  try {
    parse_config(text).validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, DefaultsAreValid) { EXPECT_NO_THROW(RunConfig{}.validate()); }

TEST(Config, ParsesKeysCommentsAndBlanks) {
  const RunConfig c = parse_config(
      "# comment\n"
      "\n"
      "method = vanilla\n"
      "target.kind = lstm\n"
      "  target.hidden_dim=8  \n"
      "train.lambda = 0.25\n"
      "l1.use_agc = false\n"
      "l1.grad_mode = adjoint\n"
      "l2.graph_fn = gcn\n"
      "bench.targets = gru, ncde\n"
      "run.seeds = 3,4,5\n"
      "synth.kind = regime-switch\n");
  EXPECT_EQ(c.method, Method::Vanilla);
  EXPECT_EQ(c.arch.kind, TargetKind::Lstm);
  EXPECT_EQ(c.arch.hidden_dim, 8u);
  EXPECT_EQ(c.train.lambda, 0.25);
  EXPECT_FALSE(c.l1.use_agc);
  EXPECT_EQ(c.l1.solver.mode, GradMode::Adjoint);
  EXPECT_EQ(c.l2.graph_fn, GraphFn::Gcn);
  EXPECT_EQ(c.bench_targets, (std::vector<TargetKind>{TargetKind::Gru, TargetKind::Ncde}));
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{3, 4, 5}));
  EXPECT_EQ(c.synth.kind, DriftKind::RegimeSwitch);
}

TEST(Config, UnknownKeyIsNamed) {
  EXPECT_EQ(config_error("train.bogus = 1\n"), "unknown config key 'train.bogus'");
}

TEST(Config, BadValuesNameTheKey) {
  EXPECT_EQ(config_error("train.epochs = many\n"), "train.epochs: invalid value 'many'");
  EXPECT_NE(config_error("l1.use_agc = maybe\n").find("l1.use_agc"), std::string::npos);
  EXPECT_NE(config_error("method = magic\n").find("magic"), std::string::npos);
  EXPECT_NE(config_error("no equals sign\n").find("line 1"), std::string::npos);
  EXPECT_NE(config_error("l2.candidates = 0\n").find("l2"), std::string::npos);
  EXPECT_NE(config_error("run.seeds = \n").find("run.seeds"), std::string::npos);
  EXPECT_NE(config_error("target.s_in = 60\n").find("synth"), std::string::npos);
}

TEST(Config, IncompatibleMethodAndArch) {
  const std::string err = config_error("method = hypergru\ntarget.kind = ncde\n");
  EXPECT_NE(err.find("incompatible method/arch"), std::string::npos);
  EXPECT_EQ(config_error("method = hypergru\ntarget.kind = seq2seq-gru\n"), "");
}

TEST(Config, ResolvedTextRoundTrips) {
  RunConfig c = parse_config("method = revin\ntrain.lr = 0.003\nrun.seeds = 1,2\nbench.targets = gru,lstm\n");
  const std::string text = resolved_text(c);
  const RunConfig back = parse_config(text);
  EXPECT_EQ(resolved_text(back), text);
  EXPECT_EQ(back.train.adam.learning_rate, 0.003);
  EXPECT_NE(text.find("method = revin\n"), std::string::npos);
  EXPECT_NE(text.find("run.seeds = 1,2\n"), std::string::npos);
}

TEST(Config, MissingFile) { EXPECT_THROW(load_config("/nonexistent/run.cfg"), ConfigError); }
