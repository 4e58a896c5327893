#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "hypergpa/data.hpp"

using namespace hypergpa;

namespace {

TimeSeriesCorpus read(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

std::string error_of(const std::string& text) {
  try {
    read(text);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

double mean_offdiag_corr(const Array& x) {
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> mu(m, 0.0), sd(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) mu[i] += x.at(i, j) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j) sd[i] += (x.at(i, j) - mu[i]) * (x.at(i, j) - mu[i]);
    sd[i] = std::sqrt(sd[i]);
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < m; ++a)
    for (std::size_t b = a + 1; b < m; ++b) {
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j) c += (x.at(a, j) - mu[a]) * (x.at(b, j) - mu[b]);
      acc += c / (sd[a] * sd[b]);
    }
  return acc / static_cast<double>(m * (m - 1) / 2);
}

const char* kSmall =
    "series_id,period_id,step,f0\n"
    "0,0,0,1\n0,0,1,2\n0,1,0,3\n"
    "1,0,0,4\n1,0,1,5\n1,1,0,6\n";

}  // namespace

TEST(Csv, ParsesBlocks) {
  const TimeSeriesCorpus c = read(kSmall);
  EXPECT_EQ(c.series(), 2u);
  EXPECT_EQ(c.periods(), 2u);
  EXPECT_EQ(c.dim(), 1u);
  EXPECT_EQ(c.period_length(0), 2u);
  EXPECT_EQ(c.period_length(1), 1u);
  EXPECT_EQ(c.block(1, 0), Array::matrix(2, 1, {4, 5}));
  EXPECT_EQ(c.concat(0, 0, 2), Array::matrix(3, 1, {1, 2, 3}));
}

TEST(Csv, AcceptsCrlf) {
  EXPECT_EQ(read("series_id,period_id,step,f0\r\n0,0,0,1.5\r\n").block(0, 0).item(), 1.5);
}

TEST(Csv, RoundTripIsExact) {
  SynthConfig cfg;
  cfg.series = 3;
  cfg.periods = 4;
  cfg.period_length = 6;
  const TimeSeriesCorpus c = synth_drift(cfg);
  std::ostringstream out;
  write_csv(out, c);
  EXPECT_EQ(read(out.str()), c);
  std::ostringstream again;
  write_csv(again, read(out.str()));
  EXPECT_EQ(again.str(), out.str());
}

TEST(Csv, Errors) {
  EXPECT_NE(error_of("").find("empty"), std::string::npos);
  EXPECT_NE(error_of("a,b,c,d\n0,0,0,1\n").find("header"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f1\n").find("f0"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n").find("no data"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,abc\n").find("row 2: non-numeric"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,nan\n").find("non-numeric"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0\n").find("expected 4 fields"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,1\n0,0,2,1\n").find("sorted"), std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,1\n0,1,0,1\n1,0,0,1\n").find("periods"),
            std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,1\n0,0,1,1\n1,0,0,1\n").find("length mismatch"),
            std::string::npos);
  EXPECT_NE(error_of("series_id,period_id,step,f0\n0,0,0,1\n0,0,0,1\n").find("row 3"), std::string::npos);
  EXPECT_THROW(load_csv("/nonexistent/corpus.csv"), Error);
}

TEST(Corpus, RejectsInconsistentBlocks) {
  EXPECT_THROW(TimeSeriesCorpus(1, 2, {Array({2, 1})}), Error);
  EXPECT_THROW(TimeSeriesCorpus(1, 1, {Array({0, 1})}), Error);
  EXPECT_THROW(TimeSeriesCorpus(1, 1, {Array({2, 1}, std::nan(""))}), Error);
  EXPECT_THROW(TimeSeriesCorpus(2, 1, {Array({2, 1}), Array({2, 2})}), Error);
  const TimeSeriesCorpus c = read(kSmall);
  EXPECT_THROW(c.block(2, 0), Error);
  EXPECT_THROW(c.concat(0, 1, 2), Error);
}

TEST(Split, PeriodRoles) {
  const Split s = split(5);
  EXPECT_EQ(s.train, (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(s.validation, 4u);
  EXPECT_EQ(s.test, 5u);
  EXPECT_THROW(split(2), Error);
}

TEST(Normalization, FitsOnTrainingPeriodsOnly) {
  // Series 0: training periods {1, 3}, later periods are huge.
  std::vector<Array> blocks{Array::matrix(1, 1, {1}), Array::matrix(1, 1, {3}),
                            Array::matrix(1, 1, {100}), Array::matrix(1, 1, {-100})};
  const Normalized n = normalize(TimeSeriesCorpus(1, 4, blocks));
  EXPECT_DOUBLE_EQ(n.stats.mean.item(), 2.0);
  EXPECT_DOUBLE_EQ(n.stats.stdev.item(), 1.0);
  EXPECT_DOUBLE_EQ(n.corpus.block(0, 0).item(), -1.0);
  EXPECT_DOUBLE_EQ(n.corpus.block(0, 2).item(), 98.0);
  EXPECT_TRUE(n.stats.warnings.empty());
}

TEST(Normalization, TrainingStatisticsAreStandard) {
  SynthConfig cfg;
  cfg.series = 3;
  cfg.periods = 6;
  cfg.period_length = 10;
  const Normalized n = normalize(synth_drift(cfg));
  for (std::size_t i = 0; i < 3; ++i) {
    const Array x = n.corpus.concat(i, 0, 4);
    for (std::size_t c = 0; c < 2; ++c) {
      double m = 0.0, v = 0.0;
      for (std::size_t k = 0; k < x.rows(); ++k) m += x.at(k, c);
      m /= static_cast<double>(x.rows());
      for (std::size_t k = 0; k < x.rows(); ++k) v += (x.at(k, c) - m) * (x.at(k, c) - m);
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(v / static_cast<double>(x.rows()), 1.0, 1e-12);
    }
  }
}

TEST(Normalization, ConstantSeriesWarnsAndStaysFinite) {
  std::vector<Array> blocks(3, Array::matrix(2, 1, {4, 4}));
  const Normalized n = normalize(TimeSeriesCorpus(1, 3, blocks));
  ASSERT_EQ(n.stats.warnings.size(), 1u);
  EXPECT_EQ(n.stats.stdev.item(), kMinStd);
  EXPECT_EQ(n.corpus.block(0, 2), Array::matrix(2, 1, {0, 0}));
}

TEST(Normalization, DenormalizeInverts) {
  SynthConfig cfg;
  cfg.periods = 5;
  const TimeSeriesCorpus c = synth_drift(cfg);
  const Normalized n = normalize(c);
  const TimeSeriesCorpus back = denormalize(n.corpus, n.stats);
  for (std::size_t b = 0; b < c.blocks().size(); ++b)
    for (std::size_t k = 0; k < c.blocks()[b].size(); ++k)
      EXPECT_NEAR(back.blocks()[b][k], c.blocks()[b][k], 1e-12);
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig cfg;
  EXPECT_EQ(synth_drift(cfg), synth_drift(cfg));
  SynthConfig other = cfg;
  other.seed = 1;
  EXPECT_FALSE(synth_drift(cfg) == synth_drift(other));
}

TEST(Synth, ShapeAndValidation) {
  SynthConfig cfg;
  cfg.series = 5;
  cfg.periods = 7;
  cfg.period_length = 12;
  cfg.dim = 3;
  const TimeSeriesCorpus c = synth_drift(cfg);
  EXPECT_EQ(c.series(), 5u);
  EXPECT_EQ(c.periods(), 7u);
  EXPECT_EQ(c.dim(), 3u);
  EXPECT_EQ(c.period_length(6), 12u);
  cfg.period_length = 1;
  EXPECT_THROW(synth_drift(cfg), Error);
  cfg.period_length = 12;
  cfg.noise = -1.0;
  EXPECT_THROW(synth_drift(cfg), Error);
  EXPECT_EQ(parse_drift_kind("regime-switch"), DriftKind::RegimeSwitch);
  EXPECT_THROW(parse_drift_kind("ramp"), Error);
}

TEST(Synth, AmplitudeRampGrowsPeriodOverPeriod) {
  SynthConfig cfg;
  cfg.series = 4;
  cfg.periods = 8;
  double prev = 0.0;
  const TimeSeriesCorpus c = synth_drift(cfg);
  for (std::size_t j = 0; j < cfg.periods; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < cfg.series; ++i) {
      const Array& b = c.block(i, j);
      for (std::size_t k = 0; k < b.size(); ++k) acc += b[k] * b[k];
    }
    const double rms = std::sqrt(acc / static_cast<double>(cfg.series * cfg.period_length * cfg.dim));
    EXPECT_GT(rms, prev) << "period " << j;
    prev = rms;
  }
}

TEST(Synth, UncoupledDriversAreNearlyUncorrelated) {
  SynthConfig cfg;
  cfg.series = 8;
  cfg.periods = 20;
  cfg.period_length = 4;
  cfg.coupling = 0.0;
  const double free = mean_offdiag_corr(synth_drift_detailed(cfg).drivers);
  EXPECT_LT(std::fabs(free), 0.2);
  cfg.coupling = 2.0;
  EXPECT_GT(mean_offdiag_corr(synth_drift_detailed(cfg).drivers), free);
}

TEST(Synth, AllKindsProduceFiniteData) {
  for (DriftKind k : {DriftKind::AmplitudeRamp, DriftKind::FrequencyRamp, DriftKind::RegimeSwitch}) {
    SynthConfig cfg;
    cfg.kind = k;
    const SynthCorpus s = synth_drift_detailed(cfg);
    EXPECT_EQ(s.latent.shape(), (Shape{4, 8}));
    for (const Array& b : s.corpus.blocks()) EXPECT_TRUE(b.all_finite());
  }
}
