#pragma once

// M series x N periods of regularly sampled observation vectors, CSV I/O,
// per-series normalization, the train/validation/test split and a synthetic
// drifting corpus.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hypergpa/tensor.hpp"

namespace hypergpa {

class TimeSeriesCorpus {
 public:
  TimeSeriesCorpus() = default;
  // blocks[i * periods + j] is the |D_ij| x dim observation matrix of series
  // i in period j. Every series must have the same length in a given period.
  TimeSeriesCorpus(std::size_t series, std::size_t periods, std::vector<Array> blocks);

  std::size_t series() const { return series_; }
  std::size_t periods() const { return periods_; }
  std::size_t dim() const { return dim_; }
  std::size_t period_length(std::size_t j) const { return block(0, j).rows(); }

  // 0-based indices.
  const Array& block(std::size_t i, std::size_t j) const;
  // Periods first .. first + count - 1 of series i stacked in time.
  Array concat(std::size_t i, std::size_t first, std::size_t count) const;

  const std::vector<Array>& blocks() const { return blocks_; }

  friend bool operator==(const TimeSeriesCorpus&, const TimeSeriesCorpus&) = default;

 private:
  std::size_t series_ = 0;
  std::size_t periods_ = 0;
  std::size_t dim_ = 0;
  std::vector<Array> blocks_;
};

// Header: series_id,period_id,step,f0,...,f{d-1}; rows sorted by
// (series_id, period_id, step), all ids 0-based.
TimeSeriesCorpus read_csv(std::istream& in);
TimeSeriesCorpus load_csv(const std::string& path);
void write_csv(std::ostream& out, const TimeSeriesCorpus& corpus);
void write_csv(const std::string& path, const TimeSeriesCorpus& corpus);

struct NormStats {
  Array mean;  // M x dim
  Array stdev; // M x dim
  std::vector<std::string> warnings;
};

constexpr double kMinStd = 1e-8;

// Per-series, per-feature z-score fit on the training periods 1..N-2 only.
NormStats fit_normalization(const TimeSeriesCorpus& corpus);
TimeSeriesCorpus apply_normalization(const TimeSeriesCorpus& corpus, const NormStats& stats);
TimeSeriesCorpus denormalize(const TimeSeriesCorpus& corpus, const NormStats& stats);

struct Normalized {
  TimeSeriesCorpus corpus;
  NormStats stats;
};
Normalized normalize(const TimeSeriesCorpus& corpus);

// 1-based period indices.
struct Split {
  std::vector<std::size_t> train;
  std::size_t validation = 0;
  std::size_t test = 0;
};
Split split(std::size_t periods);

enum class DriftKind { AmplitudeRamp, FrequencyRamp, RegimeSwitch };

std::string_view to_string(DriftKind kind);
DriftKind parse_drift_kind(std::string_view text);

struct SynthConfig {
  std::size_t series = 4;
  std::size_t periods = 8;
  std::size_t period_length = 48;
  std::size_t dim = 2;
  DriftKind kind = DriftKind::AmplitudeRamp;
  double coupling = 0.5;
  double noise = 0.05;
  std::uint64_t seed = 0;

  void validate(std::size_t min_period_length = 2) const;
};

struct SynthCorpus {
  TimeSeriesCorpus corpus;
  // M x N period-level random drivers after cross-series mixing.
  Array drivers;
  // M x N period-level latent parameter (amplitude, frequency or regime level).
  Array latent;
};

SynthCorpus synth_drift_detailed(const SynthConfig& cfg);
TimeSeriesCorpus synth_drift(const SynthConfig& cfg);

}  // namespace hypergpa
