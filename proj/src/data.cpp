#include "hypergpa/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include "hypergpa/optim.hpp"

namespace hypergpa {

TimeSeriesCorpus::TimeSeriesCorpus(std::size_t series, std::size_t periods, std::vector<Array> blocks)
    : series_(series), periods_(periods), blocks_(std::move(blocks)) {
  if (series == 0 || periods == 0) throw Error("corpus needs at least one series and one period");
  if (blocks_.size() != series * periods) {
    throw Error("corpus expects " + std::to_string(series * periods) + " blocks, got " +
                std::to_string(blocks_.size()));
  }
  dim_ = blocks_.front().rank() == 2 ? blocks_.front().cols() : 0;
  if (dim_ == 0) throw Error("corpus blocks must be T x dim matrices with dim >= 1");
  for (std::size_t i = 0; i < series; ++i) {
    for (std::size_t j = 0; j < periods; ++j) {
      const Array& b = blocks_[i * periods + j];
      const std::string where = "series " + std::to_string(i) + " period " + std::to_string(j);
      if (b.rank() != 2 || b.cols() != dim_) throw Error("feature count mismatch at " + where);
      if (b.rows() == 0) throw Error("empty period at " + where);
      if (b.rows() != blocks_[j].rows()) throw Error("period length mismatch at " + where);
      if (!b.all_finite()) throw Error("non-finite observation at " + where);
    }
  }
}

const Array& TimeSeriesCorpus::block(std::size_t i, std::size_t j) const {
  if (i >= series_ || j >= periods_) {
    throw Error("corpus index (" + std::to_string(i) + ", " + std::to_string(j) + ") out of range");
  }
  return blocks_[i * periods_ + j];
}

Array TimeSeriesCorpus::concat(std::size_t i, std::size_t first, std::size_t count) const {
  if (count == 0 || first + count > periods_) throw Error("corpus period range out of bounds");
  std::size_t rows = 0;
  for (std::size_t j = first; j < first + count; ++j) rows += period_length(j);
  Array out({rows, dim_});
  double* dst = out.ptr();
  for (std::size_t j = first; j < first + count; ++j) {
    const Array& b = block(i, j);
    dst = std::copy(b.ptr(), b.ptr() + b.size(), dst);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::size_t parse_index(const std::string& text, std::size_t row, const char* column) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw Error("row " + std::to_string(row) + ": " + column + " is not a non-negative integer: '" +
                text + "'");
  }
  return value;
}

double parse_value(const std::string& text, std::size_t row) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty() || !std::isfinite(value)) {
    throw Error("row " + std::to_string(row) + ": non-numeric value '" + text + "'");
  }
  return value;
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("failed to format value");
  out.append(buf, ptr);
}

}  // namespace

TimeSeriesCorpus read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error("csv: empty input");
  const std::vector<std::string> header = split_fields(trim_cr(line));
  if (header.size() < 4 || header[0] != "series_id" || header[1] != "period_id" || header[2] != "step") {
    throw Error("csv: header must start with series_id,period_id,step");
  }
  const std::size_t dim = header.size() - 3;
  for (std::size_t c = 0; c < dim; ++c) {
    if (header[3 + c] != "f" + std::to_string(c)) {
      throw Error("csv: expected column 'f" + std::to_string(c) + "', got '" + header[3 + c] + "'");
    }
  }

  // rows[i][j] holds the flattened observations of series i, period j.
  std::vector<std::vector<std::vector<double>>> rows;
  std::size_t row = 1;
  std::size_t last_i = 0, last_j = 0, last_step = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++row;
    line = trim_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> f = split_fields(line);
    if (f.size() != header.size()) {
      throw Error("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                  " fields, got " + std::to_string(f.size()));
    }
    const std::size_t i = parse_index(f[0], row, "series_id");
    const std::size_t j = parse_index(f[1], row, "period_id");
    const std::size_t step = parse_index(f[2], row, "step");

    const bool next_step = any && i == last_i && j == last_j && step == last_step + 1;
    const bool next_period = (!any || (i == last_i && j == last_j + 1) || (i == last_i + 1 && j == 0)) &&
                             step == 0;
    if (!any && (i != 0 || j != 0)) throw Error("row " + std::to_string(row) + ": ids must start at 0");
    if (!next_step && !next_period) {
      throw Error("row " + std::to_string(row) + ": rows must be sorted by (series_id, period_id, step) "
                  "with contiguous ids");
    }
    if (i >= rows.size()) rows.emplace_back();
    if (j >= rows[i].size()) rows[i].emplace_back();
    for (std::size_t c = 0; c < dim; ++c) rows[i][j].push_back(parse_value(f[3 + c], row));
    last_i = i;
    last_j = j;
    last_step = step;
    any = true;
  }
  if (!any) throw Error("csv: no data rows");

  const std::size_t series = rows.size();
  const std::size_t periods = rows.front().size();
  std::vector<std::size_t> lengths;
  for (const auto& period : rows.front()) lengths.push_back(period.size() / dim);
  std::vector<Array> blocks;
  for (std::size_t i = 0; i < series; ++i) {
    if (rows[i].size() != periods) {
      throw Error("csv: series " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                  " periods, expected " + std::to_string(periods));
    }
    for (std::size_t j = 0; j < periods; ++j) {
      const std::size_t len = rows[i][j].size() / dim;
      if (len != lengths[j]) {
        throw Error("period length mismatch at series " + std::to_string(i) + " period " +
                    std::to_string(j) + ": " + std::to_string(len) + " steps, expected " +
                    std::to_string(lengths[j]));
      }
      blocks.emplace_back(Shape{len, dim}, std::move(rows[i][j]));
    }
  }
  return TimeSeriesCorpus(series, periods, std::move(blocks));
}

TimeSeriesCorpus load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const TimeSeriesCorpus& corpus) {
  std::string text = "series_id,period_id,step";
  for (std::size_t c = 0; c < corpus.dim(); ++c) text += ",f" + std::to_string(c);
  text += '\n';
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    for (std::size_t j = 0; j < corpus.periods(); ++j) {
      const Array& b = corpus.block(i, j);
      for (std::size_t k = 0; k < b.rows(); ++k) {
        text += std::to_string(i) + ',' + std::to_string(j) + ',' + std::to_string(k);
        for (std::size_t c = 0; c < b.cols(); ++c) {
          text += ',';
          append_double(text, b.at(k, c));
        }
        text += '\n';
      }
    }
  }
  out << text;
  if (!out) throw Error("csv: write failed");
}

void write_csv(const std::string& path, const TimeSeriesCorpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  write_csv(out, corpus);
}

// ---------------------------------------------------------------------------

NormStats fit_normalization(const TimeSeriesCorpus& corpus) {
  if (corpus.periods() < 3) throw Error("normalization needs at least 3 periods");
  const std::size_t m = corpus.series(), d = corpus.dim();
  const std::size_t train = corpus.periods() - 2;
  NormStats stats{Array({m, d}, 0.0), Array({m, d}, 0.0), {}};
  for (std::size_t i = 0; i < m; ++i) {
    const Array x = corpus.concat(i, 0, train);
    for (std::size_t c = 0; c < d; ++c) {
      double mean = 0.0;
      for (std::size_t k = 0; k < x.rows(); ++k) mean += x.at(k, c);
      mean /= static_cast<double>(x.rows());
      double var = 0.0;
      for (std::size_t k = 0; k < x.rows(); ++k) var += (x.at(k, c) - mean) * (x.at(k, c) - mean);
      var /= static_cast<double>(x.rows());
      double sd = std::sqrt(var);
      if (sd < kMinStd) {
        stats.warnings.push_back("series " + std::to_string(i) + " feature " + std::to_string(c) +
                                 " has zero variance; std floored");
        sd = kMinStd;
      }
      stats.mean.at(i, c) = mean;
      stats.stdev.at(i, c) = sd;
    }
  }
  return stats;
}

namespace {

TimeSeriesCorpus transform(const TimeSeriesCorpus& corpus, const NormStats& stats, bool forward) {
  if (stats.mean.shape() != Shape{corpus.series(), corpus.dim()} || stats.stdev.shape() != stats.mean.shape()) {
    throw Error("normalization statistics do not match the corpus");
  }
  std::vector<Array> blocks = corpus.blocks();
  for (std::size_t i = 0; i < corpus.series(); ++i) {
    for (std::size_t j = 0; j < corpus.periods(); ++j) {
      Array& b = blocks[i * corpus.periods() + j];
      for (std::size_t k = 0; k < b.rows(); ++k) {
        for (std::size_t c = 0; c < b.cols(); ++c) {
          const double mu = stats.mean.at(i, c), sd = stats.stdev.at(i, c);
          b.at(k, c) = forward ? (b.at(k, c) - mu) / sd : b.at(k, c) * sd + mu;
        }
      }
    }
  }
  return TimeSeriesCorpus(corpus.series(), corpus.periods(), std::move(blocks));
}

}  // namespace

TimeSeriesCorpus apply_normalization(const TimeSeriesCorpus& corpus, const NormStats& stats) {
  return transform(corpus, stats, true);
}

TimeSeriesCorpus denormalize(const TimeSeriesCorpus& corpus, const NormStats& stats) {
  return transform(corpus, stats, false);
}

Normalized normalize(const TimeSeriesCorpus& corpus) {
  NormStats stats = fit_normalization(corpus);
  TimeSeriesCorpus out = apply_normalization(corpus, stats);
  return {std::move(out), std::move(stats)};
}

Split split(std::size_t periods) {
  if (periods < 3) throw Error("split needs at least 3 periods, got " + std::to_string(periods));
  Split s;
  for (std::size_t j = 1; j + 2 <= periods; ++j) s.train.push_back(j);
  s.validation = periods - 1;
  s.test = periods;
  return s;
}

// ---------------------------------------------------------------------------

std::string_view to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::AmplitudeRamp: return "amplitude-ramp";
    case DriftKind::FrequencyRamp: return "frequency-ramp";
    case DriftKind::RegimeSwitch: return "regime-switch";
  }
  return "?";
}

DriftKind parse_drift_kind(std::string_view text) {
  for (DriftKind k : {DriftKind::AmplitudeRamp, DriftKind::FrequencyRamp, DriftKind::RegimeSwitch}) {
    if (to_string(k) == text) return k;
  }
  throw Error("unknown drift kind '" + std::string(text) + "'");
}

void SynthConfig::validate(std::size_t min_period_length) const {
  if (series == 0 || periods == 0 || dim == 0) throw Error("synth: series, periods and dim must be positive");
  if (period_length < min_period_length) {
    throw Error("synth: period length " + std::to_string(period_length) + " is shorter than " +
                std::to_string(min_period_length));
  }
  if (coupling < 0.0 || noise < 0.0) throw Error("synth: coupling and noise must be non-negative");
}

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kGrowth = 1.2;
constexpr double kFreqRamp = 0.08;
constexpr double kSwitchProb = 0.3;

}  // namespace

SynthCorpus synth_drift_detailed(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.series, n = cfg.periods, len = cfg.period_length, d = cfg.dim;
  Rng rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Array mix({m, m}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k)
      if (i != k) mix.at(i, k) = unit(rng) / static_cast<double>(m > 1 ? m - 1 : 1);

  Array xi({m, n});
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = normal(rng);
  Array drivers({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double v = xi.at(i, j);
      for (std::size_t k = 0; k < m; ++k) v += cfg.coupling * mix.at(i, k) * xi.at(k, j);
      drivers.at(i, j) = v;
    }

  // Per series: base level, two sinusoids per channel with integer cycle
  // counts per period, and their phases.
  std::vector<double> base(m);
  std::vector<double> phase(m * d * 2);
  for (std::size_t i = 0; i < m; ++i) base[i] = 0.5 + unit(rng);
  for (double& p : phase) p = 2.0 * kPi * unit(rng);
  const double cycles[2] = {2.0, 5.0};
  const double weight[2] = {1.0, 0.5};

  Array latent({m, n});
  std::vector<int> regime(m, 0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double jitter = cfg.noise * drivers.at(i, j);
      switch (cfg.kind) {
        case DriftKind::AmplitudeRamp:
          latent.at(i, j) = base[i] * std::pow(kGrowth, static_cast<double>(j)) * std::exp(jitter);
          break;
        case DriftKind::FrequencyRamp:
          latent.at(i, j) = 1.0 + kFreqRamp * static_cast<double>(j) + jitter;
          break;
        case DriftKind::RegimeSwitch:
          if (j > 0 && unit(rng) < kSwitchProb) regime[i] = 1 - regime[i];
          latent.at(i, j) = (regime[i] == 0 ? 1.0 : 2.0) + jitter;
          break;
      }
    }
  }

  // Clean signals before cross-series mixing: signal[i][j] is len x d.
  auto clean = [&](std::size_t i, std::size_t j) {
    Array s({len, d});
    for (std::size_t k = 0; k < len; ++k) {
      const double t = static_cast<double>(j * len + k);
      for (std::size_t c = 0; c < d; ++c) {
        double v = 0.0;
        for (std::size_t q = 0; q < 2; ++q) {
          double omega = 2.0 * kPi * (cycles[q] + static_cast<double>(c)) / static_cast<double>(len);
          double amp = weight[q];
          if (cfg.kind == DriftKind::FrequencyRamp) omega *= latent.at(i, j);
          if (cfg.kind == DriftKind::RegimeSwitch && latent.at(i, j) > 1.5) omega *= 1.5;
          v += amp * std::sin(omega * t + phase[(i * d + c) * 2 + q]);
        }
        s.at(k, c) = v;
      }
    }
    return s;
  };

  std::vector<Array> blocks;
  blocks.reserve(m * n);
  std::vector<Array> raw(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) blocks.emplace_back();
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) raw[i] = clean(i, j);
    for (std::size_t i = 0; i < m; ++i) {
      Array x({len, d});
      for (std::size_t k = 0; k < x.size(); ++k) {
        double v = raw[i][k];
        for (std::size_t q = 0; q < m; ++q) v += cfg.coupling * mix.at(i, q) * raw[q][k];
        const double amp = cfg.kind == DriftKind::FrequencyRamp ? base[i] : cfg.kind == DriftKind::RegimeSwitch
                                                                              ? base[i] * latent.at(i, j)
                                                                              : latent.at(i, j);
        x[k] = amp * v;
      }
      blocks[i * n + j] = std::move(x);
    }
  }
  for (Array& b : blocks)
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += cfg.noise * normal(rng);

  return {TimeSeriesCorpus(m, n, std::move(blocks)), std::move(drivers), std::move(latent)};
}

TimeSeriesCorpus synth_drift(const SynthConfig& cfg) { return synth_drift_detailed(cfg).corpus; }

}  // namespace hypergpa
