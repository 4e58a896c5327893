#pragma once

// Forecast metrics, improvement ratios and the evaluation report files.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hypergpa/tensor.hpp"

namespace hypergpa {

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  // Undefined when the truth has zero variance.
  std::optional<double> pcc;
  std::optional<double> r2;
  std::optional<double> expvar;
};

// pred and truth are n x d with n >= 2; pcc is pooled over all entries.
Metrics compute_metrics(const Array& pred, const Array& truth);

// (vanilla - method) / vanilla.
double improvement_ratio(double vanilla_mse, double method_mse);

// One method on one target architecture for one seed.
struct RunResult {
  std::string method;
  std::string target;
  std::uint64_t seed = 0;
  Metrics metrics;
  // MSE at each forecast horizon step, 1..s_out.
  std::vector<double> step_mse;
  // Hash of the evaluated ground truth; runs compared in one report must agree.
  std::string test_pairs;
};

struct ReportMeta {
  std::vector<std::uint64_t> seeds;
  std::string config_hash;
  std::map<std::string, std::string> extra;
};

struct ReportPaths {
  std::string report_json;
  std::string metrics_csv;
  std::string step_mse_csv;
};

// Writes report.json, metrics.csv and step_mse.csv into `dir`. Output is a
// pure function of the inputs.
ReportPaths emit_report(const std::vector<RunResult>& results, const ReportMeta& meta,
                        const std::string& dir);

// The JSON document alone.
std::string report_json(const std::vector<RunResult>& results, const ReportMeta& meta);

// FNV-1a, hex.
std::string fnv1a_hex(const std::string& text);

}  // namespace hypergpa
