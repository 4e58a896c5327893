#pragma once

// The hypergpa command line: synth, train, eval, gradcheck and bench.

#include <cstdint>
#include <string>
#include <vector>

#include "hypergpa/config.hpp"
#include "hypergpa/metrics.hpp"

namespace hypergpa {

// Exit codes.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

// The corpus a configuration describes, normalized when cfg.normalize.
TimeSeriesCorpus load_corpus(const RunConfig& cfg);

struct TrainedRun {
  Method method = Method::HyperGpa;
  TargetKind target = TargetKind::Gru;
  std::uint64_t seed = 0;
  ParamStore params;  // best-validation snapshot
  std::vector<HistoryRow> history;
  std::size_t best_epoch = 0;
  double best_val = 0.0;
};

// Trains on periods 1..N-1; never reads period N.
TrainedRun train_run(const RunConfig& cfg, const TimeSeriesCorpus& corpus, Method method, TargetKind target,
                     std::uint64_t seed, bool verbose = false);

// Test-period (N) metrics for trained parameters.
RunResult evaluate_run(const RunConfig& cfg, const TimeSeriesCorpus& corpus, Method method, TargetKind target,
                       std::uint64_t seed, const ParamStore& params);

// Vanilla and HyperGPA on every bench target and seed.
std::vector<RunResult> run_bench(const RunConfig& cfg, const TimeSeriesCorpus& corpus, bool verbose = false);

ReportMeta report_meta(const RunConfig& cfg);

int run(int argc, char** argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace hypergpa
