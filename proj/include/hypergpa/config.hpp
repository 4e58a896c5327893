#pragma once

// Run configuration: a flat text file of `section.key = value` lines. Lines
// starting with '#' and blank lines are ignored.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hypergpa/baselines.hpp"
#include "hypergpa/data.hpp"
#include "hypergpa/l1.hpp"
#include "hypergpa/l2.hpp"
#include "hypergpa/target.hpp"
#include "hypergpa/training.hpp"

namespace hypergpa {

// Thrown for invalid configuration; the CLI maps it to exit code 1.
class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class Method { HyperGpa, Vanilla, Revin, HyperGru };

std::string_view to_string(Method m);
Method parse_method(std::string_view text);

struct RunConfig {
  std::string corpus_csv;  // empty: use the synthetic generator
  SynthConfig synth;
  bool normalize = true;

  Method method = Method::HyperGpa;
  TargetArch arch;
  std::vector<TargetKind> bench_targets{TargetKind::Gru};

  TrainConfig train;
  DirectTrainConfig direct;
  L1Config l1;
  L2Config l2;
  HyperGruConfig hypergru;

  std::vector<std::uint64_t> seeds{0};
  std::string out = "out";

  // Throws ConfigError naming the offending key.
  void validate() const;
};

// Applies one key; throws ConfigError for an unknown key or bad value.
void set_key(RunConfig& cfg, const std::string& key, const std::string& value);

RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Every key with its current value, in a stable order; parses back to an
// identical configuration.
std::string resolved_text(const RunConfig& cfg);

}  // namespace hypergpa
