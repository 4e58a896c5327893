#include "hypergpa/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "hypergpa/baselines.hpp"
#include "hypergpa/gradsuite.hpp"

namespace hypergpa {

namespace fs = std::filesystem;

TimeSeriesCorpus load_corpus(const RunConfig& cfg) {
  TimeSeriesCorpus raw = cfg.corpus_csv.empty() ? synth_drift(cfg.synth) : load_csv(cfg.corpus_csv);
  if (!cfg.normalize) return raw;
  Normalized n = normalize(raw);
  for (const std::string& w : n.stats.warnings) std::cerr << "warning: " << w << "\n";
  return std::move(n.corpus);
}

namespace {

TargetArch arch_for(const RunConfig& cfg, const TimeSeriesCorpus& corpus, TargetKind kind) {
  TargetArch a = cfg.arch;
  a.kind = kind;
  a.input_dim = corpus.dim();
  return a;
}

HyperGpaModel hypergpa_model(const RunConfig& cfg, const TimeSeriesCorpus& corpus, TargetKind kind,
                             std::uint64_t seed) {
  L1Config l1 = cfg.l1;
  l1.series = corpus.series();
  l1.input_dim = corpus.dim();
  L2Config l2 = cfg.l2;
  l2.repr_dim = l1.hidden_dim;
  return make_model(arch_for(cfg, corpus, kind), l1, l2, seed);
}

DirectMethod direct_method(Method m) {
  switch (m) {
    case Method::Vanilla: return DirectMethod::Vanilla;
    case Method::Revin: return DirectMethod::Revin;
    case Method::HyperGru: return DirectMethod::HyperGru;
    case Method::HyperGpa: break;
  }
  throw Error("hypergpa is not a direct method");
}

DirectModel direct_model(const RunConfig& cfg, const TimeSeriesCorpus& corpus, Method method, TargetKind kind,
                         std::uint64_t seed) {
  return make_direct_model(direct_method(method), arch_for(cfg, corpus, kind), corpus.series(), seed,
                           cfg.hypergru);
}

void replace_params(ParamStore& dst, const ParamStore& src) {
  if (dst.size() != src.size()) throw Error("checkpoint does not match the configured model");
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst.name(i) != src.name(i) || dst.value(i).shape() != src.value(i).shape()) {
      throw Error("checkpoint tensor '" + src.name(i) + "' does not match the configured model");
    }
  }
  dst = src;
}

Array stack_rows(const std::vector<Array>& parts) {
  std::size_t rows = 0;
  for (const Array& p : parts) rows += p.rows();
  Array out({rows, parts.front().cols()});
  std::size_t off = 0;
  for (const Array& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.data().begin() + static_cast<std::ptrdiff_t>(off));
    off += p.size();
  }
  return out;
}

std::string run_name(Method method, TargetKind target, std::uint64_t seed) {
  return std::string(to_string(method)) + "_" + std::string(to_string(target)) + "_seed" + std::to_string(seed);
}

fs::path run_dir(const RunConfig& cfg, Method method, TargetKind target, std::uint64_t seed) {
  return fs::path(cfg.out) / "runs" / run_name(method, target, seed);
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("cannot create directory '" + p.string() + "': " + ec.message());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot open '" + p.string() + "' for writing");
  out << text;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

void write_resolved(const RunConfig& cfg) {
  ensure_dir(cfg.out);
  write_text(fs::path(cfg.out) / "config.resolved", resolved_text(cfg));
}

void save_run(const RunConfig& cfg, const TrainedRun& r) {
  const fs::path dir = run_dir(cfg, r.method, r.target, r.seed);
  ensure_dir(dir);
  save_params((dir / "params.txt").string(), r.params);
  write_history((dir / "history.csv").string(), r.history);
}

}  // namespace

TrainedRun train_run(const RunConfig& cfg, const TimeSeriesCorpus& corpus, Method method, TargetKind target,
                     std::uint64_t seed, bool verbose) {
  const std::string label = run_name(method, target, seed);
  auto report_every = [&](std::size_t every) -> ProgressFn {
    if (!verbose) return {};
    return [label, every](const HistoryRow& row) {
      if (row.epoch % every != 0) return;
      std::cerr << label << " epoch " << row.epoch << " loss " << row.train_loss << " val " << row.val_mse
                << "\n";
    };
  };
  TrainedRun out{method, target, seed, {}, {}, 0, 0.0};
  if (method == Method::HyperGpa) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    TrainResult r = train(corpus, hypergpa_model(cfg, corpus, target, seed), tc, report_every(25));
    out.params = std::move(r.model.params);
    out.history = std::move(r.history);
    out.best_epoch = r.best_epoch;
    out.best_val = r.best_val;
  } else {
    DirectTrainConfig dc = cfg.direct;
    dc.seed = seed;
    DirectTrainResult r = train_direct(corpus, direct_model(cfg, corpus, method, target, seed), dc,
                                       report_every(250));
    out.params = std::move(r.model.params);
    out.history = std::move(r.history);
    out.best_epoch = r.best_epoch;
    out.best_val = r.best_val;
  }
  if (verbose) std::cerr << label << " best epoch " << out.best_epoch << " val " << out.best_val << "\n";
  return out;
}

RunResult evaluate_run(const RunConfig& cfg, const TimeSeriesCorpus& corpus, Method method, TargetKind target,
                       std::uint64_t seed, const ParamStore& params) {
  const std::size_t n = corpus.periods();
  PeriodForecast f;
  if (method == Method::HyperGpa) {
    HyperGpaModel model = hypergpa_model(cfg, corpus, target, seed);
    replace_params(model.params, params);
    f = forecast_period(model, corpus, n, cfg.train.k);
  } else {
    DirectModel model = direct_model(cfg, corpus, method, target, seed);
    replace_params(model.params, params);
    f = direct_forecast_period(model, corpus, n);
  }
  const Array pred = stack_rows(f.pred), truth = stack_rows(f.truth);
  std::string truth_text;
  for (std::size_t k = 0; k < truth.size(); ++k) truth_text += format_double(truth[k]) + ',';
  RunResult r{std::string(to_string(method)), std::string(to_string(target)), seed, compute_metrics(pred, truth), {},
              fnv1a_hex(truth_text)};
  const std::size_t d = corpus.dim();
  for (std::size_t t = 0; t < cfg.arch.s_out; ++t) {
    double acc = 0.0;
    for (std::size_t row = 0; row < pred.rows(); ++row)
      for (std::size_t c = t * d; c < (t + 1) * d; ++c) acc += (pred.at(row, c) - truth.at(row, c)) * (pred.at(row, c) - truth.at(row, c));
    r.step_mse.push_back(acc / static_cast<double>(pred.rows() * d));
  }
  return r;
}

std::vector<RunResult> run_bench(const RunConfig& cfg, const TimeSeriesCorpus& corpus, bool verbose) {
  std::vector<RunResult> results;
  for (TargetKind target : cfg.bench_targets) {
    for (std::uint64_t seed : cfg.seeds) {
      for (Method method : {Method::Vanilla, Method::HyperGpa}) {
        TrainedRun r = train_run(cfg, corpus, method, target, seed, verbose);
        save_run(cfg, r);
        results.push_back(evaluate_run(cfg, corpus, method, target, seed, r.params));
      }
    }
  }
  return results;
}

ReportMeta report_meta(const RunConfig& cfg) {
  ReportMeta meta;
  meta.seeds = cfg.seeds;
  // The output location does not affect results.
  RunConfig hashed = cfg;
  hashed.out = "-";
  meta.config_hash = fnv1a_hex(resolved_text(hashed));
  meta.extra["corpus"] = cfg.corpus_csv.empty() ? "synthetic" : cfg.corpus_csv;
  meta.extra["scale"] = cfg.normalize ? "normalized" : "raw";
  meta.extra["test_period"] = "last";
  return meta;
}

namespace {

struct Overrides {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::string target;
  std::string method;
  std::optional<std::size_t> k;
  std::optional<double> lambda;
  std::optional<std::size_t> candidates;
  std::string graph_fn;
  bool no_agc = false;
  bool quiet = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("--config", o.config, "Configuration file");
  sub->add_option("--seed", o.seeds, "Seed (repeatable)")->allow_extra_args(false);
  sub->add_option("--out", o.out, "Output directory (synth: output CSV file)");
  sub->add_option("--target", o.target, "Target model: lstm, gru, seq2seq-lstm, seq2seq-gru, odernn, ncde");
  sub->add_option("--method", o.method, "Method: hypergpa, vanilla, revin, hypergru");
  sub->add_option("--k", o.k, "Number of input periods K");
  sub->add_option("--lambda", o.lambda, "Weight of the argmax-selection loss");
  sub->add_option("--candidates", o.candidates, "Candidates per parameter tensor");
  sub->add_option("--graph-fn", o.graph_fn, "L2 graph function: gat, gcn, agc");
  sub->add_flag("--no-agc", o.no_agc, "Remove the cross-series coupling in L1");
  sub->add_flag("--quiet", o.quiet, "No progress output");
  sub->add_option("--set", o.sets, "Override a config key: KEY=VALUE (repeatable)")->allow_extra_args(false);
}

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : load_config(o.config);
  for (const std::string& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
    set_key(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out.empty()) cfg.out = o.out;
  if (!o.target.empty()) set_key(cfg, "target.kind", o.target);
  if (!o.method.empty()) set_key(cfg, "method", o.method);
  if (o.k) cfg.train.k = *o.k;
  if (o.lambda) cfg.train.lambda = *o.lambda;
  if (o.candidates) cfg.l2.candidates = *o.candidates;
  if (!o.graph_fn.empty()) set_key(cfg, "l2.graph_fn", o.graph_fn);
  if (o.no_agc) cfg.l1.use_agc = false;
  return cfg;
}

int cmd_synth(RunConfig cfg, const Overrides& o) {
  if (!o.seeds.empty()) cfg.synth.seed = o.seeds.front();
  if (o.out.empty()) throw ConfigError("--out: synth needs an output file");
  cfg.synth.validate(cfg.arch.s_in + cfg.arch.s_out);
  const fs::path out(o.out);
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_csv(out.string(), synth_drift(cfg.synth));
  write_text(out.string() + ".config.resolved", resolved_text(cfg));
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, bool verbose) {
  write_resolved(cfg);
  const TimeSeriesCorpus corpus = load_corpus(cfg);
  for (std::uint64_t seed : cfg.seeds) save_run(cfg, train_run(cfg, corpus, cfg.method, cfg.arch.kind, seed, verbose));
  return kExitOk;
}

int cmd_eval(const RunConfig& cfg) {
  write_resolved(cfg);
  const TimeSeriesCorpus corpus = load_corpus(cfg);
  std::vector<RunResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path p = run_dir(cfg, cfg.method, cfg.arch.kind, seed) / "params.txt";
    if (!fs::exists(p)) throw Error("no checkpoint at '" + p.string() + "'; run train first");
    results.push_back(evaluate_run(cfg, corpus, cfg.method, cfg.arch.kind, seed, load_params(p.string())));
  }
  emit_report(results, report_meta(cfg), cfg.out);
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg) {
  write_resolved(cfg);
  std::string csv = "case,max_rel_error,tolerance,entries,passed\n";
  bool ok = true;
  for (const GradCase& c : run_grad_suite(cfg.seeds.front())) {
    std::cout << c.name << " max_rel_error " << format_double(c.result.max_rel_error) << " ("
              << c.result.entries_checked << " entries, tol " << format_double(c.tolerance) << ") "
              << (c.passed() ? "ok" : "FAILED") << "\n";
    csv += c.name + "," + format_double(c.result.max_rel_error) + "," + format_double(c.tolerance) + "," +
           std::to_string(c.result.entries_checked) + "," + (c.passed() ? "1" : "0") + "\n";
    ok = ok && c.passed();
  }
  write_text(fs::path(cfg.out) / "gradcheck.csv", csv);
  return ok ? kExitOk : kExitRuntime;
}

int cmd_bench(const RunConfig& cfg, bool verbose) {
  write_resolved(cfg);
  const TimeSeriesCorpus corpus = load_corpus(cfg);
  emit_report(run_bench(cfg, corpus, verbose), report_meta(cfg), cfg.out);
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"HyperGPA: generated target-model parameters for drifting time series"};
  app.require_subcommand(1);
  Overrides o;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const char* name : {"synth", "train", "eval", "gradcheck", "bench"}) {
    static const std::map<std::string, std::string> help = {
        {"synth", "Write a synthetic drifting corpus as CSV"},
        {"train", "Train one method and write checkpoints and histories"},
        {"eval", "Evaluate checkpoints on the test period and write a report"},
        {"gradcheck", "Run the finite-difference gradient suite"},
        {"bench", "Train and evaluate Vanilla and HyperGPA and write a comparison report"}};
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_common(sub, o);
    subs.emplace_back(name, sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  std::string cmd;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) cmd = name;
  try {
    RunConfig cfg = resolve(o);
    cfg.validate();
    const bool verbose = !o.quiet;
    if (cmd == "synth") return cmd_synth(cfg, o);
    if (cmd == "train") return cmd_train(cfg, verbose);
    if (cmd == "eval") return cmd_eval(cfg);
    if (cmd == "gradcheck") return cmd_gradcheck(cfg);
    return cmd_bench(cfg, verbose);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<std::string> copy = args;
  std::vector<char*> argv;
  for (std::string& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  return run(static_cast<int>(copy.size()), argv.data());
}

}  // namespace hypergpa
