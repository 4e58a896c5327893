#include "hypergpa/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hypergpa {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::HyperGpa: return "hypergpa";
    case Method::Vanilla: return "vanilla";
    case Method::Revin: return "revin";
    case Method::HyperGru: return "hypergru";
  }
  return "?";
}

Method parse_method(std::string_view text) {
  if (text == "hypergpa") return Method::HyperGpa;
  if (text == "vanilla") return Method::Vanilla;
  if (text == "revin") return Method::Revin;
  if (text == "hypergru") return Method::HyperGru;
  throw ConfigError("unknown method '" + std::string(text) + "'");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(key + ": invalid value '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

template <class Fn>
auto parse_enum(const std::string& key, const std::string& value, Fn fn) {
  try {
    return fn(value);
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

GradMode parse_grad_mode(const std::string& value) {
  if (value == "backprop") return GradMode::Backprop;
  if (value == "adjoint") return GradMode::Adjoint;
  throw Error("unknown gradient mode '" + value + "'");
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define SIZE_KEY(NAME, FIELD)                                                                   \
  Key {                                                                                         \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<std::size_t>(NAME, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                              \
  }
#define DOUBLE_KEY(NAME, FIELD)                                                              \
  Key {                                                                                      \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<double>(NAME, v); }, \
        [](const RunConfig& c) { return format_double(c.FIELD); }                            \
  }
#define BOOL_KEY(NAME, FIELD)                                                       \
  Key {                                                                             \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_bool(NAME, v); }, \
        [](const RunConfig& c) { return bool_text(c.FIELD); }                       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"corpus.csv", [](RunConfig& c, const std::string& v) { c.corpus_csv = v; },
       [](const RunConfig& c) { return c.corpus_csv; }},
      BOOL_KEY("corpus.normalize", normalize),
      SIZE_KEY("synth.series", synth.series),
      SIZE_KEY("synth.periods", synth.periods),
      SIZE_KEY("synth.period_length", synth.period_length),
      SIZE_KEY("synth.dim", synth.dim),
      {"synth.kind",
       [](RunConfig& c, const std::string& v) { c.synth.kind = parse_enum("synth.kind", v, parse_drift_kind); },
       [](const RunConfig& c) { return std::string(to_string(c.synth.kind)); }},
      DOUBLE_KEY("synth.coupling", synth.coupling),
      DOUBLE_KEY("synth.noise", synth.noise),
      {"synth.seed",
       [](RunConfig& c, const std::string& v) { c.synth.seed = parse_number<std::uint64_t>("synth.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.seed); }},

      {"method", [](RunConfig& c, const std::string& v) { c.method = parse_enum("method", v, parse_method); },
       [](const RunConfig& c) { return std::string(to_string(c.method)); }},
      {"target.kind",
       [](RunConfig& c, const std::string& v) { c.arch.kind = parse_enum("target.kind", v, parse_target_kind); },
       [](const RunConfig& c) { return std::string(to_string(c.arch.kind)); }},
      SIZE_KEY("target.hidden_dim", arch.hidden_dim),
      SIZE_KEY("target.layers", arch.layers),
      SIZE_KEY("target.s_in", arch.s_in),
      SIZE_KEY("target.s_out", arch.s_out),
      {"target.solver_steps",
       [](RunConfig& c, const std::string& v) { c.arch.solver_steps = parse_number<int>("target.solver_steps", v); },
       [](const RunConfig& c) { return std::to_string(c.arch.solver_steps); }},
      {"bench.targets",
       [](RunConfig& c, const std::string& v) {
         c.bench_targets.clear();
         for (const std::string& item : split_list(v))
           c.bench_targets.push_back(parse_enum("bench.targets", item, parse_target_kind));
       },
       [](const RunConfig& c) {
         std::string out;
         for (TargetKind k : c.bench_targets) out += (out.empty() ? "" : ",") + std::string(to_string(k));
         return out;
       }},

      SIZE_KEY("train.k", train.k),
      DOUBLE_KEY("train.lambda", train.lambda),
      DOUBLE_KEY("train.lr", train.adam.learning_rate),
      DOUBLE_KEY("train.weight_decay", train.adam.weight_decay),
      SIZE_KEY("train.pair_batch", train.pair_batch),
      SIZE_KEY("train.epochs", train.epochs),
      SIZE_KEY("train.patience", train.patience),
      DOUBLE_KEY("direct.lr", direct.adam.learning_rate),
      DOUBLE_KEY("direct.weight_decay", direct.adam.weight_decay),
      SIZE_KEY("direct.pair_batch", direct.pair_batch),
      SIZE_KEY("direct.epochs", direct.epochs),
      SIZE_KEY("direct.patience", direct.patience),

      SIZE_KEY("l1.hidden_dim", l1.hidden_dim),
      SIZE_KEY("l1.gamma_hidden", l1.gamma_hidden),
      SIZE_KEY("l1.gamma_layers", l1.gamma_layers),
      SIZE_KEY("l1.embed_dim", l1.embed_dim),
      SIZE_KEY("l1.field_hidden", l1.field_hidden),
      BOOL_KEY("l1.use_agc", l1.use_agc),
      {"l1.solver_steps",
       [](RunConfig& c, const std::string& v) {
         c.l1.solver.steps_per_interval = parse_number<int>("l1.solver_steps", v);
       },
       [](const RunConfig& c) { return std::to_string(c.l1.solver.steps_per_interval); }},
      {"l1.grad_mode",
       [](RunConfig& c, const std::string& v) { c.l1.solver.mode = parse_enum("l1.grad_mode", v, parse_grad_mode); },
       [](const RunConfig& c) {
         return std::string(c.l1.solver.mode == GradMode::Adjoint ? "adjoint" : "backprop");
       }},

      SIZE_KEY("l2.query_dim", l2.query_dim),
      SIZE_KEY("l2.refined_dim", l2.refined_dim),
      SIZE_KEY("l2.heads", l2.heads),
      SIZE_KEY("l2.layers", l2.layers),
      SIZE_KEY("l2.hidden", l2.hidden),
      SIZE_KEY("l2.candidates", l2.candidates),
      SIZE_KEY("l2.agc_embed_dim", l2.agc_embed_dim),
      {"l2.graph_fn",
       [](RunConfig& c, const std::string& v) { c.l2.graph_fn = parse_enum("l2.graph_fn", v, parse_graph_fn); },
       [](const RunConfig& c) { return std::string(to_string(c.l2.graph_fn)); }},

      SIZE_KEY("hypergru.hyper_hidden", hypergru.hyper_hidden),
      SIZE_KEY("hypergru.embed_dim", hypergru.embed_dim),

      {"run.seeds",
       [](RunConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const std::string& item : split_list(v)) c.seeds.push_back(parse_number<std::uint64_t>("run.seeds", item));
       },
       [](const RunConfig& c) {
         std::string out;
         for (std::uint64_t s : c.seeds) out += (out.empty() ? "" : ",") + std::to_string(s);
         return out;
       }},
      {"run.out", [](RunConfig& c, const std::string& v) { c.out = v; },
       [](const RunConfig& c) { return c.out; }},
  };
  return table;
}

#undef SIZE_KEY
#undef DOUBLE_KEY
#undef BOOL_KEY

template <class Fn>
void check(const std::string& key, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

}  // namespace

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  if (corpus_csv.empty()) check("synth", [&] { synth.validate(arch.s_in + arch.s_out); });
  check("target", [&] { arch.validate(); });
  for (TargetKind k : bench_targets) {
    check("bench.targets", [&] {
      TargetArch a = arch;
      a.kind = k;
      a.validate();
    });
  }
  if (bench_targets.empty()) throw ConfigError("bench.targets: at least one target is required");
  check("train", [&] { train.validate(); });
  if (train.epochs == 0) throw ConfigError("train.epochs must be positive");
  if (direct.epochs == 0) throw ConfigError("direct.epochs must be positive");
  if (direct.pair_batch == 0) throw ConfigError("direct.pair_batch must be positive");
  if (!(direct.adam.learning_rate > 0.0)) throw ConfigError("direct.lr must be positive");
  check("l1", [&] {
    L1Config c = l1;
    c.series = 1;
    c.validate();
  });
  check("l2", [&] {
    L2Config c = l2;
    c.repr_dim = l1.hidden_dim;
    c.validate();
  });
  if (hypergru.hyper_hidden == 0 || hypergru.embed_dim == 0) {
    throw ConfigError("hypergru.hyper_hidden and hypergru.embed_dim must be positive");
  }
  if (method == Method::HyperGru && !is_gru_family(arch.kind)) {
    throw ConfigError("method: incompatible method/arch: hypergru requires a GRU-family target, got " +
                      std::string(to_string(arch.kind)));
  }
  if (seeds.empty()) throw ConfigError("run.seeds: at least one seed is required");
  if (out.empty()) throw ConfigError("run.out must not be empty");
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string resolved_text(const RunConfig& cfg) {
  std::string out;
  for (const Key& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

}  // namespace hypergpa
