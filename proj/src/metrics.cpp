#include "hypergpa/metrics.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace hypergpa {

Metrics compute_metrics(const Array& pred, const Array& truth) {
  if (pred.shape() != truth.shape()) {
    throw Error("compute_metrics: shape " + shape_string(pred.shape()) + " vs " + shape_string(truth.shape()));
  }
  if (pred.rank() != 2 || pred.rows() < 2) throw Error("compute_metrics: need an n x d array with n >= 2");
  const std::size_t n = pred.size();
  const double inv = 1.0 / static_cast<double>(n);

  double sse = 0.0, sae = 0.0, mp = 0.0, mt = 0.0, mr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = truth[k] - pred[k];
    sse += r * r;
    sae += std::fabs(r);
    mp += pred[k];
    mt += truth[k];
    mr += r;
  }
  mp *= inv;
  mt *= inv;
  mr *= inv;
  double spp = 0.0, stt = 0.0, spt = 0.0, srr = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double dp = pred[k] - mp, dt = truth[k] - mt, dr = truth[k] - pred[k] - mr;
    spp += dp * dp;
    stt += dt * dt;
    spt += dp * dt;
    srr += dr * dr;
  }

  Metrics m;
  m.mse = sse * inv;
  m.mae = sae * inv;
  if (stt > 0.0) {
    m.r2 = 1.0 - sse / stt;
    m.expvar = 1.0 - srr / stt;
    if (spp > 0.0) m.pcc = spt / std::sqrt(spp * stt);
  }
  return m;
}

double improvement_ratio(double vanilla_mse, double method_mse) {
  if (!(vanilla_mse > 0.0)) throw Error("improvement_ratio: vanilla MSE must be positive");
  return (vanilla_mse - method_mse) / vanilla_mse;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  auto [ptr, ec] = std::to_chars(buf, buf + 16, h, 16);
  std::string out(buf, ptr);
  return std::string(16 - out.size(), '0') + out;
}

namespace {

using nlohmann::json;

const char* const kMetricNames[] = {"mse", "mae", "pcc", "r2", "expvar"};

std::optional<double> metric_value(const Metrics& m, std::string_view name) {
  if (name == "mse") return m.mse;
  if (name == "mae") return m.mae;
  if (name == "pcc") return m.pcc;
  if (name == "r2") return m.r2;
  return m.expvar;
}

struct Summary {
  std::optional<double> mean;
  std::optional<double> std;
  std::vector<std::optional<double>> per_seed;
};

Summary summarize(const std::vector<std::optional<double>>& values) {
  Summary s{std::nullopt, std::nullopt, values};
  std::vector<double> defined;
  for (const auto& v : values)
    if (v) defined.push_back(*v);
  if (defined.empty()) return s;
  double mean = 0.0;
  for (double v : defined) mean += v;
  mean /= static_cast<double>(defined.size());
  s.mean = mean;
  if (values.size() >= 2 && defined.size() >= 2) {
    double var = 0.0;
    for (double v : defined) var += (v - mean) * (v - mean);
    s.std = std::sqrt(var / static_cast<double>(defined.size() - 1));
  }
  return s;
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// Results grouped as method -> target -> runs, in first-seen order of seeds.
using Grouped = std::map<std::string, std::map<std::string, std::vector<const RunResult*>>>;

Grouped group(const std::vector<RunResult>& results) {
  Grouped g;
  for (const RunResult& r : results) g[r.method][r.target].push_back(&r);
  return g;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  out.close();
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

std::string fmt(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string report_json(const std::vector<RunResult>& results, const ReportMeta& meta) {
  if (results.empty()) throw Error("no results");
  json doc;
  doc["meta"]["seeds"] = meta.seeds;
  doc["meta"]["config_hash"] = meta.config_hash;
  for (const auto& [k, v] : meta.extra) doc["meta"][k] = v;

  const Grouped g = group(results);
  std::map<std::string, std::string> pairs;
  for (const RunResult& r : results) {
    if (r.test_pairs.empty()) continue;
    auto [it, fresh] = pairs.emplace(r.target, r.test_pairs);
    if (!fresh && it->second != r.test_pairs) {
      throw Error("report: runs for target '" + r.target + "' were evaluated on different test pairs");
    }
  }
  for (const auto& [target, hash] : pairs) doc["test_pairs"][target] = hash;

  json per_method = json::object();
  for (const auto& [method, targets] : g) {
    for (const auto& [target, runs] : targets) {
      json entry = json::object();
      for (const char* name : kMetricNames) {
        std::vector<std::optional<double>> values;
        for (const RunResult* r : runs) values.push_back(metric_value(r->metrics, name));
        const Summary s = summarize(values);
        json m;
        m["mean"] = opt_json(s.mean);
        if (runs.size() >= 2) m["std"] = opt_json(s.std);
        json seeds = json::array();
        for (const auto& v : s.per_seed) seeds.push_back(opt_json(v));
        m["per_seed"] = seeds;
        std::size_t undefined = 0;
        for (const auto& v : values) undefined += v ? 0 : 1;
        if (undefined > 0) m["undefined_seeds"] = undefined;
        entry[name] = m;
      }
      per_method[method][target] = entry;
    }
  }
  doc["per_method"] = per_method;

  json improvements = json::object();
  auto vanilla = g.find("vanilla");
  for (const auto& [method, targets] : g) {
    if (method == "vanilla" || vanilla == g.end()) continue;
    for (const auto& [target, runs] : targets) {
      auto base = vanilla->second.find(target);
      if (base == vanilla->second.end()) continue;
      double vm = 0.0, mm = 0.0;
      for (const RunResult* r : base->second) vm += r->metrics.mse;
      for (const RunResult* r : runs) mm += r->metrics.mse;
      vm /= static_cast<double>(base->second.size());
      mm /= static_cast<double>(runs.size());
      improvements[method][target] = improvement_ratio(vm, mm);
    }
  }
  doc["improvements"] = improvements;
  return doc.dump(2) + "\n";
}

ReportPaths emit_report(const std::vector<RunResult>& results, const ReportMeta& meta,
                        const std::string& dir) {
  const std::string doc = report_json(results, meta);
  std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw Error("cannot create directory '" + dir + "': " + ec.message());

  std::string csv = "method,target,seed,mse,mae,pcc,r2,expvar\n";
  for (const RunResult& r : results) {
    csv += r.method + ',' + r.target + ',' + std::to_string(r.seed);
    for (const char* name : kMetricNames) {
      csv += ',';
      if (auto v = metric_value(r.metrics, name)) csv += fmt(*v);
    }
    csv += '\n';
  }

  std::string steps = "t,method,mse\n";
  for (const auto& [method, targets] : group(results)) {
    for (const auto& [target, runs] : targets) {
      const std::size_t horizon = runs.front()->step_mse.size();
      for (std::size_t t = 0; t < horizon; ++t) {
        double acc = 0.0;
        for (const RunResult* r : runs) {
          if (r->step_mse.size() != horizon) throw Error("emit_report: inconsistent horizons");
          acc += r->step_mse[t];
        }
        steps += std::to_string(t + 1) + ',' + method + '/' + target + ',' +
                 fmt(acc / static_cast<double>(runs.size())) + '\n';
      }
    }
  }

  ReportPaths paths{(root / "report.json").string(), (root / "metrics.csv").string(),
                    (root / "step_mse.csv").string()};
  write_file(paths.report_json, doc);
  write_file(paths.metrics_csv, csv);
  write_file(paths.step_mse_csv, steps);
  return paths;
}

}  // namespace hypergpa
