#include "hypergpa/l1.hpp"

#include <cmath>
#include <memory>
#include <random>

#include "hypergpa/path.hpp"

namespace hypergpa {

void L1Config::validate() const {
  if (series == 0 || input_dim == 0 || hidden_dim == 0 || gamma_hidden == 0 || gamma_layers == 0 ||
      embed_dim == 0 || field_hidden == 0) {
    throw Error("L1 dimensions must be positive");
  }
  if (solver.steps_per_interval < 1) throw Error("L1 solver steps must be >= 1");
}

namespace {

std::string gamma_name(std::size_t i, std::size_t layer, const char* what) {
  return "l1.gamma" + std::to_string(i) + "." + what + std::to_string(layer);
}

void add_affine(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng) {
  store.add(prefix + ".W", xavier_uniform({in, out}, rng));
  store.add(prefix + ".b", Array({out}, 0.0));
}

Tensor propagate(const Tensor& z, const Tensor* adj, const Tensor& w, const Tensor& b) {
  Tensor mixed = adj ? add(z, matmul(*adj, z)) : z;
  return affine(mixed, w, b);
}

}  // namespace

void init_l1_params(ParamStore& store, const L1Config& cfg, Rng& rng) {
  cfg.validate();
  for (std::size_t i = 0; i < cfg.series; ++i) {
    for (std::size_t l = 0; l < cfg.gamma_layers; ++l) {
      const std::size_t in = l == 0 ? cfg.input_dim : cfg.gamma_hidden;
      const std::size_t out = l + 1 == cfg.gamma_layers ? cfg.hidden_dim : cfg.gamma_hidden;
      store.add(gamma_name(i, l, "W"), xavier_uniform({in, out}, rng));
      store.add(gamma_name(i, l, "b"), Array({out}, 0.0));
    }
  }
  if (cfg.use_agc) {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim)));
    Array e({cfg.series, cfg.embed_dim});
    for (std::size_t k = 0; k < e.size(); ++k) e[k] = dist(rng);
    store.add("l1.E", std::move(e));
  }
  add_affine(store, "l1.agc1", cfg.hidden_dim, cfg.field_hidden, rng);
  add_affine(store, "l1.agc2", cfg.field_hidden, cfg.field_hidden, rng);
  add_affine(store, "l1.out", cfg.field_hidden, cfg.hidden_dim * cfg.input_dim, rng);
}

Tensor agc_adjacency(const Tensor& e) {
  if (e.value().rank() != 2 || e.value().rows() < 1) throw Error("agc: node embeddings must be M x d_e, M >= 1");
  return softmax(relu(matmul(e, transpose(e))));
}

Tensor agc(const Tensor& z, const Tensor& e, const Tensor& w, const Tensor& b) {
  if (!e.valid()) return propagate(z, nullptr, w, b);
  if (e.value().rows() != z.value().rows()) {
    throw Error("agc: " + std::to_string(e.value().rows()) + " node embeddings for " +
                std::to_string(z.value().rows()) + " nodes");
  }
  Tensor adj = agc_adjacency(e);
  return propagate(z, &adj, w, b);
}

Tensor embed_initial(const BoundParams& params, const L1Config& cfg, const Tensor& x_first) {
  if (x_first.value().rank() != 2 || x_first.value().rows() != cfg.series ||
      x_first.value().cols() != cfg.input_dim) {
    throw Error("embed_initial: expected " + std::to_string(cfg.series) + " x " +
                std::to_string(cfg.input_dim) + " input, got " + shape_string(x_first.shape()));
  }
  std::vector<Tensor> rows;
  rows.reserve(cfg.series);
  for (std::size_t i = 0; i < cfg.series; ++i) {
    Tensor h = slice_rows(x_first, i, i + 1);
    for (std::size_t l = 0; l < cfg.gamma_layers; ++l) {
      h = affine(h, params[gamma_name(i, l, "W")], params[gamma_name(i, l, "b")]);
      if (l + 1 < cfg.gamma_layers) h = tanh(h);
    }
    rows.push_back(h);
  }
  return concat_rows(rows);
}

std::vector<Tensor> field_params(const BoundParams& params, const L1Config& cfg) {
  std::vector<Tensor> out;
  if (cfg.use_agc) out.push_back(params["l1.E"]);
  for (const char* name : {"l1.agc1.W", "l1.agc1.b", "l1.agc2.W", "l1.agc2.b", "l1.out.W", "l1.out.b"}) {
    out.push_back(params[name]);
  }
  return out;
}

Tensor field_G(const Tensor& h, std::span<const Tensor> field, const L1Config& cfg) {
  const std::size_t expected = cfg.use_agc ? 7 : 6;
  if (field.size() != expected) throw Error("field_G: wrong parameter count");
  std::size_t k = 0;
  Tensor adj;
  if (cfg.use_agc) adj = agc_adjacency(field[k++]);
  const Tensor* a = cfg.use_agc ? &adj : nullptr;
  Tensor z = tanh(propagate(h, a, field[k], field[k + 1]));
  z = tanh(propagate(z, a, field[k + 2], field[k + 3]));
  Tensor out = tanh(affine(z, field[k + 4], field[k + 5]));
  if (!out.value().all_finite()) throw Error("field_G produced non-finite output");
  return out;
}

Tensor encode_periods(const BoundParams& params, const L1Config& cfg,
                      std::span<const Array> series) {
  if (series.size() != cfg.series) {
    throw Error("encode_periods: got " + std::to_string(series.size()) + " series, expected " +
                std::to_string(cfg.series));
  }
  const std::size_t length = series.front().rows();
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].rank() != 2 || series[i].cols() != cfg.input_dim) {
      throw Error("encode_periods: series " + std::to_string(i) + " has shape " +
                  shape_string(series[i].shape()));
    }
    if (series[i].rows() != length) {
      throw Error("encode_periods: series " + std::to_string(i) + " has length " +
                  std::to_string(series[i].rows()) + ", expected " + std::to_string(length));
    }
  }
  if (length < 2) throw Error("encode_periods: need at least 2 observations");

  const std::vector<double> times = index_times(length);
  auto paths = std::make_shared<std::vector<ControlPath>>();
  Array first({cfg.series, cfg.input_dim});
  for (std::size_t i = 0; i < cfg.series; ++i) {
    paths->push_back(ControlPath::fit(times, series[i]));
    for (std::size_t c = 0; c < cfg.input_dim; ++c) first.at(i, c) = series[i].at(0, c);
  }
  Tape& tape = params.all().front().tape();
  Tensor h0 = embed_initial(params, cfg, tape.constant(std::move(first)));
  const std::vector<Tensor> fp = field_params(params, cfg);
  const CdeField field = [cfg](Tape&, const Tensor& h, std::span<const Tensor> p) {
    return field_G(h, p, cfg);
  };
  return integrate_cde(h0, field, fp, paths, times.front(), times.back(), cfg.solver);
}

}  // namespace hypergpa
