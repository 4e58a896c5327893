#include "hypergpa/optim.hpp"

#include <cmath>

namespace hypergpa {

Array xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Array out(shape);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist(rng);
  return out;
}

Array xavier_uniform(const Shape& shape, Rng& rng) {
  if (shape.size() < 2) return Array(shape, 0.0);
  return xavier_uniform(shape, shape[0], shape[1], rng);
}

Array& ParamStore::add(std::string name, Array init) {
  if (find(name)) throw Error("duplicate parameter name '" + name + "'");
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  return values_.back();
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

const Array& ParamStore::get(std::string_view name) const {
  auto i = find(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return values_[*i];
}

Array& ParamStore::get(std::string_view name) {
  auto i = find(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return values_[*i];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Array& v : values_) n += v.size();
  return n;
}

std::vector<Tensor> ParamStore::bind(Tape& tape) const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const Array& v : values_) out.push_back(tape.leaf(v));
  return out;
}

BoundParams::BoundParams(Tape& tape, const ParamStore& store)
    : store_(&store), leaves_(store.bind(tape)) {}

BoundParams::BoundParams(const ParamStore& store, std::span<const Tensor> leaves)
    : store_(&store), leaves_(leaves.begin(), leaves.end()) {
  if (leaves_.size() != store.size()) throw Error("BoundParams: leaf count does not match the store");
}

const Tensor& BoundParams::operator[](std::string_view name) const {
  auto i = store_->find(name);
  if (!i) throw Error("unknown parameter '" + std::string(name) + "'");
  return leaves_[*i];
}

AdamState::AdamState(const ParamStore& params, AdamConfig cfg) : config(cfg) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    first_moment.emplace_back(params.value(i).shape(), 0.0);
    second_moment.emplace_back(params.value(i).shape(), 0.0);
  }
}

void adam_step(ParamStore& params, std::span<const Array> grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw Error("adam_step: parameter/gradient/state count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params.value(i).shape()) {
      throw Error("adam_step: gradient shape mismatch for '" + params.name(i) + "'");
    }
    if (!grads[i].all_finite()) {
      throw Error("adam_step: non-finite gradient for parameter '" + params.name(i) + "'");
    }
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Array& p = params.value(i);
    Array& m = state.first_moment[i];
    Array& v = state.second_moment[i];
    const Array& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      const double mhat = m[k] / bias1;
      const double vhat = v[k] / bias2;
      p[k] -= c.learning_rate * (c.weight_decay * p[k] + mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

}  // namespace hypergpa
