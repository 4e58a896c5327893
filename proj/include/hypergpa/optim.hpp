#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypergpa/tensor.hpp"

namespace hypergpa {

using Rng = std::mt19937_64;

// Uniform Glorot/Xavier over the first two extents (fan_in, fan_out). Rank-1
// shapes are biases and come back zero.
Array xavier_uniform(const Shape& shape, Rng& rng);
Array xavier_uniform(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// Ordered, named collection of trainable arrays.
class ParamStore {
 public:
  Array& add(std::string name, Array init);

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Array& value(std::size_t i) { return values_[i]; }
  const Array& value(std::size_t i) const { return values_[i]; }
  std::optional<std::size_t> find(std::string_view name) const;
  const Array& get(std::string_view name) const;
  Array& get(std::string_view name);
  std::size_t scalar_count() const;

  // One gradient-tracking leaf per parameter, in store order.
  std::vector<Tensor> bind(Tape& tape) const;

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<Array> values_;
};

// A store's parameters bound as leaves on one tape, addressable by name.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParamStore& store);
  // Reuses leaves already bound in store order (e.g. by a gradient checker).
  BoundParams(const ParamStore& store, std::span<const Tensor> leaves);

  const Tensor& operator[](std::string_view name) const;
  std::span<const Tensor> all() const { return leaves_; }
  const ParamStore& store() const { return *store_; }

 private:
  const ParamStore* store_;
  std::vector<Tensor> leaves_;
};

struct AdamConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-6;
};

struct AdamState {
  AdamConfig config;
  std::vector<Array> first_moment;
  std::vector<Array> second_moment;
  std::int64_t step = 0;

  explicit AdamState(const ParamStore& params, AdamConfig cfg = {});
};

// Adam with decoupled weight decay. Throws, naming the parameter, on any
// non-finite gradient entry; the store is untouched in that case.
void adam_step(ParamStore& params, std::span<const Array> grads, AdamState& state);

}  // namespace hypergpa
