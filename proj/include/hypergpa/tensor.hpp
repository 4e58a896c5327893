#pragma once

// Reverse-mode automatic differentiation over dense f64 arrays.
//
// A Tape is an append-only record of operations. Every Tensor is a handle to
// one node of one tape; parents always precede children, so the reverse sweep
// is a single backwards walk over the node list. Parameters live outside the
// tape as plain Arrays and enter each forward pass as leaves.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypergpa {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Array {
 public:
  Array() = default;
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array scalar(double value) { return Array({}, std::vector<double>{value}); }
  static Array vector(std::vector<double> values);
  static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  // 2-D view used by broadcasting ops: rows = product of all leading extents.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  double item() const;
  Array reshaped(Shape shape) const;
  bool all_finite() const;

  friend bool operator==(const Array&, const Array&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

using NodeId = std::int32_t;
class Tape;

// Accumulates adjoints during one reverse sweep.
class GradSink {
 public:
  // Zero-initialized on first use; ops accumulate into it in place.
  Array& slot(NodeId id);
  bool wants(NodeId id) const;

 private:
  friend class Tape;
  GradSink(const Tape& tape, NodeId last);
  const Tape* tape_;
  std::vector<Array> adj_;
  std::vector<std::uint8_t> touched_;
};

using Backward = std::function<void(const Tape&, NodeId self, const Array& grad_out, GradSink&)>;

class Tensor {
 public:
  Tensor() = default;

  Tape& tape() const;
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Array& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, NodeId id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  NodeId id_ = -1;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor leaf(Array value, bool requires_grad = true);
  Tensor constant(Array value) { return leaf(std::move(value), false); }

  // Records an op. When no parent requires a gradient the backward closure is
  // dropped and the node is a constant.
  Tensor record(Array value, std::initializer_list<Tensor> parents, Backward backward);
  Tensor record(Array value, std::span<const Tensor> parents, Backward backward);

  const Array& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(NodeId id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }
  std::size_t size() const { return nodes_.size(); }

  // d loss / d param for each param. The tape is left untouched, so grad may
  // be called repeatedly. Throws when loss is not a scalar or when a param
  // does not feed the loss.
  std::vector<Array> grad(const Tensor& loss, std::span<const Tensor> params) const;

 private:
  struct Node {
    Array value;
    std::vector<NodeId> parents;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Binary elementwise ops broadcast on the 2-D
// (rows, cols) view: each operand's rows are either R or 1 and its cols are
// either C or 1.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor softmax(const Tensor& a);  // last axis
Tensor layer_norm(const Tensor& a, double eps = 1e-5);  // last axis, no affine
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_cols(const Tensor& a);  // reduces the last axis
Tensor reshape(const Tensor& a, Shape shape);
Tensor transpose(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

// Composites.
Tensor square(const Tensor& a);
Tensor mse(const Tensor& pred, const Tensor& target);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);  // x w + b
Tensor one_minus(const Tensor& a);

}  // namespace hypergpa
