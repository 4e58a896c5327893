#include "hypergpa/tensor.hpp"

#include <cmath>
#include <sstream>

namespace hypergpa {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != shape_numel(shape_)) {
    throw Error("array data length " + std::to_string(data_.size()) + " does not match shape " +
                shape_string(shape_));
  }
}

Array Array::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Array({n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array({rows, cols}, std::move(values));
}

std::size_t Array::rows() const {
  if (shape_.size() <= 1) return 1;
  std::size_t r = 1;
  for (std::size_t i = 0; i + 1 < shape_.size(); ++i) r *= shape_[i];
  return r;
}

std::size_t Array::cols() const { return shape_.empty() ? 1 : shape_.back(); }

double Array::item() const {
  if (data_.size() != 1) throw Error("item() on array of shape " + shape_string(shape_));
  return data_[0];
}

Array Array::reshaped(Shape shape) const {
  if (shape_numel(shape) != data_.size()) {
    throw Error("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Array(std::move(shape), data_);
}

bool Array::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

Tape& Tensor::tape() const {
  if (!tape_) throw Error("use of an unbound tensor");
  return *tape_;
}

const Array& Tensor::value() const { return tape().value(id_); }

bool Tensor::requires_grad() const { return tape().requires_grad(id_); }

GradSink::GradSink(const Tape& tape, NodeId last)
    : tape_(&tape),
      adj_(static_cast<std::size_t>(last) + 1),
      touched_(static_cast<std::size_t>(last) + 1, 0) {}

bool GradSink::wants(NodeId id) const { return tape_->requires_grad(id); }

Array& GradSink::slot(NodeId id) {
  const auto i = static_cast<std::size_t>(id);
  if (!touched_[i]) {
    adj_[i] = Array(tape_->value(id).shape(), 0.0);
    touched_[i] = 1;
  }
  return adj_[i];
}

Tensor Tape::leaf(Array value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad});
  return Tensor(this, static_cast<NodeId>(nodes_.size() - 1));
}

Tensor Tape::record(Array value, std::initializer_list<Tensor> parents, Backward backward) {
  return record(std::move(value), std::span<const Tensor>(parents.begin(), parents.size()),
                std::move(backward));
}

Tensor Tape::record(Array value, std::span<const Tensor> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.parents.reserve(parents.size());
  for (const Tensor& p : parents) {
    if (&p.tape() != this) throw Error("operands live on different tapes");
    node.parents.push_back(p.id());
    node.requires_grad = node.requires_grad || requires_grad(p.id());
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Tensor(this, static_cast<NodeId>(nodes_.size() - 1));
}

std::vector<Array> Tape::grad(const Tensor& loss, std::span<const Tensor> params) const {
  if (&loss.tape() != this) throw Error("loss is not on this tape");
  if (value(loss.id()).size() != 1) {
    throw Error("grad() needs a scalar loss, got shape " + shape_string(value(loss.id()).shape()));
  }
  for (const Tensor& p : params) {
    if (&p.tape() != this) throw Error("parameter is not on this tape");
    if (!requires_grad(p.id())) throw Error("parameter does not require a gradient");
    if (p.id() > loss.id()) throw Error("parameter was recorded after the loss");
  }

  GradSink sink(*this, loss.id());
  sink.slot(loss.id()).data()[0] = 1.0;
  for (NodeId id = loss.id(); id >= 0; --id) {
    const auto i = static_cast<std::size_t>(id);
    if (!sink.touched_[i] || !nodes_[i].backward) continue;
    nodes_[i].backward(*this, id, sink.adj_[i], sink);
  }

  std::vector<Array> out;
  out.reserve(params.size());
  for (const Tensor& p : params) {
    const auto i = static_cast<std::size_t>(p.id());
    if (!sink.touched_[i]) {
      throw Error("parameter (node " + std::to_string(p.id()) + ") is not reachable from the loss");
    }
    out.push_back(sink.adj_[i]);
  }
  return out;
}

}  // namespace hypergpa
