#include <algorithm>
#include <cmath>

#include "hypergpa/kernels.hpp"
#include "hypergpa/tensor.hpp"

namespace hypergpa {
namespace {

const kernels::KernelTable& K() { return kernels::active(); }

struct Broadcast {
  std::size_t rows = 0, cols = 0;
  std::size_t a_rows = 0, a_cols = 0, b_rows = 0, b_cols = 0;
  Shape out;

  bool same() const { return a_rows == b_rows && a_cols == b_cols; }
  std::size_t ia(std::size_t r, std::size_t c) const {
    return (a_rows == 1 ? 0 : r) * a_cols + (a_cols == 1 ? 0 : c);
  }
  std::size_t ib(std::size_t r, std::size_t c) const {
    return (b_rows == 1 ? 0 : r) * b_cols + (b_cols == 1 ? 0 : c);
  }
};

Broadcast broadcast(const Array& a, const Array& b, const char* op) {
  Broadcast bc;
  bc.a_rows = a.rows();
  bc.a_cols = a.cols();
  bc.b_rows = b.rows();
  bc.b_cols = b.cols();
  bc.rows = std::max(bc.a_rows, bc.b_rows);
  bc.cols = std::max(bc.a_cols, bc.b_cols);
  const bool ok = (bc.a_rows == bc.rows || bc.a_rows == 1) && (bc.b_rows == bc.rows || bc.b_rows == 1) &&
                  (bc.a_cols == bc.cols || bc.a_cols == 1) && (bc.b_cols == bc.cols || bc.b_cols == 1);
  if (!ok || a.size() == 0 || b.size() == 0) {
    throw Error(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                shape_string(b.shape()));
  }
  if (bc.a_rows == bc.rows && bc.a_cols == bc.cols) {
    bc.out = a.shape();
  } else if (bc.b_rows == bc.rows && bc.b_cols == bc.cols) {
    bc.out = b.shape();
  } else {
    bc.out = {bc.rows, bc.cols};
  }
  return bc;
}

// target (shape tr x tc, broadcast into R x C) += sign * g, summed over broadcast axes.
void reduce_into(const Array& g, const Broadcast& bc, bool for_a, double sign, Array& target) {
  const std::size_t tr = for_a ? bc.a_rows : bc.b_rows;
  const std::size_t tc = for_a ? bc.a_cols : bc.b_cols;
  if (tr == bc.rows && tc == bc.cols) {
    K().axpy(g.size(), sign, g.ptr(), target.ptr());
    return;
  }
  double* t = target.ptr();
  const double* gp = g.ptr();
  for (std::size_t r = 0; r < bc.rows; ++r) {
    for (std::size_t c = 0; c < bc.cols; ++c) {
      t[(tr == 1 ? 0 : r) * tc + (tc == 1 ? 0 : c)] += sign * gp[r * bc.cols + c];
    }
  }
}

Tensor binary_additive(const Tensor& a, const Tensor& b, double sign_b, const char* name) {
  const Array& av = a.value();
  const Array& bv = b.value();
  Broadcast bc = broadcast(av, bv, name);
  Array out(bc.out);
  if (bc.same()) {
    if (sign_b > 0) {
      K().add(out.size(), av.ptr(), bv.ptr(), out.ptr());
    } else {
      K().sub(out.size(), av.ptr(), bv.ptr(), out.ptr());
    }
  } else {
    double* o = out.ptr();
    for (std::size_t r = 0; r < bc.rows; ++r) {
      for (std::size_t c = 0; c < bc.cols; ++c) {
        const double x = av.ptr()[bc.ia(r, c)];
        const double y = bv.ptr()[bc.ib(r, c)];
        o[r * bc.cols + c] = sign_b > 0 ? x + y : x - y;
      }
    }
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [bc, ia, ib, sign_b](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           if (sink.wants(ia)) reduce_into(g, bc, true, 1.0, sink.slot(ia));
                           if (sink.wants(ib)) reduce_into(g, bc, false, sign_b, sink.slot(ib));
                         });
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F forward, D derivative_from_xy) {
  const Array& av = a.value();
  Array out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = forward(av[i]);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, derivative_from_xy](const Tape& tape, NodeId self, const Array& g,
                                                  GradSink& sink) {
                           const Array& x = tape.value(ia);
                           const Array& y = tape.value(self);
                           Array& ga = sink.slot(ia);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             ga[i] += g[i] * derivative_from_xy(x[i], y[i]);
                           }
                         });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.shape()[1] != bv.shape()[0]) {
    throw Error("matmul: incompatible shapes " + shape_string(av.shape()) + " x " +
                shape_string(bv.shape()));
  }
  const std::size_t m = av.shape()[0], k = av.shape()[1], n = bv.shape()[1];
  Array out({m, n});
  K().matmul_nn(m, k, n, av.ptr(), bv.ptr(), out.ptr(), false);
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib, m, k, n](const Tape& tape, NodeId, const Array& g, GradSink& sink) {
                           if (sink.wants(ia)) {
                             K().matmul_nt(m, n, k, g.ptr(), tape.value(ib).ptr(), sink.slot(ia).ptr(),
                                           true);
                           }
                           if (sink.wants(ib)) {
                             K().matmul_tn(k, m, n, tape.value(ia).ptr(), g.ptr(), sink.slot(ib).ptr(),
                                           true);
                           }
                         });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_additive(a, b, 1.0, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_additive(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  const Array& av = a.value();
  const Array& bv = b.value();
  Broadcast bc = broadcast(av, bv, "mul");
  Array out(bc.out);
  if (bc.same()) {
    K().mul(out.size(), av.ptr(), bv.ptr(), out.ptr());
  } else {
    for (std::size_t r = 0; r < bc.rows; ++r) {
      for (std::size_t c = 0; c < bc.cols; ++c) {
        out.ptr()[r * bc.cols + c] = av.ptr()[bc.ia(r, c)] * bv.ptr()[bc.ib(r, c)];
      }
    }
  }
  const NodeId ia = a.id(), ib = b.id();
  return a.tape().record(
      std::move(out), {a, b}, [bc, ia, ib](const Tape& tape, NodeId, const Array& g, GradSink& sink) {
        const Array& x = tape.value(ia);
        const Array& y = tape.value(ib);
        if (bc.same()) {
          if (sink.wants(ia)) K().mul_acc(g.size(), g.ptr(), y.ptr(), sink.slot(ia).ptr());
          if (sink.wants(ib)) K().mul_acc(g.size(), g.ptr(), x.ptr(), sink.slot(ib).ptr());
          return;
        }
        double* ga = sink.wants(ia) ? sink.slot(ia).ptr() : nullptr;
        double* gb = sink.wants(ib) ? sink.slot(ib).ptr() : nullptr;
        for (std::size_t r = 0; r < bc.rows; ++r) {
          for (std::size_t c = 0; c < bc.cols; ++c) {
            const double gv = g.ptr()[r * bc.cols + c];
            const std::size_t pa = bc.ia(r, c), pb = bc.ib(r, c);
            if (ga) ga[pa] += gv * y.ptr()[pb];
            if (gb) gb[pb] += gv * x.ptr()[pa];
          }
        }
      });
}

Tensor scale(const Tensor& a, double factor) {
  const Array& av = a.value();
  Array out(av.shape());
  K().scale(av.size(), factor, av.ptr(), out.ptr());
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, factor](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           K().axpy(g.size(), factor, g.ptr(), sink.slot(ia).ptr());
                         });
}

Tensor add_scalar(const Tensor& a, double value) {
  const Array& av = a.value();
  Array out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + value;
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           K().axpy(g.size(), 1.0, g.ptr(), sink.slot(ia).ptr());
                         });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor reciprocal(const Tensor& a) {
  for (double x : a.value().data()) {
    if (x == 0.0) throw Error("reciprocal: division by zero");
  }
  return unary(a, [](double x) { return 1.0 / x; }, [](double, double y) { return -y * y; });
}

Tensor softmax(const Tensor& a) {
  const Array& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Array out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.ptr() + r * cols;
    double* y = out.ptr() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, rows, cols](const Tape& tape, NodeId self, const Array& g, GradSink& sink) {
                           const Array& y = tape.value(self);
                           Array& ga = sink.slot(ia);
                           for (std::size_t r = 0; r < rows; ++r) {
                             const double* yr = y.ptr() + r * cols;
                             const double* gr = g.ptr() + r * cols;
                             const double s = K().dot(cols, gr, yr);
                             double* out = ga.ptr() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) out[c] += yr[c] * (gr[c] - s);
                           }
                         });
}

Tensor layer_norm(const Tensor& a, double eps) {
  const Array& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Array out(av.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.ptr() + r * cols;
    double* y = out.ptr() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += x[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) y[c] = (x[c] - mu) * inv_std[r];
  }
  const NodeId ia = a.id();
  return a.tape().record(
      std::move(out), {a},
      [ia, rows, cols, inv_std = std::move(inv_std)](const Tape& tape, NodeId self, const Array& g,
                                                     GradSink& sink) {
        const Array& y = tape.value(self);
        Array& ga = sink.slot(ia);
        const double n = static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* yr = y.ptr() + r * cols;
          const double* gr = g.ptr() + r * cols;
          double gs = 0.0, gy = 0.0;
          for (std::size_t c = 0; c < cols; ++c) {
            gs += gr[c];
            gy += gr[c] * yr[c];
          }
          double* out = ga.ptr() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) {
            out[c] += inv_std[r] / n * (n * gr[c] - gs - yr[c] * gy);
          }
        }
      });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.value().rows() != rows) throw Error("concat_cols: row count mismatch");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  Shape shape = parts[0].shape();
  if (shape.empty()) shape = {1};
  shape.back() = total;
  Array out(shape);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.ptr() + r * widths[k], widths[k], out.ptr() + r * total + offset);
    }
    offset += widths[k];
  }
  std::vector<NodeId> ids;
  for (const Tensor& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(
      std::move(out), parts,
      [ids, widths, rows, total](const Tape&, NodeId, const Array& g, GradSink& sink) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (sink.wants(ids[k])) {
            Array& gk = sink.slot(ids[k]);
            for (std::size_t r = 0; r < rows; ++r) {
              K().axpy(widths[k], 1.0, g.ptr() + r * total + off, gk.ptr() + r * widths[k]);
            }
          }
          off += widths[k];
        }
      });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error("concat_rows: no inputs");
  const std::size_t cols = parts[0].value().cols();
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    if (p.value().cols() != cols) throw Error("concat_rows: column count mismatch");
    counts.push_back(p.value().rows());
    total += counts.back();
  }
  Array out({total, cols});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Array& v = parts[k].value();
    std::copy_n(v.ptr(), v.size(), out.ptr() + offset * cols);
    offset += counts[k];
  }
  std::vector<NodeId> ids;
  for (const Tensor& p : parts) ids.push_back(p.id());
  return parts[0].tape().record(std::move(out), parts,
                                [ids, counts, cols](const Tape&, NodeId, const Array& g, GradSink& sink) {
                                  std::size_t off = 0;
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (sink.wants(ids[k])) {
                                      K().axpy(counts[k] * cols, 1.0, g.ptr() + off * cols,
                                               sink.slot(ids[k]).ptr());
                                    }
                                    off += counts[k];
                                  }
                                });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
  const Array& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (begin >= end || end > cols) throw Error("slice_cols: bad range");
  const std::size_t w = end - begin;
  Shape shape = av.shape();
  if (shape.empty()) shape = {1};
  shape.back() = w;
  Array out(shape);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(av.ptr() + r * cols + begin, w, out.ptr() + r * w);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, rows, cols, begin, w](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           Array& ga = sink.slot(ia);
                           for (std::size_t r = 0; r < rows; ++r) {
                             K().axpy(w, 1.0, g.ptr() + r * w, ga.ptr() + r * cols + begin);
                           }
                         });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
  const Array& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (begin >= end || end > rows) throw Error("slice_rows: bad range");
  Array out({end - begin, cols});
  std::copy_n(av.ptr() + begin * cols, (end - begin) * cols, out.ptr());
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, begin, cols](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           K().axpy(g.size(), 1.0, g.ptr(), sink.slot(ia).ptr() + begin * cols);
                         });
}

Tensor sum(const Tensor& a) {
  const Array& av = a.value();
  Array out = Array::scalar(K().sum(av.size(), av.ptr()));
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](const Tape&, NodeId, const Array& g, GradSink& sink) {
    Array& ga = sink.slot(ia);
    const double gv = g[0];
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gv;
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_cols(const Tensor& a) {
  const Array& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Shape shape = av.shape();
  if (!shape.empty()) shape.pop_back();
  Array out(shape);
  for (std::size_t r = 0; r < rows; ++r) out[r] = K().sum(cols, av.ptr() + r * cols);
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, rows, cols](const Tape&, NodeId, const Array& g, GradSink& sink) {
                           Array& ga = sink.slot(ia);
                           for (std::size_t r = 0; r < rows; ++r) {
                             double* row = ga.ptr() + r * cols;
                             for (std::size_t c = 0; c < cols; ++c) row[c] += g[r];
                           }
                         });
}

Tensor reshape(const Tensor& a, Shape shape) {
  Array out = a.value().reshaped(std::move(shape));
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia](const Tape&, NodeId, const Array& g, GradSink& sink) {
    K().axpy(g.size(), 1.0, g.ptr(), sink.slot(ia).ptr());
  });
}

Tensor transpose(const Tensor& a) {
  const Array& av = a.value();
  if (av.rank() != 2) throw Error("transpose: rank-2 input required");
  const std::size_t m = av.shape()[0], n = av.shape()[1];
  Array out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.ptr()[j * m + i] = av.ptr()[i * n + j];
  const NodeId ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, m, n](const Tape&, NodeId, const Array& g, GradSink& sink) {
    Array& ga = sink.slot(ia);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga.ptr()[i * n + j] += g.ptr()[j * m + i];
  });
}

Tensor square(const Tensor& a) { return mul(a, a); }

Tensor mse(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw Error("mse: shape mismatch " + shape_string(pred.shape()) + " vs " +
                shape_string(target.shape()));
  }
  return mean(square(sub(pred, target)));
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return sub(relu(a), scale(relu(scale(a, -1.0)), slope));
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) { return add(matmul(x, w), b); }

Tensor one_minus(const Tensor& a) { return add_scalar(scale(a, -1.0), 1.0); }

}  // namespace hypergpa
