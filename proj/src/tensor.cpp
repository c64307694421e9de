#include "pgnd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "pgnd/error.hpp"

namespace pgnd::tg {


std::string shape_str(const std::vector<std::int64_t>& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// ---- Tensor basics ----------------------------------------------------------

Tensor Tensor::zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double value,
                    bool requires_grad) {
  auto node = std::make_shared<TensorImpl>();
  node->shape = std::move(shape);
  node->data.assign(static_cast<std::size_t>(node->size()), value);
  node->requires_grad = requires_grad;
  return Tensor(node);
}

Tensor Tensor::from(std::vector<double> values, std::vector<std::int64_t> shape,
                    bool requires_grad) {
  auto node = std::make_shared<TensorImpl>();
  node->shape = std::move(shape);
  if (static_cast<std::int64_t>(values.size()) != node->size()) {
    throw ShapeError("Tensor::from: " + std::to_string(values.size()) +
                     " values for shape " + shape_str(node->shape));
  }
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(node);
}

std::int64_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows: tensor is " + shape_str(shape()));
  return p_->shape[0];
}

std::int64_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols: tensor is " + shape_str(shape()));
  return p_->shape[1];
}

double Tensor::value() const {
  if (size() != 1) throw ShapeError("value: tensor is " + shape_str(shape()));
  return p_->data[0];
}

double Tensor::at(std::int64_t i, std::int64_t j) const {
  if (rank() != 2 || i < 0 || i >= p_->shape[0] || j < 0 || j >= p_->shape[1]) {
    throw ShapeError("at(" + std::to_string(i) + "," + std::to_string(j) +
                     "): tensor is " + shape_str(shape()));
  }
  return p_->data[static_cast<std::size_t>(i * p_->shape[1] + j)];
}

Tensor Tensor::detached() const {
  auto node = std::make_shared<TensorImpl>();
  node->shape = p_->shape;
  node->data = p_->data;
  node->requires_grad = false;
  return Tensor(node);
}

// ---- graph ------------------------------------------------------------------

namespace {

Tensor make_op(std::vector<TensorPtr> parents, std::vector<std::int64_t> shape,
               std::vector<double> data, std::function<void(TensorImpl&)> bwd) {
  auto node = std::make_shared<TensorImpl>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p->requires_grad;
  node->requires_grad = rg;
  if (rg) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(bwd);
  }
  return Tensor(node);
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void check_rank2(const char* op, const Tensor& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected matrix, got " +
                     shape_str(a.shape()));
  }
}

// Elementwise helper: out[i] = f(a[i]); backward ga[i] += g[i] * dfda(in[i], out[i]).
template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF dfda) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i]);
  return make_op({a.ptr()}, a.shape(), std::move(out), [dfda](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < self.data.size(); ++i) {
      p->grad[i] += self.grad[i] * dfda(p->data[i], self.data[i]);
    }
  });
}

}  // namespace

void backward(const Tensor& root) {
  if (!root.defined()) throw ContractError("backward: undefined tensor");
  if (root.size() != 1) {
    throw ShapeError("backward: root must be scalar, got " + shape_str(root.shape()));
  }
  if (!root.requires_grad()) return;

  // Post-order DFS over the requires-grad subgraph.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{root.raw(), 0}};
  visited.insert(root.raw());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      TensorImpl* c = f.node->parents[f.next++].get();
      if (c->requires_grad && !visited.count(c)) {
        visited.insert(c);
        stack.push_back({c, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  // Interior nodes get a fresh gradient each sweep; leaves accumulate
  // across sweeps until zero_grad.
  for (TensorImpl* n : order) {
    if (n->backward_fn) n->grad.assign(n->data.size(), 0.0);
  }
  root.raw()->ensure_grad();
  root.raw()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

Tensor custom_op(const std::vector<Tensor>& parents,
                 std::vector<std::int64_t> shape, std::vector<double> values,
                 std::function<void(TensorImpl&)> backward_rule) {
  std::vector<TensorPtr> ps;
  ps.reserve(parents.size());
  for (const auto& p : parents) ps.push_back(p.ptr());
  Tensor out = make_op(std::move(ps), std::move(shape), std::move(values),
                       std::move(backward_rule));
  if (static_cast<std::int64_t>(out.data().size()) != out.size()) {
    throw ShapeError("custom_op: values do not match shape " + shape_str(out.shape()));
  }
  return out;
}

// ---- primitives -------------------------------------------------------------

namespace {

// Row-stable GEMM: each output row is accumulated in an order that does not
// depend on the row's position, so permuting the rows of A permutes the rows
// of the product bitwise. Library kernels switch micro-kernels by block
// position and would break that.
void gemm_rows(const double* __restrict__ A, const double* __restrict__ B,
               double* __restrict__ C, std::int64_t n, std::int64_t k,
               std::int64_t m) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double* arow = A + i * k;
    double* crow = C + i * m;
    std::int64_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const double a0 = arow[kk], a1 = arow[kk + 1];
      const double a2 = arow[kk + 2], a3 = arow[kk + 3];
      const double* b0 = B + kk * m;
      const double* b1 = b0 + m;
      const double* b2 = b1 + m;
      const double* b3 = b2 + m;
      for (std::int64_t j = 0; j < m; ++j) {
        crow[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
      }
    }
    for (; kk < k; ++kk) {
      const double av = arow[kk];
      const double* brow = B + kk * m;
      for (std::int64_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// GA(i,:) += G(i,:) * B^T — per-row dot products with a fixed eight-lane
// accumulation pattern, so the result per row is position-independent.
void gemm_bt(const double* __restrict__ G, const double* __restrict__ B,
             double* __restrict__ GA, std::int64_t n, std::int64_t k,
             std::int64_t m) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double* grow = G + i * m;
    double* garow = GA + i * k;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double* brow = B + kk * m;
      double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      std::int64_t j = 0;
      for (; j + 8 <= m; j += 8) {
        for (int l = 0; l < 8; ++l) lane[l] += grow[j + l] * brow[j + l];
      }
      double acc = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
                   ((lane[4] + lane[5]) + (lane[6] + lane[7]));
      for (; j < m; ++j) acc += grow[j] * brow[j];
      garow[kk] += acc;
    }
  }
}

// GB += A^T * G, accumulating over rows i in their given order.
void gemm_at(const double* __restrict__ A, const double* __restrict__ G,
             double* __restrict__ GB, std::int64_t n, std::int64_t k,
             std::int64_t m) {
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const double* a0 = A + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    const double* g0 = G + i * m;
    const double* g1 = g0 + m;
    const double* g2 = g1 + m;
    const double* g3 = g2 + m;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
      double* gbrow = GB + kk * m;
      for (std::int64_t j = 0; j < m; ++j) {
        gbrow[j] += (v0 * g0[j] + v1 * g1[j]) + (v2 * g2[j] + v3 * g3[j]);
      }
    }
  }
  for (; i < n; ++i) {
    const double* arow = A + i * k;
    const double* grow = G + i * m;
    for (std::int64_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      double* gbrow = GB + kk * m;
      for (std::int64_t j = 0; j < m; ++j) gbrow[j] += av * grow[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::int64_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(n * m), 0.0);
  gemm_rows(a.data().data(), b.data().data(), out.data(), n, k, m);
  return make_op({a.ptr(), b.ptr()}, {n, m}, std::move(out),
                 [n, k, m](TensorImpl& self) {
                   auto& pa = self.parents[0];
                   auto& pb = self.parents[1];
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     gemm_bt(self.grad.data(), pb->data.data(), pa->grad.data(),
                             n, k, m);
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     gemm_at(pa->data.data(), self.grad.data(), pb->grad.data(),
                             n, k, m);
                   }
                 });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return make_op({a.ptr(), b.ptr()}, a.shape(), std::move(out), [](TensorImpl& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make_op({a.ptr(), b.ptr()}, a.shape(), std::move(out), [](TensorImpl& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make_op({a.ptr(), b.ptr()}, a.shape(), std::move(out), [](TensorImpl& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (pa->requires_grad) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        pa->grad[i] += self.grad[i] * pb->data[i];
      }
    }
    if (pb->requires_grad) {
      pb->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        pb->grad[i] += self.grad[i] * pa->data[i];
      }
    }
  });
}

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; },
               [](double, double) { return -1.0; });
}

Tensor add_rowvec(const Tensor& a, const Tensor& b) {
  check_rank2("add_rowvec", a);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (b.size() != m) {
    throw ShapeError("add_rowvec: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<double> out(a.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < m; ++j) {
      out[i * m + j] = a.data()[i * m + j] + b.data()[j];
    }
  }
  return make_op({a.ptr(), b.ptr()}, a.shape(), std::move(out),
                 [n, m](TensorImpl& self) {
                   auto& pa = self.parents[0];
                   auto& pb = self.parents[1];
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     for (std::size_t i = 0; i < self.grad.size(); ++i) {
                       pa->grad[i] += self.grad[i];
                     }
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i) {
                       for (std::int64_t j = 0; j < m; ++j) {
                         pb->grad[j] += self.grad[i * m + j];
                       }
                     }
                   }
                 });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x * s; },
               [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(a, [s](double x) { return x + s; },
               [](double, double) { return 1.0; });
}

Tensor add_const(const Tensor& a, const std::vector<double>& c) {
  if (c.size() != a.data().size()) {
    throw ShapeError("add_const: constant has " + std::to_string(c.size()) +
                     " values for " + shape_str(a.shape()));
  }
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c[i];
  return make_op({a.ptr()}, a.shape(), std::move(out), [](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

Tensor scale_rows_const(const Tensor& a, const std::vector<double>& s) {
  check_rank2("scale_rows_const", a);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (static_cast<std::int64_t>(s.size()) != n) {
    throw ShapeError("scale_rows_const: " + std::to_string(s.size()) +
                     " scales for " + shape_str(a.shape()));
  }
  std::vector<double> out(a.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < m; ++j) out[i * m + j] = a.data()[i * m + j] * s[i];
  }
  return make_op({a.ptr()}, a.shape(), std::move(out), [s, n, m](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < m; ++j) {
        p->grad[i * m + j] += self.grad[i * m + j] * s[i];
      }
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sin(const Tensor& a) {
  return unary(a, [](double x) { return std::sin(x); },
               [](double x, double) { return std::cos(x); });
}

Tensor cos(const Tensor& a) {
  return unary(a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; },
               [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  // Callers keep inputs strictly positive; the derivative blows up at 0.
  return unary(a, [](double x) { return std::sqrt(x); },
               [](double, double y) { return 0.5 / y; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_op({a.ptr()}, {1}, {s}, [](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("mean: empty tensor");
  double s = 0.0;
  for (double x : a.data()) s += x;
  const double inv = 1.0 / static_cast<double>(a.size());
  return make_op({a.ptr()}, {1}, {s * inv}, [inv](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0] * inv;
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::int64_t n = parts[0].rank() == 2 ? parts[0].shape()[0] : -1;
  if (n < 0) throw ShapeError("concat_cols: expected matrices");
  std::int64_t total = 0;
  std::vector<std::int64_t> widths;
  for (const auto& p : parts) {
    check_rank2("concat_cols", p);
    if (p.shape()[0] != n) {
      throw ShapeError("concat_cols: row mismatch " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(p.shape()));
    }
    widths.push_back(p.shape()[1]);
    total += p.shape()[1];
  }
  std::vector<double> out(static_cast<std::size_t>(n * total));
  std::int64_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& d = parts[k].data();
    const std::int64_t m = widths[k];
    for (std::int64_t i = 0; i < n; ++i) {
      std::copy_n(d.begin() + i * m, m, out.begin() + i * total + off);
    }
    off += m;
  }
  std::vector<TensorPtr> ps;
  for (const auto& p : parts) ps.push_back(p.ptr());
  return make_op(std::move(ps), {n, total}, std::move(out),
                 [n, total, widths](TensorImpl& self) {
                   std::int64_t off = 0;
                   for (std::size_t k = 0; k < self.parents.size(); ++k) {
                     auto& p = self.parents[k];
                     const std::int64_t m = widths[k];
                     if (p->requires_grad) {
                       p->ensure_grad();
                       for (std::int64_t i = 0; i < n; ++i) {
                         for (std::int64_t j = 0; j < m; ++j) {
                           p->grad[i * m + j] += self.grad[i * total + off + j];
                         }
                       }
                     }
                     off += m;
                   }
                 });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  check_rank2("concat_rows", parts[0]);
  const std::int64_t m = parts[0].shape()[1];
  std::int64_t total = 0;
  std::vector<std::int64_t> heights;
  for (const auto& p : parts) {
    check_rank2("concat_rows", p);
    if (p.shape()[1] != m) {
      throw ShapeError("concat_rows: col mismatch " + shape_str(parts[0].shape()) +
                       " vs " + shape_str(p.shape()));
    }
    heights.push_back(p.shape()[0]);
    total += p.shape()[0];
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total * m));
  for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  std::vector<TensorPtr> ps;
  for (const auto& p : parts) ps.push_back(p.ptr());
  return make_op(std::move(ps), {total, m}, std::move(out),
                 [m, heights](TensorImpl& self) {
                   std::int64_t row = 0;
                   for (std::size_t k = 0; k < self.parents.size(); ++k) {
                     auto& p = self.parents[k];
                     const std::int64_t h = heights[k];
                     if (p->requires_grad) {
                       p->ensure_grad();
                       for (std::int64_t i = 0; i < h * m; ++i) {
                         p->grad[i] += self.grad[row * m + i];
                       }
                     }
                     row += h;
                   }
                 });
}

Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t j1) {
  check_rank2("slice_cols", a);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (j0 < 0 || j1 > m || j0 >= j1) {
    throw ShapeError("slice_cols: [" + std::to_string(j0) + "," + std::to_string(j1) +
                     ") of " + shape_str(a.shape()));
  }
  const std::int64_t w = j1 - j0;
  std::vector<double> out(static_cast<std::size_t>(n * w));
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin() + i * m + j0, w, out.begin() + i * w);
  }
  return make_op({a.ptr()}, {n, w}, std::move(out), [n, m, j0, w](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < w; ++j) {
        p->grad[i * m + j0 + j] += self.grad[i * w + j];
      }
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<int>& idx) {
  check_rank2("gather_rows", a);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  for (int i : idx) {
    if (i < 0 || i >= n) {
      throw ShapeError("gather_rows: index " + std::to_string(i) + " out of " +
                       shape_str(a.shape()));
    }
  }
  const std::int64_t k = static_cast<std::int64_t>(idx.size());
  std::vector<double> out(static_cast<std::size_t>(k * m));
  for (std::int64_t i = 0; i < k; ++i) {
    std::copy_n(a.data().begin() + static_cast<std::int64_t>(idx[i]) * m, m,
                out.begin() + i * m);
  }
  return make_op({a.ptr()}, {k, m}, std::move(out), [idx, m](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::int64_t src = static_cast<std::int64_t>(i) * m;
      const std::int64_t dst = static_cast<std::int64_t>(idx[i]) * m;
      for (std::int64_t j = 0; j < m; ++j) p->grad[dst + j] += self.grad[src + j];
    }
  });
}

Tensor scatter_add_rows(const Tensor& src, const std::vector<int>& idx,
                        std::int64_t out_rows) {
  check_rank2("scatter_add_rows", src);
  const std::int64_t k = src.shape()[0], m = src.shape()[1];
  if (static_cast<std::int64_t>(idx.size()) != k) {
    throw ShapeError("scatter_add_rows: " + std::to_string(idx.size()) +
                     " indices for " + shape_str(src.shape()));
  }
  for (int i : idx) {
    if (i < 0 || i >= out_rows) {
      throw ShapeError("scatter_add_rows: index " + std::to_string(i) +
                       " out of " + std::to_string(out_rows) + " rows");
    }
  }
  std::vector<double> out(static_cast<std::size_t>(out_rows * m), 0.0);
  for (std::int64_t i = 0; i < k; ++i) {
    const std::int64_t dst = static_cast<std::int64_t>(idx[i]) * m;
    for (std::int64_t j = 0; j < m; ++j) out[dst + j] += src.data()[i * m + j];
  }
  return make_op({src.ptr()}, {out_rows, m}, std::move(out),
                 [idx, m](TensorImpl& self) {
                   auto& p = self.parents[0];
                   if (!p->requires_grad) return;
                   p->ensure_grad();
                   for (std::size_t i = 0; i < idx.size(); ++i) {
                     const std::int64_t src = static_cast<std::int64_t>(i) * m;
                     const std::int64_t g = static_cast<std::int64_t>(idx[i]) * m;
                     for (std::int64_t j = 0; j < m; ++j) {
                       p->grad[src + j] += self.grad[g + j];
                     }
                   }
                 });
}

namespace {

Tensor col_extreme(const Tensor& a, bool want_max, const char* name) {
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (n == 0) throw ShapeError(std::string(name) + ": empty tensor");
  std::vector<double> out(static_cast<std::size_t>(m));
  std::vector<std::int64_t> arg(static_cast<std::size_t>(m), 0);
  for (std::int64_t j = 0; j < m; ++j) {
    double best = a.data()[j];
    std::int64_t bi = 0;
    for (std::int64_t i = 1; i < n; ++i) {
      double v = a.data()[i * m + j];
      if (want_max ? v > best : v < best) {
        best = v;
        bi = i;
      }
    }
    out[j] = best;
    arg[j] = bi;
  }
  return make_op({a.ptr()}, {1, m}, std::move(out), [arg, m](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::int64_t j = 0; j < m; ++j) {
      p->grad[arg[j] * m + j] += self.grad[j];
    }
  });
}

}  // namespace

Tensor colmax(const Tensor& a) {
  check_rank2("colmax", a);
  return col_extreme(a, true, "colmax");
}

Tensor colmin(const Tensor& a) {
  check_rank2("colmin", a);
  return col_extreme(a, false, "colmin");
}

Tensor repeat_rows(const Tensor& a, std::int64_t n) {
  check_rank2("repeat_rows", a);
  if (a.shape()[0] != 1) {
    throw ShapeError("repeat_rows: expected [1 x m], got " + shape_str(a.shape()));
  }
  const std::int64_t m = a.shape()[1];
  std::vector<double> out(static_cast<std::size_t>(n * m));
  for (std::int64_t i = 0; i < n; ++i) {
    std::copy_n(a.data().begin(), m, out.begin() + i * m);
  }
  return make_op({a.ptr()}, {n, m}, std::move(out), [n, m](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < m; ++j) p->grad[j] += self.grad[i * m + j];
    }
  });
}

Tensor rowscale(const Tensor& a, const Tensor& s) {
  check_rank2("rowscale", a);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (!(s.rank() == 2 && s.shape()[0] == n && s.shape()[1] == 1) &&
      !(s.rank() == 1 && s.shape()[0] == n)) {
    throw ShapeError("rowscale: " + shape_str(a.shape()) + " vs " +
                     shape_str(s.shape()));
  }
  std::vector<double> out(a.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    const double si = s.data()[i];
    for (std::int64_t j = 0; j < m; ++j) out[i * m + j] = a.data()[i * m + j] * si;
  }
  return make_op({a.ptr(), s.ptr()}, a.shape(), std::move(out),
                 [n, m](TensorImpl& self) {
                   auto& pa = self.parents[0];
                   auto& ps = self.parents[1];
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i) {
                       const double si = ps->data[i];
                       for (std::int64_t j = 0; j < m; ++j) {
                         pa->grad[i * m + j] += self.grad[i * m + j] * si;
                       }
                     }
                   }
                   if (ps->requires_grad) {
                     ps->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i) {
                       double acc = 0.0;
                       for (std::int64_t j = 0; j < m; ++j) {
                         acc += self.grad[i * m + j] * pa->data[i * m + j];
                       }
                       ps->grad[i] += acc;
                     }
                   }
                 });
}

Tensor reshape(const Tensor& a, std::vector<std::int64_t> shape) {
  std::int64_t total = 1;
  for (auto d : shape) total *= d;
  if (total != a.size()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
  }
  std::vector<double> out = a.data();
  return make_op({a.ptr()}, std::move(shape), std::move(out), [](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

Tensor replace_rows(const Tensor& a, const std::vector<int>& rows, const Tensor& b) {
  check_rank2("replace_rows", a);
  check_rank2("replace_rows", b);
  const std::int64_t n = a.shape()[0], m = a.shape()[1];
  if (b.shape()[1] != m ||
      b.shape()[0] != static_cast<std::int64_t>(rows.size())) {
    throw ShapeError("replace_rows: " + shape_str(a.shape()) + " rows=" +
                     std::to_string(rows.size()) + " vs " + shape_str(b.shape()));
  }
  std::vector<char> hit(static_cast<std::size_t>(n), 0);
  for (int r : rows) {
    if (r < 0 || r >= n) {
      throw ShapeError("replace_rows: row " + std::to_string(r) + " out of " +
                       shape_str(a.shape()));
    }
    if (hit[r]) throw ContractError("replace_rows: duplicate row " + std::to_string(r));
    hit[r] = 1;
  }
  std::vector<double> out = a.data();
  for (std::size_t k = 0; k < rows.size(); ++k) {
    std::copy_n(b.data().begin() + static_cast<std::int64_t>(k) * m, m,
                out.begin() + static_cast<std::int64_t>(rows[k]) * m);
  }
  return make_op({a.ptr(), b.ptr()}, a.shape(), std::move(out),
                 [rows, hit, n, m](TensorImpl& self) {
                   auto& pa = self.parents[0];
                   auto& pb = self.parents[1];
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     for (std::int64_t i = 0; i < n; ++i) {
                       if (hit[i]) continue;
                       for (std::int64_t j = 0; j < m; ++j) {
                         pa->grad[i * m + j] += self.grad[i * m + j];
                       }
                     }
                   }
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     for (std::size_t k = 0; k < rows.size(); ++k) {
                       for (std::int64_t j = 0; j < m; ++j) {
                         pb->grad[static_cast<std::int64_t>(k) * m + j] +=
                             self.grad[static_cast<std::int64_t>(rows[k]) * m + j];
                       }
                     }
                   }
                 });
}

Tensor map_unary(const Tensor& a, double (*f)(double), double (*df)(double)) {
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.data()[i]);
  return make_op({a.ptr()}, a.shape(), std::move(out), [df](TensorImpl& self) {
    auto& p = self.parents[0];
    if (!p->requires_grad) return;
    p->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p->grad[i] += self.grad[i] * df(p->data[i]);
    }
  });
}

}  // namespace pgnd::tg
