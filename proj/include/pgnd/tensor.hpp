#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pgnd::tg {

// Dense row-major f64 tensor with reverse-mode autodiff. Rank is 1 or 2 in
// practice: [n] vectors and [n x m] matrices. Graphs are built eagerly; a
// node records its parents and a backward rule only while some parent
// requires gradients, so inference runs tape-free.
struct TensorImpl;
using TensorPtr = std::shared_ptr<TensorImpl>;

struct TensorImpl {
  std::vector<std::int64_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // lazily allocated, same length as data
  bool requires_grad = false;
  std::vector<TensorPtr> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::int64_t size() const {
    std::int64_t s = 1;
    for (auto d : shape) s *= d;
    return s;
  }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(TensorPtr p) : p_(std::move(p)) {}

  static Tensor zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<std::int64_t> shape, double value,
                     bool requires_grad = false);
  static Tensor from(std::vector<double> values, std::vector<std::int64_t> shape,
                     bool requires_grad = false);

  bool defined() const { return static_cast<bool>(p_); }
  const std::vector<std::int64_t>& shape() const { return p_->shape; }
  std::int64_t rank() const { return static_cast<std::int64_t>(p_->shape.size()); }
  std::int64_t rows() const;
  std::int64_t cols() const;
  std::int64_t size() const { return p_->size(); }
  bool requires_grad() const { return p_->requires_grad; }

  std::vector<double>& data() { return p_->data; }
  const std::vector<double>& data() const { return p_->data; }
  std::vector<double>& grad() { p_->ensure_grad(); return p_->grad; }
  const std::vector<double>& grad_view() const { return p_->grad; }

  double value() const;            // scalar tensors only
  double at(std::int64_t i, std::int64_t j) const;

  void zero_grad() { if (p_) { p_->ensure_grad(); std::fill(p_->grad.begin(), p_->grad.end(), 0.0); } }
  Tensor detached() const;         // same data, no history, no grad

  TensorPtr ptr() const { return p_; }
  TensorImpl* raw() const { return p_.get(); }

 private:
  TensorPtr p_;
};

std::string shape_str(const std::vector<std::int64_t>& s);

// ---- graph ----------------------------------------------------------------

// Reverse-mode sweep from a scalar root. Gradients accumulate across calls
// until zero_grad; repeated backward sums contributions.
void backward(const Tensor& root);

// Extension point: wrap precomputed forward values as a graph node. The
// backward rule receives the node with its grad populated and must
// accumulate into parents that require gradients.
Tensor custom_op(const std::vector<Tensor>& parents,
                 std::vector<std::int64_t> shape, std::vector<double> values,
                 std::function<void(TensorImpl&)> backward_rule);

// ---- primitives -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);   // [n x k] * [k x m]
Tensor add(const Tensor& a, const Tensor& b);      // same shape
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);      // elementwise, same shape
Tensor neg(const Tensor& a);
Tensor add_rowvec(const Tensor& a, const Tensor& b);  // [n x m] + [m]
Tensor mul_scalar(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
// Elementwise constant offset/scale (no gradient into the constants).
Tensor add_const(const Tensor& a, const std::vector<double>& c);
Tensor scale_rows_const(const Tensor& a, const std::vector<double>& s);  // s: per row
Tensor relu(const Tensor& a);
Tensor sin(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor sum(const Tensor& a);    // all elements -> [1]
Tensor mean(const Tensor& a);   // all elements -> [1]
Tensor concat_cols(const std::vector<Tensor>& parts);  // same row count
Tensor concat_rows(const std::vector<Tensor>& parts);  // same col count
Tensor slice_cols(const Tensor& a, std::int64_t j0, std::int64_t j1);
Tensor gather_rows(const Tensor& a, const std::vector<int>& idx);
// out[idx[i], :] += src[i, :]; out has out_rows rows.
Tensor scatter_add_rows(const Tensor& src, const std::vector<int>& idx,
                        std::int64_t out_rows);
Tensor colmax(const Tensor& a);  // [n x m] -> [1 x m], grad to first argmax
Tensor colmin(const Tensor& a);
Tensor repeat_rows(const Tensor& a, std::int64_t n);  // [1 x m] -> [n x m]
// rows of a scaled by the column tensor s [n x 1]; grads flow to both.
Tensor rowscale(const Tensor& a, const Tensor& s);
Tensor reshape(const Tensor& a, std::vector<std::int64_t> shape);
// out[i, :] = a[i, :] except out[rows[k], :] = b[k, :].
Tensor replace_rows(const Tensor& a, const std::vector<int>& rows, const Tensor& b);
// Custom scalar function with analytic derivative, applied elementwise.
Tensor map_unary(const Tensor& a, double (*f)(double), double (*df)(double));

}  // namespace pgnd::tg
