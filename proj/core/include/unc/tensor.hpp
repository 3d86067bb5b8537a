#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "unc/errors.hpp"
#include "unc/rng.hpp"

namespace unc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class Tensor;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // sized on first backward pass
  // Tape: parents plus a closure that scatters this node's grad into them.
  // Both are empty for leaves.
  std::vector<Tensor> parents;
  std::function<void(TensorImpl&)> backward_fn;

  std::size_t numel() const { return data.size(); }
};

// Dense 64-bit tensor handle with reverse-mode autodiff. Copies share the
// underlying node; use clone() for an independent leaf.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_vector(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);
  static Tensor normal(Shape shape, double mean, double stddev, Rng& rng,
                       bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->data.size(); }
  std::size_t ndim() const { return impl_->shape.size(); }
  bool requires_grad() const { return impl_->requires_grad; }

  std::span<double> data() { return impl_->data; }
  std::span<const double> data() const { return impl_->data; }
  double at(std::size_t i) const { return impl_->data[i]; }
  double item() const;  // scalar tensors only

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  std::span<double> grad_mut() { return impl_->grad; }
  void zero_grad();

  bool is_leaf() const { return impl_->parents.empty() && !impl_->backward_fn; }

  // Deep copy, detached from any tape. Keeps values, drops history.
  Tensor detach() const;
  // Deep copy as a fresh leaf with the given requires_grad flag.
  Tensor clone(bool requires_grad) const;

  TensorImpl* impl() const { return impl_.get(); }

  friend Tensor make_op_result(Shape shape, std::vector<double> values,
                               std::vector<Tensor> parents,
                               std::function<void(TensorImpl&)> backward_fn);

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Builds an op output node: forward values plus the tape entry. When grad
// mode is off or no parent participates, the result is a plain constant.
Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn);

// Thread-local gradient mode. Ops built while disabled record no tape.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Gradients of the leaves reachable from a loss, keyed by leaf identity.
class GradientMap {
 public:
  bool contains(const Tensor& leaf) const;
  // Gradient tensor for a leaf; throws ValueError if absent.
  const Tensor& at(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

  void insert(const TensorImpl* key, Tensor grad);

 private:
  std::unordered_map<const TensorImpl*, Tensor> grads_;
};

// Reverse-mode sweep from a scalar loss. Gradients are written into the
// reachable nodes' buffers and the leaf gradients are returned. Repeated
// calls recompute from scratch (idempotent) unless accumulate is set.
GradientMap backward(const Tensor& loss, bool accumulate = false);

// ---- forward vocabulary -------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor sub(double s, const Tensor& a);
Tensor mul(const Tensor& a, double s);
Tensor div(const Tensor& a, double s);
Tensor div(double s, const Tensor& a);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return sub(s, a); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

Tensor matmul(const Tensor& a, const Tensor& b);  // [m,k] x [k,n]
// Adds a length-n vector to every row of an [m,n] matrix.
Tensor add_rowwise(const Tensor& mat, const Tensor& vec);

// 2-D convolution over NCHW input, OIHW weights, per-output-channel bias.
// Implemented as im2col + matmul.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
              int pad);
// Transposed 2-D convolution (stride-s upsampling); weights IOHW, pad 0.
Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b,
                        int stride);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);

Tensor sum(const Tensor& a);   // full reduction to scalar
Tensor mean(const Tensor& a);  // full reduction to scalar
// Sums over the last axis: [..., K] -> [...].
Tensor sum_lastdim(const Tensor& a);

Tensor reshape(const Tensor& a, Shape shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);

Tensor softmax_lastdim(const Tensor& a);
Tensor log_softmax_lastdim(const Tensor& a);

// out[i] = t[i, labels[i]] for an [N, K] tensor.
Tensor pick_per_row(const Tensor& t, const std::vector<int>& labels);
// Row-wise maximum of an [N, K] tensor (subgradient to the first argmax).
Tensor rowmax(const Tensor& t);
// max(t, floor) elementwise; gradient passes where t > floor.
Tensor clamp_min(const Tensor& t, double floor);
// clamp to [lo, hi]; gradient passes strictly inside the interval.
Tensor clamp(const Tensor& t, double lo, double hi);

// out_i = perturbed_i where gate_i == 1, x_i otherwise (exact copies).
// The gate is treated as a constant; gradients flow to both branches.
Tensor select_by_mask(const Tensor& gate, const Tensor& perturbed,
                      const Tensor& x);

// Per-pixel color displacement by trilinear interpolation of a
// [G, G, G, 3] vertex grid over the RGB cube. Input is a constant
// [N, 3, H, W] image batch; gradients flow to the grid only.
Tensor recolor_interp(const Tensor& x, const Tensor& grid);

void assert_same_shape(const Tensor& a, const Tensor& b, const char* op);
void assert_all_finite(const Tensor& t, const char* what);

// Debug flag: when set, every op checks its inputs for NaN/Inf.
void set_debug_checks(bool enabled);
bool debug_checks();

}  // namespace unc
