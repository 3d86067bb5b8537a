#include "unc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace unc {

namespace {

thread_local bool g_grad_enabled = true;
thread_local bool g_debug_checks = false;

// C[m,n] += A[m,k] @ B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = arow[l];
      if (av == 0.0) continue;
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] @ B^T, with B stored as [n,k]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += arow[l] * brow[l];
      crow[j] += s;
    }
  }
}

// C[m,n] += A^T @ B, with A stored as [k,m], B as [k,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  for (std::size_t l = 0; l < k; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

bool any_requires_grad(const std::vector<Tensor>& parents) {
  for (const auto& p : parents) {
    if (p.requires_grad()) return true;
  }
  return false;
}

void ensure_grad_buffer(TensorImpl& node) {
  if (node.grad.size() != node.data.size()) node.grad.assign(node.data.size(), 0.0);
}

[[noreturn]] void throw_shape(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a) +
                   " vs " + shape_to_string(b));
}

struct Conv2dDims {
  std::size_t n, c, h, w, oc, kh, kw, ho, wo;
  int stride, pad;
};

Conv2dDims conv2d_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.ndim() != 4) {
    throw ShapeError("conv2d: input must be NCHW, got " + shape_to_string(x.shape()));
  }
  if (w.ndim() != 4) {
    throw ShapeError("conv2d: weight must be OIHW, got " + shape_to_string(w.shape()));
  }
  if (x.shape()[1] != w.shape()[1]) throw_shape("conv2d channels", x.shape(), w.shape());
  if (stride < 1 || pad < 0) throw ValueError("conv2d: stride must be >= 1 and pad >= 0");
  Conv2dDims d;
  d.n = x.shape()[0];
  d.c = x.shape()[1];
  d.h = x.shape()[2];
  d.w = x.shape()[3];
  d.oc = w.shape()[0];
  d.kh = w.shape()[2];
  d.kw = w.shape()[3];
  d.stride = stride;
  d.pad = pad;
  const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(d.h) + 2 * pad - static_cast<std::ptrdiff_t>(d.kh);
  const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(d.w) + 2 * pad - static_cast<std::ptrdiff_t>(d.kw);
  if (hh < 0 || ww < 0) {
    throw ShapeError("conv2d: kernel larger than padded input, " + shape_to_string(x.shape()) +
                     " vs " + shape_to_string(w.shape()));
  }
  d.ho = static_cast<std::size_t>(hh) / stride + 1;
  d.wo = static_cast<std::size_t>(ww) / stride + 1;
  return d;
}

// Expands one NCHW sample into [C*kh*kw, Ho*Wo] patch columns.
void im2col(const double* x, const Conv2dDims& d, double* cols) {
  const std::size_t spatial = d.ho * d.wo;
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        double* row = cols + ((c * d.kh + ki) * d.kw + kj) * spatial;
        for (std::size_t oi = 0; oi < d.ho; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * d.stride + ki) - d.pad;
          for (std::size_t oj = 0; oj < d.wo; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * d.stride + kj) - d.pad;
            double v = 0.0;
            if (ii >= 0 && ii < static_cast<std::ptrdiff_t>(d.h) && jj >= 0 &&
                jj < static_cast<std::ptrdiff_t>(d.w)) {
              v = x[(c * d.h + ii) * d.w + jj];
            }
            row[oi * d.wo + oj] = v;
          }
        }
      }
    }
  }
}

// Scatters [C*kh*kw, Ho*Wo] patch-column gradients back into one sample.
void col2im_acc(const double* cols, const Conv2dDims& d, double* dx) {
  for (std::size_t c = 0; c < d.c; ++c) {
    for (std::size_t ki = 0; ki < d.kh; ++ki) {
      for (std::size_t kj = 0; kj < d.kw; ++kj) {
        const double* row = cols + ((c * d.kh + ki) * d.kw + kj) * d.ho * d.wo;
        for (std::size_t oi = 0; oi < d.ho; ++oi) {
          const std::ptrdiff_t ii = static_cast<std::ptrdiff_t>(oi * d.stride + ki) - d.pad;
          if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t oj = 0; oj < d.wo; ++oj) {
            const std::ptrdiff_t jj = static_cast<std::ptrdiff_t>(oj * d.stride + kj) - d.pad;
            if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(d.w)) continue;
            dx[(c * d.h + ii) * d.w + jj] += row[oi * d.wo + oj];
          }
        }
      }
    }
  }
}

Tensor unary_elementwise(const Tensor& a, const char* name,
                         const std::function<double(double)>& f,
                         const std::function<double(double /*x*/, double /*y*/)>& dfdx) {
  if (debug_checks()) assert_all_finite(a, name);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.at(i));
  return make_op_result(a.shape(), std::move(out), {a}, [a, dfdx](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& ag = a.impl()->grad;
    for (std::size_t i = 0; i < o.data.size(); ++i) {
      ag[i] += o.grad[i] * dfdx(a.at(i), o.data[i]);
    }
  });
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks() { return g_debug_checks; }

void assert_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw_shape(op, a.shape(), b.shape());
}

void assert_all_finite(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) {
      throw ValueError(std::string(what) + ": non-finite value detected");
    }
  }
}

Tensor make_op_result(Shape shape, std::vector<double> values,
                      std::vector<Tensor> parents,
                      std::function<void(TensorImpl&)> backward_fn) {
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  if (grad_enabled() && any_requires_grad(parents)) {
    t.impl_->requires_grad = true;
    t.impl_->parents = std::move(parents);
    t.impl_->backward_fn = std::move(backward_fn);
  }
  return t;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from_vector(std::move(shape), {}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> v(shape_numel(shape), value);
  return from_vector(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::from_vector(Shape shape, std::vector<double> values, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  if (values.empty()) values.assign(n, 0.0);
  if (values.size() != n) {
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({1}, {value}, requires_grad);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return from_vector(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, Rng& rng, bool requires_grad) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(mean, stddev);
  return from_vector(std::move(shape), std::move(v), requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ValueError("item: tensor is not scalar, shape " + shape_to_string(shape()));
  }
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  return from_vector(impl_->shape, impl_->data, false);
}

Tensor Tensor::clone(bool requires_grad) const {
  return from_vector(impl_->shape, impl_->data, requires_grad);
}

bool GradientMap::contains(const Tensor& leaf) const {
  return grads_.count(leaf.impl()) != 0;
}

const Tensor& GradientMap::at(const Tensor& leaf) const {
  auto it = grads_.find(leaf.impl());
  if (it == grads_.end()) {
    throw ValueError("GradientMap: no gradient recorded for this tensor");
  }
  return it->second;
}

void GradientMap::insert(const TensorImpl* key, Tensor grad) {
  grads_.emplace(key, std::move(grad));
}

GradientMap backward(const Tensor& loss, bool accumulate) {
  if (!loss.defined()) throw ValueError("backward: undefined tensor");
  if (loss.numel() != 1) {
    throw ValueError("backward: loss must be scalar, got shape " + shape_to_string(loss.shape()));
  }
  if (!loss.requires_grad()) {
    throw ValueError("backward: loss does not depend on any requires_grad leaf");
  }

  // Postorder over the requires_grad subgraph (parents before consumers).
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> seen;
  struct Frame {
    TensorImpl* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{loss.impl(), 0}};
  seen.insert(loss.impl());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next++].impl();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  for (TensorImpl* node : order) {
    const bool is_leaf = node->parents.empty() && !node->backward_fn;
    if (is_leaf && accumulate && node->grad.size() == node->data.size()) continue;
    node->grad.assign(node->data.size(), 0.0);
  }
  loss.impl()->grad[0] = 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn) node->backward_fn(*node);
  }

  GradientMap map;
  for (TensorImpl* node : order) {
    if (node->parents.empty() && !node->backward_fn) {
      map.insert(node, Tensor::from_vector(node->shape, node->grad, false));
    }
  }
  return map;
}

// ---- elementwise binary ---------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  assert_same_shape(a, b, "add");
  if (debug_checks()) {
    assert_all_finite(a, "add");
    assert_all_finite(b, "add");
  }
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + b.at(i);
  return make_op_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& o) {
    if (a.requires_grad()) {
      ensure_grad_buffer(*a.impl());
      auto& g = a.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (b.requires_grad()) {
      ensure_grad_buffer(*b.impl());
      auto& g = b.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  assert_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) - b.at(i);
  return make_op_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& o) {
    if (a.requires_grad()) {
      ensure_grad_buffer(*a.impl());
      auto& g = a.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (b.requires_grad()) {
      ensure_grad_buffer(*b.impl());
      auto& g = b.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  assert_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * b.at(i);
  return make_op_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& o) {
    if (a.requires_grad()) {
      ensure_grad_buffer(*a.impl());
      auto& g = a.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * b.at(i);
    }
    if (b.requires_grad()) {
      ensure_grad_buffer(*b.impl());
      auto& g = b.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * a.at(i);
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  assert_same_shape(a, b, "div");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) / b.at(i);
  return make_op_result(a.shape(), std::move(out), {a, b}, [a, b](TensorImpl& o) {
    if (a.requires_grad()) {
      ensure_grad_buffer(*a.impl());
      auto& g = a.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] / b.at(i);
    }
    if (b.requires_grad()) {
      ensure_grad_buffer(*b.impl());
      auto& g = b.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double bv = b.at(i);
        g[i] -= o.grad[i] * a.at(i) / (bv * bv);
      }
    }
  });
}

// ---- scalar broadcast ------------------------------------------------------

Tensor add(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) + s;
  return make_op_result(a.shape(), std::move(out), {a}, [a](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor sub(const Tensor& a, double s) { return add(a, -s); }

Tensor sub(double s, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s - a.at(i);
  return make_op_result(a.shape(), std::move(out), {a}, [a](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] -= o.grad[i];
  });
}

Tensor mul(const Tensor& a, double s) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.at(i) * s;
  return make_op_result(a.shape(), std::move(out), {a}, [a, s](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i] * s;
  });
}

Tensor div(const Tensor& a, double s) { return mul(a, 1.0 / s); }

Tensor div(double s, const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s / a.at(i);
  return make_op_result(a.shape(), std::move(out), {a}, [a, s](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      const double av = a.at(i);
      g[i] -= o.grad[i] * s / (av * av);
    }
  });
}

Tensor neg(const Tensor& a) { return mul(a, -1.0); }

// ---- linear algebra --------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0]) {
    throw_shape("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  return make_op_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](TensorImpl& o) {
    if (a.requires_grad()) {
      ensure_grad_buffer(*a.impl());
      gemm_nt(o.grad.data(), b.data().data(), a.impl()->grad.data(), m, n, k);
    }
    if (b.requires_grad()) {
      ensure_grad_buffer(*b.impl());
      gemm_tn(a.data().data(), o.grad.data(), b.impl()->grad.data(), k, m, n);
    }
  });
}

Tensor add_rowwise(const Tensor& mat, const Tensor& vec) {
  if (mat.ndim() != 2 || vec.ndim() != 1 || mat.shape()[1] != vec.shape()[0]) {
    throw_shape("add_rowwise", mat.shape(), vec.shape());
  }
  const std::size_t m = mat.shape()[0], n = mat.shape()[1];
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = mat.at(i * n + j) + vec.at(j);
  }
  return make_op_result({m, n}, std::move(out), {mat, vec}, [mat, vec, m, n](TensorImpl& o) {
    if (mat.requires_grad()) {
      ensure_grad_buffer(*mat.impl());
      auto& g = mat.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) g[i] += o.grad[i];
    }
    if (vec.requires_grad()) {
      ensure_grad_buffer(*vec.impl());
      auto& g = vec.impl()->grad;
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) g[j] += o.grad[i * n + j];
      }
    }
  });
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
  const Conv2dDims d = conv2d_dims(x, w, stride, pad);
  if (b.ndim() != 1 || b.shape()[0] != d.oc) throw_shape("conv2d bias", w.shape(), b.shape());
  const std::size_t ckk = d.c * d.kh * d.kw;
  const std::size_t spatial = d.ho * d.wo;
  std::vector<double> cols(ckk * spatial);
  std::vector<double> out(d.n * d.oc * spatial, 0.0);
  for (std::size_t nn = 0; nn < d.n; ++nn) {
    im2col(x.data().data() + nn * d.c * d.h * d.w, d, cols.data());
    double* on = out.data() + nn * d.oc * spatial;
    gemm_nn(w.data().data(), cols.data(), on, d.oc, ckk, spatial);
    for (std::size_t o = 0; o < d.oc; ++o) {
      const double bv = b.at(o);
      for (std::size_t s = 0; s < spatial; ++s) on[o * spatial + s] += bv;
    }
  }
  return make_op_result({d.n, d.oc, d.ho, d.wo}, std::move(out), {x, w, b},
                        [x, w, b, d, ckk, spatial](TensorImpl& o) {
    std::vector<double> cols(ckk * spatial);
    std::vector<double> dcols(ckk * spatial);
    if (x.requires_grad()) ensure_grad_buffer(*x.impl());
    if (w.requires_grad()) ensure_grad_buffer(*w.impl());
    if (b.requires_grad()) ensure_grad_buffer(*b.impl());
    for (std::size_t nn = 0; nn < d.n; ++nn) {
      const double* go = o.grad.data() + nn * d.oc * spatial;
      if (b.requires_grad()) {
        auto& g = b.impl()->grad;
        for (std::size_t oc = 0; oc < d.oc; ++oc) {
          double s = 0.0;
          for (std::size_t sp = 0; sp < spatial; ++sp) s += go[oc * spatial + sp];
          g[oc] += s;
        }
      }
      if (w.requires_grad() || x.requires_grad()) {
        im2col(x.data().data() + nn * d.c * d.h * d.w, d, cols.data());
      }
      if (w.requires_grad()) {
        gemm_nt(go, cols.data(), w.impl()->grad.data(), d.oc, spatial, ckk);
      }
      if (x.requires_grad()) {
        std::fill(dcols.begin(), dcols.end(), 0.0);
        gemm_tn(w.data().data(), go, dcols.data(), ckk, d.oc, spatial);
        col2im_acc(dcols.data(), d, x.impl()->grad.data() + nn * d.c * d.h * d.w);
      }
    }
  });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& w, const Tensor& b, int stride) {
  if (x.ndim() != 4 || w.ndim() != 4 || x.shape()[1] != w.shape()[0]) {
    throw_shape("conv2d_transpose", x.shape(), w.shape());
  }
  if (stride < 1) throw ValueError("conv2d_transpose: stride must be >= 1");
  const std::size_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], ww = x.shape()[3];
  const std::size_t oc = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  if (b.ndim() != 1 || b.shape()[0] != oc) throw_shape("conv2d_transpose bias", w.shape(), b.shape());
  const std::size_t ho = (h - 1) * stride + kh;
  const std::size_t wo = (ww - 1) * stride + kw;
  std::vector<double> out(n * oc * ho * wo, 0.0);
  for (std::size_t nn = 0; nn < n; ++nn) {
    for (std::size_t ci = 0; ci < c; ++ci) {
      const double* xn = x.data().data() + (nn * c + ci) * h * ww;
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < ww; ++j) {
          const double v = xn[i * ww + j];
          if (v == 0.0) continue;
          for (std::size_t o = 0; o < oc; ++o) {
            const double* wk = w.data().data() + ((ci * oc + o) * kh) * kw;
            double* on = out.data() + ((nn * oc + o) * ho + i * stride) * wo + j * stride;
            for (std::size_t ki = 0; ki < kh; ++ki) {
              for (std::size_t kj = 0; kj < kw; ++kj) {
                on[ki * wo + kj] += v * wk[ki * kw + kj];
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t nn = 0; nn < n; ++nn) {
    for (std::size_t o = 0; o < oc; ++o) {
      double* on = out.data() + (nn * oc + o) * ho * wo;
      const double bv = b.at(o);
      for (std::size_t s = 0; s < ho * wo; ++s) on[s] += bv;
    }
  }
  return make_op_result({n, oc, ho, wo}, std::move(out), {x, w, b},
                        [x, w, b, n, c, h, ww, oc, kh, kw, ho, wo, stride](TensorImpl& o) {
    if (x.requires_grad()) ensure_grad_buffer(*x.impl());
    if (w.requires_grad()) ensure_grad_buffer(*w.impl());
    if (b.requires_grad()) ensure_grad_buffer(*b.impl());
    if (b.requires_grad()) {
      auto& g = b.impl()->grad;
      for (std::size_t nn = 0; nn < n; ++nn) {
        for (std::size_t oi = 0; oi < oc; ++oi) {
          const double* go = o.grad.data() + (nn * oc + oi) * ho * wo;
          double s = 0.0;
          for (std::size_t sp = 0; sp < ho * wo; ++sp) s += go[sp];
          g[oi] += s;
        }
      }
    }
    for (std::size_t nn = 0; nn < n; ++nn) {
      for (std::size_t ci = 0; ci < c; ++ci) {
        const double* xn = x.data().data() + (nn * c + ci) * h * ww;
        double* dxn = x.requires_grad() ? x.impl()->grad.data() + (nn * c + ci) * h * ww : nullptr;
        for (std::size_t i = 0; i < h; ++i) {
          for (std::size_t j = 0; j < ww; ++j) {
            for (std::size_t oi = 0; oi < oc; ++oi) {
              const double* go = o.grad.data() + ((nn * oc + oi) * ho + i * stride) * wo + j * stride;
              const double* wk = w.data().data() + ((ci * oc + oi) * kh) * kw;
              double* dwk = w.requires_grad() ? w.impl()->grad.data() + ((ci * oc + oi) * kh) * kw : nullptr;
              double dx_acc = 0.0;
              for (std::size_t ki = 0; ki < kh; ++ki) {
                for (std::size_t kj = 0; kj < kw; ++kj) {
                  const double g = go[ki * wo + kj];
                  dx_acc += g * wk[ki * kw + kj];
                  if (dwk) dwk[ki * kw + kj] += g * xn[i * ww + j];
                }
              }
              if (dxn) dxn[i * ww + j] += dx_acc;
            }
          }
        }
      }
    }
  });
}

// ---- activations -----------------------------------------------------------

Tensor relu(const Tensor& a) {
  return unary_elementwise(a, "relu",
                           [](double x) { return x > 0.0 ? x : 0.0; },
                           [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary_elementwise(a, "tanh",
                           [](double x) { return std::tanh(x); },
                           [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_elementwise(a, "sigmoid",
                           [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                           [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  auto f = [](double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
  };
  return unary_elementwise(a, "softplus", f, [](double x, double) {
    return 1.0 / (1.0 + std::exp(-x));
  });
}

Tensor exp(const Tensor& a) {
  return unary_elementwise(a, "exp",
                           [](double x) { return std::exp(x); },
                           [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_elementwise(a, "log",
                           [](double x) { return std::log(x); },
                           [](double x, double) { return 1.0 / x; });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make_op_result({1}, {s}, {a}, [a](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.numel() == 0) throw ValueError("mean: empty tensor");
  return div(sum(a), static_cast<double>(a.numel()));
}

Tensor sum_lastdim(const Tensor& a) {
  if (a.ndim() < 2) {
    throw ShapeError("sum_lastdim: needs rank >= 2, got " + shape_to_string(a.shape()));
  }
  const std::size_t k = a.shape().back();
  const std::size_t rows = a.numel() / k;
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  std::vector<double> out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += a.at(r * k + j);
    out[r] = s;
  }
  return make_op_result(std::move(out_shape), std::move(out), {a}, [a, rows, k](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += o.grad[r];
    }
  });
}

// ---- shape ops -------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                     shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make_op_result(std::move(shape), std::move(out), {a}, [a](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ValueError("concat: empty part list");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(first));
  }
  Shape out_shape = first;
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    if (p.ndim() != first.size()) throw_shape("concat", first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d]) throw_shape("concat", first, p.shape());
    }
    axis_total += p.shape()[axis];
  }
  out_shape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  std::vector<double> out(shape_numel(out_shape));
  const std::size_t out_stride = axis_total * inner;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    for (std::size_t b = 0; b < outer; ++b) {
      std::copy_n(p.data().data() + b * chunk, chunk, out.data() + b * out_stride + offset);
    }
    offset += chunk;
  }

  std::vector<Tensor> parents = parts;
  return make_op_result(std::move(out_shape), std::move(out), std::move(parents),
                        [parts, axis, outer, inner, out_stride](TensorImpl& o) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      const std::size_t chunk = p.shape()[axis] * inner;
      if (p.requires_grad()) {
        ensure_grad_buffer(*p.impl());
        auto& g = p.impl()->grad;
        for (std::size_t b = 0; b < outer; ++b) {
          const double* src = o.grad.data() + b * out_stride + offset;
          double* dst = g.data() + b * chunk;
          for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
        }
      }
      offset += chunk;
    }
  });
}

// ---- softmax family ---------------------------------------------------------

Tensor softmax_lastdim(const Tensor& a) {
  if (a.ndim() < 1) throw ShapeError("softmax: empty shape");
  const std::size_t k = a.shape().back();
  const std::size_t rows = a.numel() / k;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = a.data().data() + r * k;
    double* po = out.data() + r * k;
    double mx = in[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      po[j] = std::exp(in[j] - mx);
      z += po[j];
    }
    for (std::size_t j = 0; j < k; ++j) po[j] /= z;
  }
  return make_op_result(a.shape(), std::move(out), {a}, [a, rows, k](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* p = o.data.data() + r * k;
      const double* go = o.grad.data() + r * k;
      double dot = 0.0;
      for (std::size_t j = 0; j < k; ++j) dot += go[j] * p[j];
      for (std::size_t j = 0; j < k; ++j) g[r * k + j] += p[j] * (go[j] - dot);
    }
  });
}

Tensor log_softmax_lastdim(const Tensor& a) {
  if (a.ndim() < 1) throw ShapeError("log_softmax: empty shape");
  const std::size_t k = a.shape().back();
  const std::size_t rows = a.numel() / k;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = a.data().data() + r * k;
    double* po = out.data() + r * k;
    double mx = in[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, in[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(in[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) po[j] = in[j] - lse;
  }
  return make_op_result(a.shape(), std::move(out), {a}, [a, rows, k](TensorImpl& o) {
    if (!a.requires_grad()) return;
    ensure_grad_buffer(*a.impl());
    auto& g = a.impl()->grad;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* lp = o.data.data() + r * k;
      const double* go = o.grad.data() + r * k;
      double gsum = 0.0;
      for (std::size_t j = 0; j < k; ++j) gsum += go[j];
      for (std::size_t j = 0; j < k; ++j) {
        g[r * k + j] += go[j] - std::exp(lp[j]) * gsum;
      }
    }
  });
}

// ---- indexing / clamping -----------------------------------------------------

Tensor pick_per_row(const Tensor& t, const std::vector<int>& labels) {
  if (t.ndim() != 2) throw ShapeError("pick_per_row: needs [N,K], got " + shape_to_string(t.shape()));
  const std::size_t n = t.shape()[0], k = t.shape()[1];
  if (labels.size() != n) {
    throw ShapeError("pick_per_row: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(n) + " rows");
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) {
      throw ValueError("pick_per_row: label " + std::to_string(labels[i]) + " out of range [0, " +
                       std::to_string(k) + ")");
    }
    out[i] = t.at(i * k + labels[i]);
  }
  return make_op_result({n}, std::move(out), {t}, [t, labels, k](TensorImpl& o) {
    if (!t.requires_grad()) return;
    ensure_grad_buffer(*t.impl());
    auto& g = t.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i * k + labels[i]] += o.grad[i];
  });
}

Tensor rowmax(const Tensor& t) {
  if (t.ndim() != 2) throw ShapeError("rowmax: needs [N,K], got " + shape_to_string(t.shape()));
  const std::size_t n = t.shape()[0], k = t.shape()[1];
  std::vector<double> out(n);
  std::vector<std::size_t> arg(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = t.data().data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = row[best];
    arg[i] = best;
  }
  return make_op_result({n}, std::move(out), {t}, [t, arg, k](TensorImpl& o) {
    if (!t.requires_grad()) return;
    ensure_grad_buffer(*t.impl());
    auto& g = t.impl()->grad;
    for (std::size_t i = 0; i < o.grad.size(); ++i) g[i * k + arg[i]] += o.grad[i];
  });
}

Tensor clamp_min(const Tensor& t, double floor) {
  return unary_elementwise(t, "clamp_min",
                           [floor](double x) { return x > floor ? x : floor; },
                           [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  if (lo > hi) throw ValueError("clamp: lo > hi");
  return unary_elementwise(t, "clamp",
                           [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
                           [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor select_by_mask(const Tensor& gate, const Tensor& perturbed, const Tensor& x) {
  assert_same_shape(gate, perturbed, "select_by_mask");
  assert_same_shape(gate, x, "select_by_mask");
  std::vector<double> out(gate.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = gate.at(i) >= 0.5 ? perturbed.at(i) : x.at(i);
  }
  return make_op_result(gate.shape(), std::move(out), {perturbed, x},
                        [gate, perturbed, x](TensorImpl& o) {
    if (perturbed.requires_grad()) {
      ensure_grad_buffer(*perturbed.impl());
      auto& g = perturbed.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (gate.at(i) >= 0.5) g[i] += o.grad[i];
      }
    }
    if (x.requires_grad()) {
      ensure_grad_buffer(*x.impl());
      auto& g = x.impl()->grad;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        if (gate.at(i) < 0.5) g[i] += o.grad[i];
      }
    }
  });
}

Tensor recolor_interp(const Tensor& x, const Tensor& grid) {
  if (x.ndim() != 4 || x.shape()[1] != 3) {
    throw ValueError("recolor_interp: input must be [N,3,H,W], got " + shape_to_string(x.shape()));
  }
  if (grid.ndim() != 4 || grid.shape()[0] != grid.shape()[1] ||
      grid.shape()[1] != grid.shape()[2] || grid.shape()[3] != 3 || grid.shape()[0] < 2) {
    throw ShapeError("recolor_interp: grid must be [G,G,G,3] with G >= 2, got " +
                     shape_to_string(grid.shape()));
  }
  const std::size_t n = x.shape()[0], h = x.shape()[2], w = x.shape()[3];
  const std::size_t g = grid.shape()[0];
  const std::size_t plane = h * w;
  const double scale = static_cast<double>(g - 1);

  // Per-pixel corner indices/weights depend only on x; shared by fwd/bwd.
  auto corner = [&](double v, std::size_t& i0, double& f) {
    const double t = std::min(std::max(v, 0.0), 1.0) * scale;
    i0 = std::min(static_cast<std::size_t>(t), g - 2);
    f = t - static_cast<double>(i0);
  };

  std::vector<double> out(x.numel());
  for (std::size_t nn = 0; nn < n; ++nn) {
    const double* xr = x.data().data() + (nn * 3 + 0) * plane;
    const double* xg = x.data().data() + (nn * 3 + 1) * plane;
    const double* xb = x.data().data() + (nn * 3 + 2) * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t i0, j0, k0;
      double fr, fg, fb;
      corner(xr[p], i0, fr);
      corner(xg[p], j0, fg);
      corner(xb[p], k0, fb);
      double disp[3] = {0.0, 0.0, 0.0};
      for (int di = 0; di < 2; ++di) {
        const double wi = di ? fr : 1.0 - fr;
        for (int dj = 0; dj < 2; ++dj) {
          const double wj = dj ? fg : 1.0 - fg;
          for (int dk = 0; dk < 2; ++dk) {
            const double wk = dk ? fb : 1.0 - fb;
            const double wgt = wi * wj * wk;
            const double* v = grid.data().data() + (((i0 + di) * g + (j0 + dj)) * g + (k0 + dk)) * 3;
            disp[0] += wgt * v[0];
            disp[1] += wgt * v[1];
            disp[2] += wgt * v[2];
          }
        }
      }
      // Keep the recomputed difference within the interpolated displacement
      // (the addition itself may round half an ulp outward).
      const double* xs[3] = {xr, xg, xb};
      for (int c = 0; c < 3; ++c) {
        double v = xs[c][p] + disp[c];
        while (std::abs(v - xs[c][p]) > std::abs(disp[c])) v = std::nextafter(v, xs[c][p]);
        out[(nn * 3 + c) * plane + p] = v;
      }
    }
  }
  return make_op_result(x.shape(), std::move(out), {grid}, [x, grid, n, plane, g, scale](TensorImpl& o) {
    if (!grid.requires_grad()) return;
    ensure_grad_buffer(*grid.impl());
    auto& gg = grid.impl()->grad;
    auto corner = [&](double v, std::size_t& i0, double& f) {
      const double t = std::min(std::max(v, 0.0), 1.0) * scale;
      i0 = std::min(static_cast<std::size_t>(t), g - 2);
      f = t - static_cast<double>(i0);
    };
    for (std::size_t nn = 0; nn < n; ++nn) {
      const double* xr = x.data().data() + (nn * 3 + 0) * plane;
      const double* xg = x.data().data() + (nn * 3 + 1) * plane;
      const double* xb = x.data().data() + (nn * 3 + 2) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        std::size_t i0, j0, k0;
        double fr, fg, fb;
        corner(xr[p], i0, fr);
        corner(xg[p], j0, fg);
        corner(xb[p], k0, fb);
        const double go[3] = {o.grad[(nn * 3 + 0) * plane + p],
                              o.grad[(nn * 3 + 1) * plane + p],
                              o.grad[(nn * 3 + 2) * plane + p]};
        for (int di = 0; di < 2; ++di) {
          const double wi = di ? fr : 1.0 - fr;
          for (int dj = 0; dj < 2; ++dj) {
            const double wj = dj ? fg : 1.0 - fg;
            for (int dk = 0; dk < 2; ++dk) {
              const double wk = dk ? fb : 1.0 - fb;
              const double wgt = wi * wj * wk;
              double* v = gg.data() + (((i0 + di) * g + (j0 + dj)) * g + (k0 + dk)) * 3;
              v[0] += wgt * go[0];
              v[1] += wgt * go[1];
              v[2] += wgt * go[2];
            }
          }
        }
      }
    }
  });
}

}  // namespace unc
