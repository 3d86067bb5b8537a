#include "unc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

// Shape of one sample (no batch dim) traced through the layer stack.
// Dense layers require a prior flatten; the trace is rank-1 afterwards.
std::vector<Shape> trace_shapes(const std::vector<LayerSpec>& specs, const Shape& input) {
  std::vector<Shape> trace;
  trace.push_back(input);
  Shape cur = input;
  for (std::size_t li = 0; li < specs.size(); ++li) {
    const LayerSpec& s = specs[li];
    switch (s.kind) {
      case LayerKind::conv2d: {
        if (cur.size() != 3 || cur[0] != s.in_channels) {
          throw ShapeError("layer " + std::to_string(li) + " conv2d expects " +
                           std::to_string(s.in_channels) + " channels, trace is " +
                           shape_to_string(cur));
        }
        const std::ptrdiff_t hh = static_cast<std::ptrdiff_t>(cur[1]) + 2 * s.pad -
                                  static_cast<std::ptrdiff_t>(s.kernel);
        const std::ptrdiff_t ww = static_cast<std::ptrdiff_t>(cur[2]) + 2 * s.pad -
                                  static_cast<std::ptrdiff_t>(s.kernel);
        if (hh < 0 || ww < 0) {
          throw ShapeError("layer " + std::to_string(li) + " conv2d kernel too large for " +
                           shape_to_string(cur));
        }
        cur = {s.out_channels, static_cast<std::size_t>(hh) / s.stride + 1,
               static_cast<std::size_t>(ww) / s.stride + 1};
        break;
      }
      case LayerKind::dense:
        if (cur.size() != 1 || cur[0] != s.in_dim) {
          throw ShapeError("layer " + std::to_string(li) + " dense expects [" +
                           std::to_string(s.in_dim) + "], trace is " + shape_to_string(cur));
        }
        cur = {s.out_dim};
        break;
      case LayerKind::flatten:
        cur = {shape_numel(cur)};
        break;
      case LayerKind::relu:
      case LayerKind::tanh_act:
      case LayerKind::dropout:
        break;
    }
    trace.push_back(cur);
  }
  return trace;
}

Tensor glorot_init(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), -limit, limit, rng, true);
}

Tensor flatten_batch(const Tensor& x) {
  return reshape(x, {x.shape()[0], x.numel() / x.shape()[0]});
}

// Inverted-dropout keep mask: 0 or 1/(1-rate).
Tensor dropout_mask(const Shape& shape, double rate, Rng& rng) {
  std::vector<double> m(shape_numel(shape));
  const double scale = 1.0 / (1.0 - rate);
  for (auto& v : m) v = rng.uniform() < rate ? 0.0 : scale;
  return Tensor::from_vector(shape, std::move(m));
}

double batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  const std::size_t n = logits.shape()[0], k = logits.shape()[1];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (static_cast<int>(best) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t count,
                                                    std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < count; start += batch_size) {
    const std::size_t end = std::min(count, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace

LayerSpec LayerSpec::Dense(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw ValueError("dense: zero dimension");
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in_dim = in;
  s.out_dim = out;
  return s;
}

LayerSpec LayerSpec::Conv2d(std::size_t in_c, std::size_t out_c, std::size_t kernel,
                            int stride, int pad) {
  if (in_c == 0 || out_c == 0 || kernel == 0) throw ValueError("conv2d: zero dimension");
  if (stride < 1 || pad < 0) throw ValueError("conv2d: bad stride/pad");
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.in_channels = in_c;
  s.out_channels = out_c;
  s.kernel = kernel;
  s.stride = stride;
  s.pad = pad;
  return s;
}

LayerSpec LayerSpec::Relu() {
  LayerSpec s;
  s.kind = LayerKind::relu;
  return s;
}

LayerSpec LayerSpec::Tanh() {
  LayerSpec s;
  s.kind = LayerKind::tanh_act;
  return s;
}

LayerSpec LayerSpec::Dropout(double rate) {
  if (!(rate > 0.0 && rate < 1.0)) {
    throw ValueError("dropout: rate must lie strictly inside (0,1), got " +
                     std::to_string(rate));
  }
  LayerSpec s;
  s.kind = LayerKind::dropout;
  s.dropout_rate = rate;
  return s;
}

LayerSpec LayerSpec::Flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::tanh_act: return "tanh";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  if (name == "dense") return LayerKind::dense;
  if (name == "conv2d") return LayerKind::conv2d;
  if (name == "relu") return LayerKind::relu;
  if (name == "tanh") return LayerKind::tanh_act;
  if (name == "dropout") return LayerKind::dropout;
  if (name == "flatten") return LayerKind::flatten;
  throw ValueError("unknown layer kind '" + name + "'");
}

// ---- FeedForwardClassifier --------------------------------------------------

FeedForwardClassifier::FeedForwardClassifier(std::vector<LayerSpec> specs,
                                             Shape input_shape, std::size_t class_count,
                                             std::size_t embedding_boundary, Rng& rng)
    : specs_(std::move(specs)),
      input_shape_(std::move(input_shape)),
      class_count_(class_count),
      embedding_boundary_(embedding_boundary) {
  if (input_shape_.size() != 3) {
    throw ShapeError("classifier input shape must be [C,H,W], got " +
                     shape_to_string(input_shape_));
  }
  const auto trace = trace_shapes(specs_, input_shape_);
  if (trace.back().size() != 1 || trace.back()[0] != class_count_) {
    throw ShapeError("classifier output " + shape_to_string(trace.back()) +
                     " does not match class count " + std::to_string(class_count_));
  }
  if (embedding_boundary_ == 0 || embedding_boundary_ >= specs_.size()) {
    throw ValueError("embedding boundary must split the layer stack");
  }
  if (trace[embedding_boundary_].size() != 1) {
    throw ShapeError("embedding boundary must sit at a flattened activation, trace is " +
                     shape_to_string(trace[embedding_boundary_]));
  }
  embedding_width_ = trace[embedding_boundary_][0];

  for (const LayerSpec& s : specs_) {
    if (s.kind == LayerKind::dense) {
      params_.emplace_back(glorot_init({s.in_dim, s.out_dim}, s.in_dim, s.out_dim, rng),
                           Tensor::zeros({s.out_dim}, true));
    } else if (s.kind == LayerKind::conv2d) {
      const std::size_t fan_in = s.in_channels * s.kernel * s.kernel;
      const std::size_t fan_out = s.out_channels * s.kernel * s.kernel;
      params_.emplace_back(
          glorot_init({s.out_channels, s.in_channels, s.kernel, s.kernel}, fan_in, fan_out, rng),
          Tensor::zeros({s.out_channels}, true));
    } else if (s.kind == LayerKind::dropout) {
      ++dropout_count_;
    }
  }
}

std::vector<Tensor> FeedForwardClassifier::parameters() const {
  std::vector<Tensor> out;
  for (const auto& [w, b] : params_) {
    out.push_back(w);
    out.push_back(b);
  }
  return out;
}

Tensor FeedForwardClassifier::forward_range(const Tensor& x, std::size_t begin,
                                            std::size_t end,
                                            const std::vector<Tensor>* dropout_masks) const {
  Tensor h = x;
  std::size_t param_index = 0;
  std::size_t dropout_index = 0;
  for (std::size_t li = 0; li < end; ++li) {
    const LayerSpec& s = specs_[li];
    const bool active = li >= begin;
    switch (s.kind) {
      case LayerKind::conv2d: {
        if (active) h = conv2d(h, params_[param_index].first, params_[param_index].second,
                               s.stride, s.pad);
        ++param_index;
        break;
      }
      case LayerKind::dense: {
        if (active) {
          if (h.ndim() != 2) h = flatten_batch(h);
          h = add_rowwise(matmul(h, params_[param_index].first), params_[param_index].second);
        }
        ++param_index;
        break;
      }
      case LayerKind::relu:
        if (active) h = relu(h);
        break;
      case LayerKind::tanh_act:
        if (active) h = tanh(h);
        break;
      case LayerKind::flatten:
        if (active) h = flatten_batch(h);
        break;
      case LayerKind::dropout: {
        if (active && dropout_masks) {
          h = mul(h, (*dropout_masks)[dropout_index]);
        }
        ++dropout_index;
        break;
      }
    }
  }
  return h;
}

Tensor FeedForwardClassifier::predict_logits(const Tensor& x) const {
  return forward_range(x, 0, specs_.size(), nullptr);
}

PosteriorDraw FeedForwardClassifier::sample_draw(Rng& rng) const {
  if (dropout_count_ == 0) {
    throw UnsupportedModelError(
        "deterministic classifier has no posterior to sample; use the surrogate path");
  }
  // Masks are shaped per activation trace; batch dim added lazily at use.
  // A draw is taken for batch size 1 and broadcast by tiling at apply time,
  // so masks here are stored per-sample and expanded in logits_under_draw.
  PosteriorDraw draw;
  const auto trace = trace_shapes(specs_, input_shape_);
  for (std::size_t li = 0; li < specs_.size(); ++li) {
    if (specs_[li].kind == LayerKind::dropout) {
      draw.noise.push_back(dropout_mask(trace[li], specs_[li].dropout_rate, rng));
    }
  }
  return draw;
}

Tensor FeedForwardClassifier::logits_under_draw(const Tensor& x,
                                                const PosteriorDraw& draw) const {
  if (draw.noise.size() != dropout_count_) {
    throw ValueError("posterior draw does not match this model's dropout layers");
  }
  // Expand per-sample masks across the batch (same draw for every row, one
  // theta_t per draw).
  const std::size_t batch = x.shape()[0];
  std::vector<Tensor> masks;
  masks.reserve(draw.noise.size());
  for (const Tensor& m : draw.noise) {
    Shape batched = m.shape();
    batched.insert(batched.begin(), 1);
    Tensor one = reshape(m, batched);
    if (batch == 1) {
      masks.push_back(one);
    } else {
      std::vector<Tensor> copies(batch, one);
      masks.push_back(concat(copies, 0));
    }
  }
  return forward_range(x, 0, specs_.size(), &masks);
}

Tensor FeedForwardClassifier::embed(const Tensor& x) const {
  return forward_range(x, 0, embedding_boundary_, nullptr);
}

Tensor FeedForwardClassifier::head(const Tensor& h) const {
  if (h.ndim() != 2 || h.shape()[1] != embedding_width_) {
    throw ShapeError("head expects [N, " + std::to_string(embedding_width_) + "], got " +
                     shape_to_string(h.shape()));
  }
  return forward_range(h, embedding_boundary_, specs_.size(), nullptr);
}

// ---- MeanFieldClassifier ------------------------------------------------------

MeanFieldClassifier::MeanFieldClassifier(std::vector<LayerSpec> specs, Shape input_shape,
                                         std::size_t class_count,
                                         std::size_t embedding_boundary, Rng& rng,
                                         double initial_sigma)
    : specs_(std::move(specs)),
      input_shape_(std::move(input_shape)),
      class_count_(class_count),
      embedding_boundary_(embedding_boundary) {
  for (const LayerSpec& s : specs_) {
    if (s.kind == LayerKind::dropout) {
      throw ValueError("mean-field classifier does not take dropout layers");
    }
  }
  const auto trace = trace_shapes(specs_, input_shape_);
  if (trace.back().size() != 1 || trace.back()[0] != class_count_) {
    throw ShapeError("classifier output " + shape_to_string(trace.back()) +
                     " does not match class count " + std::to_string(class_count_));
  }
  if (embedding_boundary_ == 0 || embedding_boundary_ >= specs_.size() ||
      trace[embedding_boundary_].size() != 1) {
    throw ValueError("embedding boundary must sit at a flattened activation");
  }
  embedding_width_ = trace[embedding_boundary_][0];

  // rho = softplus^{-1}(initial_sigma)
  const double rho0 = std::log(std::expm1(initial_sigma));
  for (const LayerSpec& s : specs_) {
    if (!s.parametric()) continue;
    VParam vp;
    if (s.kind == LayerKind::dense) {
      vp.mu_w = glorot_init({s.in_dim, s.out_dim}, s.in_dim, s.out_dim, rng);
      vp.mu_b = Tensor::zeros({s.out_dim}, true);
      vp.rho_w = Tensor::full({s.in_dim, s.out_dim}, rho0, true);
      vp.rho_b = Tensor::full({s.out_dim}, rho0, true);
    } else {
      const std::size_t fan_in = s.in_channels * s.kernel * s.kernel;
      const std::size_t fan_out = s.out_channels * s.kernel * s.kernel;
      vp.mu_w = glorot_init({s.out_channels, s.in_channels, s.kernel, s.kernel}, fan_in,
                            fan_out, rng);
      vp.mu_b = Tensor::zeros({s.out_channels}, true);
      vp.rho_w = Tensor::full({s.out_channels, s.in_channels, s.kernel, s.kernel}, rho0, true);
      vp.rho_b = Tensor::full({s.out_channels}, rho0, true);
    }
    vparams_.push_back(std::move(vp));
  }
}

std::vector<Tensor> MeanFieldClassifier::parameters() const {
  std::vector<Tensor> out;
  for (const auto& vp : vparams_) {
    out.push_back(vp.mu_w);
    out.push_back(vp.rho_w);
    out.push_back(vp.mu_b);
    out.push_back(vp.rho_b);
  }
  return out;
}

std::vector<std::pair<Tensor, Tensor>> MeanFieldClassifier::weights_at_mean() const {
  std::vector<std::pair<Tensor, Tensor>> out;
  for (const auto& vp : vparams_) out.emplace_back(vp.mu_w, vp.mu_b);
  return out;
}

std::vector<std::pair<Tensor, Tensor>> MeanFieldClassifier::weights_from_draw(
    const PosteriorDraw& draw) const {
  if (draw.noise.size() != vparams_.size() * 2) {
    throw ValueError("posterior draw does not match this model's parameter count");
  }
  std::vector<std::pair<Tensor, Tensor>> out;
  for (std::size_t i = 0; i < vparams_.size(); ++i) {
    const VParam& vp = vparams_[i];
    Tensor w = add(vp.mu_w, mul(softplus(vp.rho_w), draw.noise[2 * i]));
    Tensor b = add(vp.mu_b, mul(softplus(vp.rho_b), draw.noise[2 * i + 1]));
    out.emplace_back(std::move(w), std::move(b));
  }
  return out;
}

Tensor MeanFieldClassifier::forward_with(
    const Tensor& x, std::size_t begin, std::size_t end,
    const std::vector<std::pair<Tensor, Tensor>>& weights) const {
  Tensor h = x;
  std::size_t param_index = 0;
  for (std::size_t li = 0; li < end; ++li) {
    const LayerSpec& s = specs_[li];
    const bool active = li >= begin;
    switch (s.kind) {
      case LayerKind::conv2d:
        if (active) h = conv2d(h, weights[param_index].first, weights[param_index].second,
                               s.stride, s.pad);
        ++param_index;
        break;
      case LayerKind::dense:
        if (active) {
          if (h.ndim() != 2) h = flatten_batch(h);
          h = add_rowwise(matmul(h, weights[param_index].first), weights[param_index].second);
        }
        ++param_index;
        break;
      case LayerKind::relu:
        if (active) h = relu(h);
        break;
      case LayerKind::tanh_act:
        if (active) h = tanh(h);
        break;
      case LayerKind::flatten:
        if (active) h = flatten_batch(h);
        break;
      case LayerKind::dropout:
        break;
    }
  }
  return h;
}

Tensor MeanFieldClassifier::predict_logits(const Tensor& x) const {
  return forward_with(x, 0, specs_.size(), weights_at_mean());
}

PosteriorDraw MeanFieldClassifier::sample_draw(Rng& rng) const {
  PosteriorDraw draw;
  for (const auto& vp : vparams_) {
    draw.noise.push_back(Tensor::normal(vp.mu_w.shape(), 0.0, 1.0, rng));
    draw.noise.push_back(Tensor::normal(vp.mu_b.shape(), 0.0, 1.0, rng));
  }
  return draw;
}

Tensor MeanFieldClassifier::logits_under_draw(const Tensor& x,
                                              const PosteriorDraw& draw) const {
  return forward_with(x, 0, specs_.size(), weights_from_draw(draw));
}

Tensor MeanFieldClassifier::embed(const Tensor& x) const {
  return forward_with(x, 0, embedding_boundary_, weights_at_mean());
}

Tensor MeanFieldClassifier::head(const Tensor& h) const {
  if (h.ndim() != 2 || h.shape()[1] != embedding_width_) {
    throw ShapeError("head expects [N, " + std::to_string(embedding_width_) + "], got " +
                     shape_to_string(h.shape()));
  }
  return forward_with(h, embedding_boundary_, specs_.size(), weights_at_mean());
}

Tensor MeanFieldClassifier::kl_to_standard_normal() const {
  // sum over weights of (mu^2 + sigma^2 - 1 - log sigma^2) / 2
  Tensor total = Tensor::zeros({1});
  for (const auto& vp : vparams_) {
    for (const auto& [mu, rho] : {std::pair{vp.mu_w, vp.rho_w}, std::pair{vp.mu_b, vp.rho_b}}) {
      Tensor sig = softplus(rho);
      Tensor sig2 = mul(sig, sig);
      Tensor term = sub(add(mul(mu, mu), sig2), 1.0);
      term = sub(term, log(sig2));
      total = add(total, mul(sum(term), 0.5));
    }
  }
  return total;
}

// ---- free operations ---------------------------------------------------------

Tensor predict_logits(const Classifier& model, const Tensor& x, bool stochastic,
                      Rng* rng) {
  if (!stochastic) return model.predict_logits(x);
  if (!model.is_stochastic()) {
    throw UnsupportedModelError("stochastic forward requested on a " + model.kind_tag() +
                                " model");
  }
  if (!rng) throw ValueError("stochastic forward needs a generator");
  return model.logits_under_draw(x, model.sample_draw(*rng));
}

std::vector<std::vector<double>> sample_posterior_predictives(const Classifier& model,
                                                              const Tensor& x, int T,
                                                              Rng& rng) {
  if (T < 1) throw ValueError("sample_posterior_predictives: T must be >= 1");
  if (!model.is_stochastic()) {
    throw UnsupportedModelError("posterior sampling requested on a " + model.kind_tag() +
                                " model; use the surrogate path instead");
  }
  NoGradGuard guard;
  std::vector<std::vector<double>> out;
  out.reserve(T);
  for (int t = 0; t < T; ++t) {
    Tensor probs = softmax_lastdim(model.logits_under_draw(x, model.sample_draw(rng)));
    const std::size_t k = probs.shape().back();
    const double* row = probs.data().data();  // first row (single input)
    out.emplace_back(row, row + k);
  }
  return out;
}

SgdMomentum::SgdMomentum(std::vector<Tensor> params, double learning_rate, double momentum)
    : params_(std::move(params)), lr_(learning_rate), momentum_(momentum) {
  for (const Tensor& p : params_) velocity_.emplace_back(p.numel(), 0.0);
}

void SgdMomentum::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

void SgdMomentum::apply(double sign) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto v = velocity_[i].data();
    auto d = p.data();
    for (std::size_t j = 0; j < p.numel(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      d[j] += sign * lr_ * v[j];
    }
  }
}

void SgdMomentum::step() { apply(-1.0); }
void SgdMomentum::step_ascent() { apply(+1.0); }

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  return neg(mean(pick_per_row(log_softmax_lastdim(logits), labels)));
}

TrainLog train_classifier(FeedForwardClassifier& model, const Dataset& data,
                          const OptimizerConfig& cfg, Rng& rng) {
  data.validate();
  SgdMomentum opt(model.parameters(), cfg.learning_rate, cfg.momentum);
  TrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : epoch_batches(data.count, cfg.batch_size, rng)) {
      Tensor x = data.batch(idx);
      const std::vector<int> y = data.batch_labels(idx);
      Tensor logits = model.predict_logits(x);
      Tensor loss = cross_entropy_loss(logits, y);
      opt.zero_grad();
      backward(loss);
      opt.step();
      loss_sum += loss.item() * static_cast<double>(idx.size());
      acc_sum += batch_accuracy(logits, y) * static_cast<double>(idx.size());
      seen += idx.size();
    }
    log.push_back({epoch, loss_sum / static_cast<double>(seen),
                   acc_sum / static_cast<double>(seen)});
  }
  return log;
}

double bbb_train_step(MeanFieldClassifier& model, const Tensor& x,
                      const std::vector<int>& labels, double kl_weight,
                      SgdMomentum& opt, Rng& rng) {
  if (kl_weight < 0.0) throw ValueError("bbb_train_step: kl_weight must be >= 0");
  PosteriorDraw draw = model.sample_draw(rng);
  Tensor logits = model.logits_under_draw(x, draw);
  Tensor nll = cross_entropy_loss(logits, labels);
  Tensor loss = kl_weight > 0.0
                    ? add(nll, mul(model.kl_to_standard_normal(), kl_weight))
                    : nll;
  if (!std::isfinite(loss.item())) {
    std::ostringstream os;
    os << "bbb_train_step: non-finite loss (nll=" << nll.item()
       << ", kl_weight=" << kl_weight << ")";
    throw ValueError(os.str());
  }
  opt.zero_grad();
  backward(loss);
  opt.step();
  return loss.item();
}

TrainLog train_meanfield_classifier(MeanFieldClassifier& model, const Dataset& data,
                                    const OptimizerConfig& cfg, Rng& rng) {
  data.validate();
  SgdMomentum opt(model.parameters(), cfg.learning_rate, cfg.momentum);
  TrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = epoch_batches(data.count, cfg.batch_size, rng);
    // Summed over an epoch the KL term enters the ELBO exactly once.
    const double kl_weight = 1.0 / static_cast<double>(batches.size());
    double loss_sum = 0.0;
    double acc_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& idx : batches) {
      Tensor x = data.batch(idx);
      const std::vector<int> y = data.batch_labels(idx);
      const double loss = bbb_train_step(model, x, y, kl_weight, opt, rng);
      loss_sum += loss * static_cast<double>(idx.size());
      {
        NoGradGuard guard;
        acc_sum += batch_accuracy(model.predict_logits(x), y) * static_cast<double>(idx.size());
      }
      seen += idx.size();
    }
    log.push_back({epoch, loss_sum / static_cast<double>(seen),
                   acc_sum / static_cast<double>(seen)});
  }
  return log;
}

std::vector<LayerSpec> conv_image_architecture(std::size_t in_channels, std::size_t height,
                                               std::size_t width, std::size_t class_count,
                                               double dropout_rate) {
  const std::size_t h1 = (height + 4 - 5) / 2 + 1;
  const std::size_t w1 = (width + 4 - 5) / 2 + 1;
  const std::size_t h2 = (h1 + 4 - 5) / 2 + 1;
  const std::size_t w2 = (w1 + 4 - 5) / 2 + 1;
  std::vector<LayerSpec> specs;
  specs.push_back(LayerSpec::Conv2d(in_channels, 8, 5, 2, 2));
  specs.push_back(LayerSpec::Relu());
  if (dropout_rate > 0.0) specs.push_back(LayerSpec::Dropout(dropout_rate));
  specs.push_back(LayerSpec::Conv2d(8, 16, 5, 2, 2));
  specs.push_back(LayerSpec::Relu());
  if (dropout_rate > 0.0) specs.push_back(LayerSpec::Dropout(dropout_rate));
  specs.push_back(LayerSpec::Flatten());
  specs.push_back(LayerSpec::Dense(16 * h2 * w2, 64));
  if (dropout_rate > 0.0) specs.push_back(LayerSpec::Dropout(dropout_rate));
  specs.push_back(LayerSpec::Dense(64, class_count));
  return specs;
}

std::size_t conv_image_embedding_boundary(double dropout_rate) {
  // Index just past dense(64): embed ends at the penultimate activation.
  return dropout_rate > 0.0 ? 8 : 6;
}

std::vector<LayerSpec> dense_architecture(std::size_t in_dim, std::size_t hidden,
                                          std::size_t class_count) {
  return {LayerSpec::Flatten(), LayerSpec::Dense(in_dim, hidden), LayerSpec::Relu(),
          LayerSpec::Dense(hidden, class_count)};
}

}  // namespace unc
