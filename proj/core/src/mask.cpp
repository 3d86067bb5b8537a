#include "unc/mask.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

constexpr double kProbEps = 1e-12;

Tensor conv_init(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  return Tensor::uniform(std::move(shape), -limit, limit, rng, true);
}

}  // namespace

double Mask::density() const {
  double s = 0.0;
  for (double v : values.data()) s += v;
  return s / static_cast<double>(values.numel());
}

MaskModel::MaskModel(Shape input_shape, Rng& rng, std::size_t width1, std::size_t width2)
    : input_shape_(std::move(input_shape)), width1_(width1), width2_(width2) {
  if (input_shape_.size() != 3) {
    throw ShapeError("mask model input shape must be [C,H,W], got " +
                     shape_to_string(input_shape_));
  }
  const std::size_t c = input_shape_[0], h = input_shape_[1], w = input_shape_[2];
  // Two stride-2 halvings followed by two stride-2 doublings must return to
  // the input size exactly.
  const std::size_t h1 = (h + 2 - 3) / 2 + 1, w1 = (w + 2 - 3) / 2 + 1;
  const std::size_t h2 = (h1 + 2 - 3) / 2 + 1, w2 = (w1 + 2 - 3) / 2 + 1;
  if ((h2 - 1) * 2 + 2 != h1 || (w2 - 1) * 2 + 2 != w1 || (h1 - 1) * 2 + 2 != h ||
      (w1 - 1) * 2 + 2 != w) {
    throw ShapeError("mask model needs spatial dims compatible with two 2x down/up stages, got " +
                     shape_to_string(input_shape_));
  }
  // Slightly positive biases: an all-positive input must not start the
  // relu chain dead (a dead hourglass cannot recover through conv1).
  tensors_.push_back(conv_init({width1_, c, 3, 3}, c * 9, width1_ * 9, rng));
  tensors_.push_back(Tensor::full({width1_}, 0.01, true));
  tensors_.push_back(conv_init({width2_, width1_, 3, 3}, width1_ * 9, width2_ * 9, rng));
  tensors_.push_back(Tensor::full({width2_}, 0.01, true));
  tensors_.push_back(conv_init({width2_, width1_, 2, 2}, width2_ * 4, width1_ * 4, rng));
  tensors_.push_back(Tensor::full({width1_}, 0.01, true));
  tensors_.push_back(conv_init({width1_, c, 2, 2}, width1_ * 4, c * 4, rng));
  tensors_.push_back(Tensor::zeros({c}, true));
}

Tensor MaskModel::raw(const Tensor& x) const {
  if (x.ndim() != 4 || x.shape()[1] != input_shape_[0] || x.shape()[2] != input_shape_[1] ||
      x.shape()[3] != input_shape_[2]) {
    throw ShapeError("mask model expects [N," + std::to_string(input_shape_[0]) + "," +
                     std::to_string(input_shape_[1]) + "," + std::to_string(input_shape_[2]) +
                     "], got " + shape_to_string(x.shape()));
  }
  Tensor h1 = relu(conv2d(x, tensors_[0], tensors_[1], 2, 1));
  Tensor h2 = relu(conv2d(h1, tensors_[2], tensors_[3], 2, 1));
  Tensor u1 = relu(conv2d_transpose(h2, tensors_[4], tensors_[5], 2));
  return conv2d_transpose(u1, tensors_[6], tensors_[7], 2);
}

Tensor MaskModel::probabilities(const Tensor& x) const {
  Tensor p = mul(add(tanh(raw(x)), 1.0), 0.5);
  // tanh saturates to exactly +-1 in floating point; keep p usable under
  // log(p) / log(1-p).
  return clamp(p, kProbEps, 1.0 - kProbEps);
}

Tensor sample_gumbel_delta(const Shape& shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& g : v) g = rng.gumbel() - rng.gumbel();
  return Tensor::from_vector(shape, std::move(v));
}

Mask relaxed_mask_from_noise(const Tensor& probs, double tau, const Tensor& gumbel_delta) {
  if (tau <= 0.0) throw ValueError("relaxed mask: tau must be > 0");
  assert_same_shape(probs, gumbel_delta, "relaxed_mask");
  for (double p : probs.data()) {
    if (!(p > 0.0 && p < 1.0)) {
      throw ValueError("relaxed mask: probabilities must lie strictly inside (0,1)");
    }
  }
  Tensor logits = sub(log(probs), log(sub(1.0, probs)));
  Tensor soft = sigmoid(div(add(logits, gumbel_delta), tau));
  return {soft, false};
}

Mask sample_relaxed_mask(const Tensor& probs, double tau, Rng& rng) {
  return relaxed_mask_from_noise(probs, tau, sample_gumbel_delta(probs.shape(), rng));
}

Mask harden_mask(const Mask& mask) {
  std::vector<double> v(mask.values.numel());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = mask.values.at(i) >= 0.5 ? 1.0 : 0.0;
  }
  return {Tensor::from_vector(mask.values.shape(), std::move(v)), true};
}

Tensor apply_mask(const Tensor& x, const Tensor& omega) {
  assert_same_shape(x, omega, "apply_mask");
  return mul(omega, x);
}

Mask random_mask(const Shape& shape, double density, Rng& rng) {
  if (density < 0.0 || density > 1.0) {
    throw ValueError("random_mask: density must lie in [0,1]");
  }
  std::vector<double> v(shape_numel(shape));
  for (auto& m : v) m = rng.uniform() < density ? 1.0 : 0.0;
  return {Tensor::from_vector(shape, std::move(v)), true};
}

void MaskTrainConfig::validate() const {
  if (lambda < 0.0) throw ValueError("mask config: lambda must be >= 0");
  if (tau_start <= 0.0 || tau_end <= 0.0 || tau_eval <= 0.0) {
    throw ValueError("mask config: temperatures must be > 0");
  }
  if (steps < 1 || batch_size < 1) throw ValueError("mask config: steps/batch must be >= 1");
  if (uncertainty_samples < 1) throw ValueError("mask config: T must be >= 1");
  if (inner_attack_steps < 1) throw ValueError("mask config: inner attack steps must be >= 1");
}

MaskObjectiveContext make_mask_objective_context(const Classifier& model,
                                                 const SurrogateModel* surrogate,
                                                 const MaskModel& mask_model, const Tensor& x,
                                                 const std::vector<int>& labels,
                                                 const ThreatConfig& threat,
                                                 const MaskTrainConfig& cfg, double tau,
                                                 Rng& rng) {
  if (model.is_stochastic() == (surrogate != nullptr)) {
    throw ValueError(
        "mask objective: a surrogate is required exactly when the classifier is deterministic");
  }
  MaskObjectiveContext ctx;
  ctx.tau = tau;
  ctx.gumbel_delta = sample_gumbel_delta(x.shape(), rng);

  {
    NoGradGuard guard;
    Tensor probs = mask_model.probabilities(x);
    Mask soft = relaxed_mask_from_noise(probs, tau, ctx.gumbel_delta);
    ctx.hard_gate = harden_mask(soft).values;
  }

  ThreatConfig inner = threat;
  inner.steps = cfg.inner_attack_steps;
  AttackResult inner_result = run_attack(model, x, labels, &ctx.hard_gate, inner, rng);
  ctx.x_adv_raw = inner_result.x_adv;

  if (surrogate) {
    const Shape noise_shape{x.shape()[0], surrogate->embedding_width()};
    for (int t = 0; t < cfg.uncertainty_samples; ++t) {
      ctx.surrogate_noise.push_back(Tensor::normal(noise_shape, 0.0, 1.0, rng));
    }
  } else {
    for (int t = 0; t < cfg.uncertainty_samples; ++t) {
      ctx.posterior_draws.push_back(model.sample_draw(rng));
    }
  }
  return ctx;
}

Tensor localized_objective(const Classifier& model, const SurrogateModel* surrogate,
                           const MaskModel& mask_model, const Tensor& x,
                           const std::vector<int>& labels, const ThreatConfig& threat,
                           double lambda, const MaskObjectiveContext& ctx,
                           MaskObjectiveTerms* terms) {
  Tensor x_const = x.detach();
  Tensor probs = mask_model.probabilities(x_const);
  Mask soft = relaxed_mask_from_noise(probs, ctx.tau, ctx.gumbel_delta);
  const Tensor& omega = soft.values;

  // Epistemic-uncertainty term on omega .* x.
  Tensor masked_x = apply_mask(x_const, omega);
  Tensor ue_rows = surrogate
                       ? amortized_ue_rows(model, *surrogate, masked_x, ctx.surrogate_noise)
                       : stochastic_ue_rows(model, masked_x, ctx.posterior_draws);
  Tensor ue = mean(ue_rows);

  // Adversarial term at the (frozen) inner-attack result, gated through the
  // relaxed mask so its gradient reaches nu.
  Tensor gated = add(x_const, mul(omega, sub(ctx.x_adv_raw, x_const)));
  Tensor adv;
  if (surrogate) {
    Tensor logits = model.predict_logits(gated);
    adv = threat.loss == LossKind::f6 ? neg(mean(cw_f6_rows(logits, labels, threat.kappa)))
                                      : cross_entropy_loss(logits, labels);
  } else {
    Tensor acc;
    for (std::size_t t = 0; t < ctx.posterior_draws.size(); ++t) {
      Tensor logits = model.logits_under_draw(gated, ctx.posterior_draws[t]);
      Tensor term = threat.loss == LossKind::f6
                        ? neg(mean(cw_f6_rows(logits, labels, threat.kappa)))
                        : cross_entropy_loss(logits, labels);
      acc = t == 0 ? term : add(acc, term);
    }
    adv = div(acc, static_cast<double>(ctx.posterior_draws.size()));
  }

  // Differentiable L1 on the soft mask, mean per example.
  Tensor sparsity = div(sum(omega), static_cast<double>(x.shape()[0]));

  Tensor total = sub(add(ue, adv), mul(sparsity, lambda));
  if (terms) {
    terms->ue = ue.item();
    terms->adv = adv.item();
    terms->sparsity = sparsity.item();
    terms->total = total.item();
  }
  return total;
}

MaskObjectiveTerms train_mask_step(const Classifier& model, const SurrogateModel* surrogate,
                                   MaskModel& mask_model, const Tensor& x,
                                   const std::vector<int>& labels, const ThreatConfig& threat,
                                   const MaskTrainConfig& cfg, double tau, Rng& rng) {
  cfg.validate();
  MaskObjectiveContext ctx = make_mask_objective_context(model, surrogate, mask_model, x,
                                                         labels, threat, cfg, tau, rng);
  MaskObjectiveTerms terms;
  Tensor objective = localized_objective(model, surrogate, mask_model, x, labels, threat,
                                         cfg.lambda, ctx, &terms);
  if (!std::isfinite(terms.total)) {
    std::ostringstream os;
    os << "train_mask_step: non-finite objective (ue=" << terms.ue << ", adv=" << terms.adv
       << ", sparsity=" << terms.sparsity << ")";
    throw ValueError(os.str());
  }
  for (Tensor p : mask_model.parameters()) p.zero_grad();
  GradientMap grads = backward(objective);
  for (Tensor p : mask_model.parameters()) {
    if (!grads.contains(p)) continue;
    auto g = grads.at(p).data();
    auto d = p.data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] += cfg.learning_rate * g[j];
  }
  return terms;
}

std::vector<MaskTrainLogEntry> train_mask_model(const Classifier& model,
                                                SurrogateModel* surrogate,
                                                MaskModel& mask_model, const Dataset& data,
                                                const ThreatConfig& threat,
                                                const MaskTrainConfig& cfg, Rng& rng,
                                                bool co_train_surrogate, int surrogate_m,
                                                double surrogate_alpha) {
  cfg.validate();
  data.validate();
  std::vector<MaskTrainLogEntry> log;
  log.reserve(cfg.steps);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const double frac = cfg.steps > 1 ? static_cast<double>(step) / (cfg.steps - 1) : 0.0;
    const double tau = cfg.tau_start + (cfg.tau_end - cfg.tau_start) * frac;

    std::vector<std::size_t> idx(cfg.batch_size);
    for (auto& i : idx) i = rng.uniform_int(data.count);

    if (surrogate && co_train_surrogate) {
      std::vector<std::size_t> sidx(cfg.batch_size);
      for (auto& i : sidx) i = rng.uniform_int(data.count);
      train_surrogate_step(model, *surrogate, data.batch(sidx), data.batch_labels(sidx),
                           surrogate_m, surrogate_alpha, rng);
    }

    Tensor x = data.batch(idx);
    MaskObjectiveTerms terms = train_mask_step(model, surrogate, mask_model, x,
                                               data.batch_labels(idx), threat, cfg, tau, rng);
    log.push_back({step, terms, tau});
  }
  return log;
}

Mask eval_mask(const MaskModel& mask_model, const Tensor& x, double tau_eval, Rng& rng) {
  NoGradGuard guard;
  Tensor probs = mask_model.probabilities(x);
  return harden_mask(sample_relaxed_mask(probs, tau_eval, rng));
}

}  // namespace unc
