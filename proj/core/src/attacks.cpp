#include "unc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "unc/errors.hpp"

namespace unc {

namespace {

Tensor label_exclusion_block(const std::vector<int>& labels, std::size_t k) {
  std::vector<double> v(labels.size() * k, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    v[i * k + labels[i]] = -1e9;
  }
  return Tensor::from_vector({labels.size(), k}, std::move(v));
}

std::vector<int> argmax_rows(const Tensor& t) {
  const std::size_t n = t.shape()[0], k = t.shape()[1];
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = t.data().data() + i * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

// One adversarial-objective evaluation: the ascent scalar (graph-carrying),
// plus data-level per-row f6 margins and predictions for bookkeeping.
struct LossEval {
  Tensor scalar;
  std::vector<double> f6_rows;
  std::vector<int> preds;
};

LossEval eval_objective(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const ThreatConfig& cfg, Rng& rng) {
  LossEval ev;
  const std::size_t n = x.shape()[0];
  if (!model.is_stochastic() || cfg.posterior_samples <= 1) {
    Tensor logits = model.is_stochastic() && cfg.posterior_samples == 1
                        ? model.logits_under_draw(x, model.sample_draw(rng))
                        : model.predict_logits(x);
    Tensor f6 = cw_f6_rows(logits, labels, cfg.kappa);
    ev.scalar = cfg.loss == LossKind::f6 ? neg(mean(f6))
                                         : cross_entropy_loss(logits, labels);
    ev.f6_rows.assign(f6.data().begin(), f6.data().end());
    ev.preds = argmax_rows(logits);
    return ev;
  }

  const int t = cfg.posterior_samples;
  Tensor loss_acc;
  std::vector<double> f6_acc(n, 0.0);
  Tensor prob_acc;
  for (int s = 0; s < t; ++s) {
    Tensor logits = model.logits_under_draw(x, model.sample_draw(rng));
    Tensor f6 = cw_f6_rows(logits, labels, cfg.kappa);
    Tensor term = cfg.loss == LossKind::f6 ? neg(mean(f6))
                                           : cross_entropy_loss(logits, labels);
    loss_acc = s == 0 ? term : add(loss_acc, term);
    for (std::size_t i = 0; i < n; ++i) f6_acc[i] += f6.at(i);
    {
      NoGradGuard guard;
      Tensor probs = softmax_lastdim(logits.detach());
      prob_acc = s == 0 ? probs : add(prob_acc, probs);
    }
  }
  ev.scalar = div(loss_acc, static_cast<double>(t));
  for (double& v : f6_acc) v /= t;
  ev.f6_rows = std::move(f6_acc);
  ev.preds = argmax_rows(prob_acc);
  return ev;
}

double auto_step_size(double bound, int steps, double configured) {
  if (configured > 0.0) return configured;
  return 2.5 * bound / static_cast<double>(steps);
}

void check_data_range(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ValueError("attack: clean input outside [0,1]");
    }
  }
}

// Tracks the best (lowest margin) iterate per example.
class BestIterate {
 public:
  BestIterate(std::size_t n, std::size_t stride)
      : stride_(stride),
        vals_(n, std::numeric_limits<double>::infinity()),
        preds_(n, -1),
        data_(n * stride, 0.0) {}

  void update(const Tensor& x_adv, const std::vector<double>& f6_rows,
              const std::vector<int>& preds) {
    for (std::size_t i = 0; i < vals_.size(); ++i) {
      if (f6_rows[i] < vals_[i]) {
        vals_[i] = f6_rows[i];
        preds_[i] = preds[i];
        std::copy_n(x_adv.data().data() + i * stride_, stride_, data_.data() + i * stride_);
      }
    }
  }

  Tensor assemble(const Shape& shape) const { return Tensor::from_vector(shape, data_); }
  const std::vector<double>& margins() const { return vals_; }
  std::vector<bool> successes(const std::vector<int>& labels) const {
    std::vector<bool> out(vals_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = preds_[i] != labels[i];
    return out;
  }

 private:
  std::size_t stride_;
  std::vector<double> vals_;
  std::vector<int> preds_;
  std::vector<double> data_;
};

}  // namespace

ThreatKind threat_kind_from_string(const std::string& name) {
  if (name == "additive" || name == "delta") return ThreatKind::additive;
  if (name == "recolor") return ThreatKind::recolor;
  throw ValueError("unknown threat kind '" + name + "'");
}

std::string to_string(ThreatKind kind) {
  return kind == ThreatKind::additive ? "additive" : "recolor";
}

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "f6") return LossKind::f6;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  throw ValueError("unknown loss kind '" + name + "'");
}

std::string to_string(LossKind kind) {
  return kind == LossKind::f6 ? "f6" : "cross_entropy";
}

void ThreatConfig::validate() const {
  if (epsilon < 0.0 || bound_r < 0.0 || bound_g < 0.0 || bound_b < 0.0) {
    throw ValueError("threat: bounds must be >= 0");
  }
  if (steps < 1) throw ValueError("threat: steps must be >= 1");
  if (kappa < 0.0) throw ValueError("threat: kappa must be >= 0");
  if (posterior_samples < 1) throw ValueError("threat: posterior sample count must be >= 1");
  if (grid_resolution < 2) throw ValueError("threat: grid resolution must be >= 2");
}

Tensor cw_f6_rows(const Tensor& logits, const std::vector<int>& labels, double kappa) {
  if (logits.ndim() != 2 || logits.shape()[1] < 2) {
    throw ValueError("cw_f6: needs [N,K] logits with K >= 2, got " +
                     shape_to_string(logits.shape()));
  }
  Tensor zy = pick_per_row(logits, labels);
  Tensor others = rowmax(add(logits, label_exclusion_block(labels, logits.shape()[1])));
  return clamp_min(sub(zy, others), -kappa);
}

double cw_f6_loss(const Tensor& logits, int label, double kappa) {
  Tensor row = logits.ndim() == 1 ? reshape(logits, {1, logits.numel()}) : logits;
  return cw_f6_rows(row, {label}, kappa).at(0);
}

Tensor adversarial_loss(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const ThreatConfig& cfg, Rng& rng) {
  return eval_objective(model, x, labels, cfg, rng).scalar;
}

Tensor project_linf(const Tensor& candidate, const Tensor& x, double epsilon, double lo,
                    double hi) {
  assert_same_shape(candidate, x, "project_linf");
  std::vector<double> out(candidate.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double xi = x.at(i);
    double v = std::min(std::max(candidate.at(i), xi - epsilon), xi + epsilon);
    v = std::min(std::max(v, lo), hi);
    // fl(x +- eps) can overshoot the radius by half an ulp; the recomputed
    // difference must satisfy the bound exactly.
    while (std::abs(v - xi) > epsilon) v = std::nextafter(v, xi);
    out[i] = v;
  }
  return Tensor::from_vector(candidate.shape(), std::move(out));
}

Tensor masked_perturb(const Tensor& x, const Tensor& omega, const Tensor& perturbed) {
  return select_by_mask(omega, perturbed, x);
}

AttackResult pgd_attack(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const Tensor* omega,
                        const ThreatConfig& cfg, Rng& rng) {
  cfg.validate();
  check_data_range(x);
  if (omega) assert_same_shape(x, *omega, "pgd_attack mask");
  const std::size_t n = x.shape()[0];
  const std::size_t stride = x.numel() / n;
  const double step = auto_step_size(cfg.epsilon, cfg.steps, cfg.step_size);

  Tensor base = x.detach();
  Tensor x_adv = base;
  if (cfg.random_start && cfg.epsilon > 0.0) {
    NoGradGuard guard;
    Tensor delta = Tensor::uniform(x.shape(), -cfg.epsilon, cfg.epsilon, rng);
    Tensor cand = project_linf(add(base, delta), base, cfg.epsilon);
    x_adv = omega ? masked_perturb(base, *omega, cand) : cand;
  }

  BestIterate best(n, stride);
  AttackResult result;
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor leaf = x_adv.clone(true);
    LossEval ev = eval_objective(model, leaf, labels, cfg, rng);
    best.update(x_adv, ev.f6_rows, ev.preds);
    result.loss_trace.push_back(ev.scalar.item());
    GradientMap grads = backward(ev.scalar);
    if (!grads.contains(leaf)) {
      throw ValueError("pgd_attack: objective does not depend on the input");
    }
    auto g = grads.at(leaf).data();
    for (double v : g) {
      if (!std::isfinite(v)) throw ValueError("pgd_attack: non-finite gradient");
    }
    NoGradGuard guard;
    std::vector<double> cand(x_adv.data().begin(), x_adv.data().end());
    for (std::size_t i = 0; i < cand.size(); ++i) {
      const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
      cand[i] += step * s;
    }
    Tensor next = project_linf(Tensor::from_vector(x.shape(), std::move(cand)), base,
                               cfg.epsilon);
    x_adv = omega ? masked_perturb(base, *omega, next) : next;
  }
  {
    NoGradGuard guard;
    LossEval ev = eval_objective(model, x_adv, labels, cfg, rng);
    best.update(x_adv, ev.f6_rows, ev.preds);
  }

  result.x_adv = best.assemble(x.shape());
  result.success = best.successes(labels);
  result.final_margin = best.margins();
  if (omega) result.mask = omega->detach();
  return result;
}

ReColorParams zero_recolor_params(std::size_t grid_resolution) {
  return {Tensor::zeros({grid_resolution, grid_resolution, grid_resolution, 3})};
}

Tensor recolor_apply(const Tensor& x, const ReColorParams& params) {
  return clamp(recolor_interp(x, params.grid), 0.0, 1.0);
}

AttackResult recolor_attack(const Classifier& model, const Tensor& x,
                            const std::vector<int>& labels, const Tensor* omega,
                            const ThreatConfig& cfg, Rng& rng) {
  cfg.validate();
  check_data_range(x);
  if (x.ndim() != 4 || x.shape()[1] != 3) {
    throw ValueError("recolor_attack: input must be [N,3,H,W], got " +
                     shape_to_string(x.shape()));
  }
  if (omega) assert_same_shape(x, *omega, "recolor_attack mask");
  const std::size_t n = x.shape()[0];
  const std::size_t stride = x.numel() / n;
  const std::size_t g = cfg.grid_resolution;
  const double bounds[3] = {cfg.bound_r, cfg.bound_g, cfg.bound_b};
  const double max_bound = std::max({cfg.bound_r, cfg.bound_g, cfg.bound_b});
  const double step = auto_step_size(max_bound, cfg.steps, cfg.step_size);

  Tensor base = x.detach();
  // One displacement grid per example.
  std::vector<Tensor> grids;
  std::vector<Tensor> rows;
  for (std::size_t i = 0; i < n; ++i) {
    grids.push_back(Tensor::zeros({g, g, g, 3}, true));
    std::vector<double> row(base.data().begin() + i * stride,
                            base.data().begin() + (i + 1) * stride);
    rows.push_back(Tensor::from_vector({1, x.shape()[1], x.shape()[2], x.shape()[3]},
                                       std::move(row)));
  }

  auto build_candidate = [&]() {
    std::vector<Tensor> parts;
    parts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      parts.push_back(clamp(recolor_interp(rows[i], grids[i]), 0.0, 1.0));
    }
    Tensor recolored = n == 1 ? parts[0] : concat(parts, 0);
    return omega ? masked_perturb(base, *omega, recolored) : recolored;
  };

  BestIterate best(n, stride);
  AttackResult result;
  for (int it = 0; it < cfg.steps; ++it) {
    Tensor cand = build_candidate();
    LossEval ev = eval_objective(model, cand, labels, cfg, rng);
    {
      NoGradGuard guard;
      best.update(cand.detach(), ev.f6_rows, ev.preds);
    }
    result.loss_trace.push_back(ev.scalar.item());
    GradientMap grads = backward(ev.scalar);
    NoGradGuard guard;
    for (std::size_t i = 0; i < n; ++i) {
      if (!grads.contains(grids[i])) continue;  // fully gated-out example
      auto gv = grads.at(grids[i]).data();
      auto d = grids[i].data();
      for (std::size_t j = 0; j < d.size(); ++j) {
        const double s = gv[j] > 0.0 ? 1.0 : (gv[j] < 0.0 ? -1.0 : 0.0);
        const double bound = bounds[j % 3];
        d[j] = std::min(std::max(d[j] + step * s, -bound), bound);
      }
    }
  }
  {
    NoGradGuard guard;
    Tensor cand = build_candidate();
    LossEval ev = eval_objective(model, cand, labels, cfg, rng);
    best.update(cand, ev.f6_rows, ev.preds);
  }

  result.x_adv = best.assemble(x.shape());
  {
    // The interpolated displacement respects the channel bounds up to
    // rounding; the returned iterate must respect them exactly.
    auto out = result.x_adv.data();
    const std::size_t plane = x.shape()[2] * x.shape()[3];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double bound = bounds[(i / plane) % 3];
      const double xi = x.at(i);
      while (std::abs(out[i] - xi) > bound) out[i] = std::nextafter(out[i], xi);
    }
  }
  result.success = best.successes(labels);
  result.final_margin = best.margins();
  if (omega) result.mask = omega->detach();
  return result;
}

AttackResult run_attack(const Classifier& model, const Tensor& x,
                        const std::vector<int>& labels, const Tensor* omega,
                        const ThreatConfig& cfg, Rng& rng) {
  return cfg.kind == ThreatKind::additive ? pgd_attack(model, x, labels, omega, cfg, rng)
                                          : recolor_attack(model, x, labels, omega, cfg, rng);
}

}  // namespace unc
