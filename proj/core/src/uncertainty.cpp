#include "unc/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

constexpr double kSigmaFloor = 1e-6;

void validate_distribution(std::span<const double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw ValueError("invalid distribution: negative or non-finite probability");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6) {
    std::ostringstream os;
    os << "invalid distribution: probabilities sum to " << sum;
    throw ValueError(os.str());
  }
}

Tensor surrogate_prob_rows(const SurrogateModel& surrogate, const Tensor& h,
                           const Tensor& sig, const Tensor& eta) {
  Tensor z = add(h, mul(sig, eta));
  return softmax_lastdim(surrogate.head_logits(z));
}

}  // namespace

double entropy(std::span<const double> p) {
  validate_distribution(p);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

UncertaintyEstimate mutual_information(const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw ValueError("mutual_information: empty sample list");
  const std::size_t k = samples[0].size();
  const double t = static_cast<double>(samples.size());
  // Accumulate in sorted order so the estimate is exactly permutation
  // invariant, not just up to rounding.
  auto sorted_sum = [](std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  };
  std::vector<double> mean(k, 0.0);
  std::vector<double> column(samples.size());
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].size() != k) throw ValueError("mutual_information: ragged sample list");
      column[i] = samples[i][j];
    }
    mean[j] = sorted_sum(column) / t;
  }
  std::vector<double> entropies(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) entropies[i] = entropy(samples[i]);
  UncertaintyEstimate est;
  est.u_t = entropy(mean);
  est.u_p = sorted_sum(entropies) / t;
  est.u_e = est.u_t - est.u_p;
  est.sample_count = static_cast<int>(samples.size());
  return est;
}

UncertaintyEstimate stochastic_uncertainty(const Classifier& model, const Tensor& x, int T,
                                           Rng& rng) {
  return mutual_information(sample_posterior_predictives(model, x, T, rng));
}

SurrogateModel::SurrogateModel(std::size_t embedding_width, std::size_t class_count,
                               Rng& rng, double dropout_rate)
    : embedding_width_(embedding_width),
      class_count_(class_count),
      dropout_rate_(dropout_rate) {
  if (embedding_width_ == 0 || class_count_ < 2) {
    throw ValueError("surrogate: embedding width must be > 0 and class count >= 2");
  }
  if (dropout_rate_ < 0.0 || dropout_rate_ >= 1.0) {
    throw ValueError("surrogate: dropout rate must lie in [0,1)");
  }
  const std::size_t e = embedding_width_;
  auto init = [&](std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    return Tensor::uniform({rows, cols}, -limit, limit, rng, true);
  };
  tensors_.push_back(init(e, e));                  // w1
  tensors_.push_back(Tensor::zeros({e}, true));    // b1
  tensors_.push_back(init(e, e));                  // w2
  tensors_.push_back(Tensor::zeros({e}, true));    // b2
  tensors_.push_back(init(e, e));                  // w3
  // Bias the pre-softplus output toward a small initial sigma.
  tensors_.push_back(Tensor::full({e}, std::log(std::expm1(0.05)), true));  // b3
  tensors_.push_back(init(e, class_count_));       // head_W
  tensors_.push_back(Tensor::zeros({class_count_}, true));  // head_b
}

Tensor SurrogateModel::sigma(const Tensor& h, bool training, Rng* rng) const {
  if (h.ndim() != 2 || h.shape()[1] != embedding_width_) {
    throw ShapeError("surrogate sigma expects [N, " + std::to_string(embedding_width_) +
                     "], got " + shape_to_string(h.shape()));
  }
  Tensor a = relu(add_rowwise(matmul(h, tensors_[0]), tensors_[1]));
  if (training && dropout_rate_ > 0.0) {
    if (!rng) throw ValueError("surrogate sigma: training mode needs a generator");
    std::vector<double> m(a.numel());
    const double scale = 1.0 / (1.0 - dropout_rate_);
    for (auto& v : m) v = rng->uniform() < dropout_rate_ ? 0.0 : scale;
    a = mul(a, Tensor::from_vector(a.shape(), std::move(m)));
  }
  Tensor b = relu(add_rowwise(matmul(a, tensors_[2]), tensors_[3]));
  if (training && dropout_rate_ > 0.0) {
    std::vector<double> m(b.numel());
    const double scale = 1.0 / (1.0 - dropout_rate_);
    for (auto& v : m) v = rng->uniform() < dropout_rate_ ? 0.0 : scale;
    b = mul(b, Tensor::from_vector(b.shape(), std::move(m)));
  }
  Tensor raw = add_rowwise(matmul(b, tensors_[4]), tensors_[5]);
  return clamp_min(softplus(raw), kSigmaFloor);
}

Tensor SurrogateModel::head_logits(const Tensor& z) const {
  if (z.ndim() != 2 || z.shape()[1] != embedding_width_) {
    throw ShapeError("surrogate head expects [N, " + std::to_string(embedding_width_) +
                     "], got " + shape_to_string(z.shape()));
  }
  return add_rowwise(matmul(z, tensors_[6]), tensors_[7]);
}

std::vector<Tensor> SurrogateModel::parameters() const { return tensors_; }

std::vector<std::vector<double>> surrogate_sample_distributions(
    const Classifier& classifier, const SurrogateModel& surrogate, const Tensor& x, int T,
    Rng& rng) {
  if (T < 1) throw ValueError("surrogate_sample_distributions: T must be >= 1");
  if (classifier.embedding_width() != surrogate.embedding_width()) {
    throw ShapeError("surrogate trained for embedding width " +
                     std::to_string(surrogate.embedding_width()) + " but classifier embeds to " +
                     std::to_string(classifier.embedding_width()));
  }
  NoGradGuard guard;
  Tensor h = classifier.embed(x);
  Tensor sig = surrogate.sigma(h);
  std::vector<std::vector<double>> out;
  out.reserve(T);
  const std::size_t k = surrogate.class_count();
  for (int t = 0; t < T; ++t) {
    Tensor eta = Tensor::normal(h.shape(), 0.0, 1.0, rng);
    Tensor probs = surrogate_prob_rows(surrogate, h, sig, eta);
    const double* row = probs.data().data();
    out.emplace_back(row, row + k);
  }
  return out;
}

UncertaintyEstimate amortized_uncertainty(const Classifier& classifier,
                                          const SurrogateModel& surrogate, const Tensor& x,
                                          int T, Rng& rng) {
  return mutual_information(surrogate_sample_distributions(classifier, surrogate, x, T, rng));
}

double train_surrogate_step(const Classifier& classifier, SurrogateModel& surrogate,
                            const Tensor& x, const std::vector<int>& labels, int M,
                            double alpha, Rng& rng) {
  if (M < 1) throw ValueError("train_surrogate_step: M must be >= 1");
  Tensor h;
  {
    NoGradGuard guard;  // the classifier stays frozen
    h = classifier.embed(x);
  }
  Tensor sig = surrogate.sigma(h, /*training=*/true, &rng);
  Tensor loglik = Tensor::zeros({1});
  for (int i = 0; i < M; ++i) {
    Tensor eta = Tensor::normal(h.shape(), 0.0, 1.0, rng);
    Tensor z = add(h, mul(sig, eta));
    Tensor lp = pick_per_row(log_softmax_lastdim(surrogate.head_logits(z)), labels);
    loglik = add(loglik, mean(lp));
  }
  Tensor loss = neg(div(loglik, static_cast<double>(M)));
  if (!std::isfinite(loss.item())) {
    throw ValueError("train_surrogate_step: non-finite loss " + std::to_string(loss.item()));
  }
  for (Tensor p : surrogate.parameters()) p.zero_grad();
  GradientMap grads = backward(loss);
  for (Tensor p : surrogate.parameters()) {
    if (!grads.contains(p)) continue;
    auto g = grads.at(p).data();
    auto d = p.data();
    for (std::size_t j = 0; j < d.size(); ++j) d[j] -= alpha * g[j];
  }
  return loss.item();
}

TrainLog train_surrogate(const Classifier& classifier, SurrogateModel& surrogate,
                         const Dataset& data, const SurrogateTrainConfig& cfg, Rng& rng) {
  data.validate();
  TrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::vector<std::size_t> order(data.count);
    for (std::size_t i = 0; i < data.count; ++i) order[i] = i;
    for (std::size_t i = data.count; i > 1; --i) {
      std::swap(order[i - 1], order[rng.uniform_int(i)]);
    }
    for (std::size_t start = 0; start < data.count; start += cfg.batch_size) {
      const std::size_t end = std::min(data.count, start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      Tensor x = data.batch(idx);
      const double loss = train_surrogate_step(classifier, surrogate, x,
                                               data.batch_labels(idx),
                                               cfg.representation_samples,
                                               cfg.learning_rate, rng);
      loss_sum += loss * static_cast<double>(idx.size());
      seen += idx.size();
    }
    log.push_back({epoch, loss_sum / static_cast<double>(seen), 0.0});
  }
  return log;
}

Tensor entropy_rows(const Tensor& probs) {
  return neg(sum_lastdim(mul(probs, log(probs))));
}

Tensor mutual_information_rows(const std::vector<Tensor>& sample_probs) {
  if (sample_probs.empty()) throw ValueError("mutual_information_rows: empty sample list");
  const double t = static_cast<double>(sample_probs.size());
  Tensor mean_probs = sample_probs[0];
  for (std::size_t i = 1; i < sample_probs.size(); ++i) {
    mean_probs = add(mean_probs, sample_probs[i]);
  }
  mean_probs = div(mean_probs, t);
  Tensor u_t = entropy_rows(mean_probs);
  Tensor u_p = entropy_rows(sample_probs[0]);
  for (std::size_t i = 1; i < sample_probs.size(); ++i) {
    u_p = add(u_p, entropy_rows(sample_probs[i]));
  }
  u_p = div(u_p, t);
  return sub(u_t, u_p);
}

Tensor amortized_ue_rows(const Classifier& classifier, const SurrogateModel& surrogate,
                         const Tensor& x, const std::vector<Tensor>& noise) {
  if (noise.empty()) throw ValueError("amortized_ue_rows: empty noise list");
  if (classifier.embedding_width() != surrogate.embedding_width()) {
    throw ShapeError("surrogate trained for embedding width " +
                     std::to_string(surrogate.embedding_width()) + " but classifier embeds to " +
                     std::to_string(classifier.embedding_width()));
  }
  Tensor h = classifier.embed(x);
  Tensor sig = surrogate.sigma(h);
  std::vector<Tensor> samples;
  samples.reserve(noise.size());
  for (const Tensor& eta : noise) {
    samples.push_back(surrogate_prob_rows(surrogate, h, sig, eta));
  }
  return mutual_information_rows(samples);
}

Tensor stochastic_ue_rows(const Classifier& model, const Tensor& x,
                          const std::vector<PosteriorDraw>& draws) {
  if (draws.empty()) throw ValueError("stochastic_ue_rows: empty draw list");
  std::vector<Tensor> samples;
  samples.reserve(draws.size());
  for (const PosteriorDraw& draw : draws) {
    samples.push_back(softmax_lastdim(model.logits_under_draw(x, draw)));
  }
  return mutual_information_rows(samples);
}

}  // namespace unc
