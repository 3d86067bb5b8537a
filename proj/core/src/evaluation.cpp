#include "unc/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

// Independent per-purpose rng streams so that e.g. masked and unmasked runs
// share identical attack randomness.
constexpr std::uint64_t kStreamAttack = 0xa77ac4;
constexpr std::uint64_t kStreamMask = 0x3a5c01;
constexpr std::uint64_t kStreamPred = 0xc1ea90;

std::vector<int> predict_labels(const Classifier& model, const Tensor& x,
                                std::optional<int> stochastic_samples, Rng& rng) {
  NoGradGuard guard;
  const std::size_t n = x.shape()[0];
  const std::size_t k = model.class_count();
  Tensor scores;
  if (model.is_stochastic() && stochastic_samples && *stochastic_samples > 1) {
    for (int t = 0; t < *stochastic_samples; ++t) {
      Tensor probs = softmax_lastdim(model.logits_under_draw(x, model.sample_draw(rng)));
      scores = t == 0 ? probs : add(scores, probs);
    }
  } else {
    scores = model.predict_logits(x);
  }
  std::vector<int> preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.data().data() + i * k;
    preds[i] = static_cast<int>(std::max_element(row, row + k) - row);
  }
  return preds;
}

std::vector<std::vector<std::size_t>> fixed_batches(std::size_t count, std::size_t batch) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < count; start += batch) {
    const std::size_t end = std::min(count, start + batch);
    std::vector<std::size_t> idx(end - start);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = start + i;
    out.push_back(std::move(idx));
  }
  return out;
}

void append_csv_value(std::string& line, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  line += buf;
}

EvalReport attack_eval_impl(const Classifier& model, const Dataset& data,
                            const ThreatConfig& threat, const MaskModel* mask_model,
                            const std::vector<double>* fixed_mask_density,
                            std::uint64_t seed, const EvalOptions& opts,
                            std::vector<double>* densities_out) {
  data.validate();
  EvalReport report;
  report.seed = seed;
  report.config_fingerprint = opts.config_fingerprint;

  const std::size_t img = data.image_size();
  std::size_t batch_index = 0;
  for (const auto& idx : fixed_batches(data.count, opts.batch_size)) {
    Tensor x = data.batch(idx);
    const std::vector<int> y = data.batch_labels(idx);
    Rng attack_rng(Rng::mix(seed, kStreamAttack + batch_index));
    Rng mask_rng(Rng::mix(seed, kStreamMask + batch_index));
    Rng clean_pred_rng(Rng::mix(seed, kStreamPred + batch_index));
    Rng adv_pred_rng(Rng::mix(seed, kStreamPred + batch_index));

    std::optional<Tensor> gate;
    if (mask_model) {
      NoGradGuard guard;
      Tensor probs = mask_model->probabilities(x);
      gate = harden_mask(sample_relaxed_mask(probs, opts.tau_eval, mask_rng)).values;
    } else if (fixed_mask_density) {
      NoGradGuard guard;
      const double density = (*fixed_mask_density)[0];
      gate = random_mask(x.shape(), density, mask_rng).values;
    }

    const std::vector<int> clean_preds =
        predict_labels(model, x, opts.stochastic_samples, clean_pred_rng);
    AttackResult res =
        run_attack(model, x, y, gate ? &*gate : nullptr, threat, attack_rng);
    const std::vector<int> adv_preds =
        predict_labels(model, res.x_adv, opts.stochastic_samples, adv_pred_rng);

    for (std::size_t b = 0; b < idx.size(); ++b) {
      EvalRow row;
      row.index = idx[b];
      row.true_label = y[b];
      row.clean_pred = clean_preds[b];
      row.adv_pred = adv_preds[b];
      row.success = adv_preds[b] != y[b];
      double linf = 0.0;
      std::size_t changed = 0;
      for (std::size_t j = 0; j < img; ++j) {
        const double diff = std::abs(res.x_adv.at(b * img + j) - x.at(b * img + j));
        linf = std::max(linf, diff);
        if (diff > 1e-9) ++changed;
      }
      row.l0_fraction = static_cast<double>(changed) / static_cast<double>(img);
      row.linf = linf;
      if (gate) {
        double ones = 0.0;
        for (std::size_t j = 0; j < img; ++j) ones += gate->at(b * img + j);
        row.mask_density = ones / static_cast<double>(img);
      }
      row.loss_final = res.final_margin[b];
      if (densities_out) densities_out->push_back(row.mask_density);
      report.rows.push_back(row);
    }
    ++batch_index;
  }
  report.recompute_aggregates();
  return report;
}

}  // namespace

void EvalReport::recompute_aggregates() {
  if (rows.empty()) {
    clean_accuracy = post_attack_accuracy = asr_drop = 0.0;
    mean_l0_fraction = mean_mask_density = 0.0;
    return;
  }
  const double n = static_cast<double>(rows.size());
  double clean = 0.0, post = 0.0, l0 = 0.0, density = 0.0;
  for (const EvalRow& r : rows) {
    clean += r.clean_pred == r.true_label ? 1.0 : 0.0;
    post += r.adv_pred == r.true_label ? 1.0 : 0.0;
    l0 += r.l0_fraction;
    density += r.mask_density;
  }
  clean_accuracy = clean / n;
  post_attack_accuracy = post / n;
  asr_drop = clean_accuracy - post_attack_accuracy;
  mean_l0_fraction = l0 / n;
  mean_mask_density = density / n;
}

double accuracy(const Classifier& model, const Dataset& data,
                std::optional<int> stochastic_samples, std::uint64_t seed) {
  data.validate();
  std::size_t hits = 0;
  std::size_t batch_index = 0;
  for (const auto& idx : fixed_batches(data.count, 256)) {
    Rng rng(Rng::mix(seed, kStreamPred + batch_index));
    Tensor x = data.batch(idx);
    const std::vector<int> y = data.batch_labels(idx);
    const std::vector<int> preds = predict_labels(model, x, stochastic_samples, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) hits += preds[i] == y[i];
    ++batch_index;
  }
  return static_cast<double>(hits) / static_cast<double>(data.count);
}

double l0_sparsity_fraction(const Tensor& x, const Tensor& x_adv) {
  assert_same_shape(x, x_adv, "l0_sparsity_fraction");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (std::abs(x.at(i) - x_adv.at(i)) > 1e-9) ++changed;
  }
  return static_cast<double>(changed) / static_cast<double>(x.numel());
}

double categorical_kl(std::span<const double> p, std::span<const double> q, double eps) {
  if (p.size() != q.size()) throw ValueError("categorical_kl: size mismatch");
  const double norm = 1.0 + eps * static_cast<double>(p.size());
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double ps = (p[i] + eps) / norm;
    const double qs = (q[i] + eps) / norm;
    kl += ps * std::log(ps / qs);
  }
  return kl;
}

EvalReport run_attack_eval(const Classifier& model, const Dataset& data,
                           const ThreatConfig& threat, const MaskModel* mask_model,
                           std::uint64_t seed, const EvalOptions& opts) {
  return attack_eval_impl(model, data, threat, mask_model, nullptr, seed, opts, nullptr);
}

double transferability_eval(const Classifier& source, const Classifier& target,
                            const Dataset& data, const ThreatConfig& threat,
                            std::uint64_t seed, const EvalOptions& opts) {
  data.validate();
  if (source.input_shape() != target.input_shape() ||
      source.class_count() != target.class_count()) {
    throw ValueError("transferability_eval: source and target models are incompatible");
  }
  std::size_t hits = 0;
  std::size_t batch_index = 0;
  for (const auto& idx : fixed_batches(data.count, opts.batch_size)) {
    Tensor x = data.batch(idx);
    const std::vector<int> y = data.batch_labels(idx);
    Rng attack_rng(Rng::mix(seed, kStreamAttack + batch_index));
    Rng pred_rng(Rng::mix(seed, kStreamPred + batch_index));
    AttackResult res = run_attack(source, x, y, nullptr, threat, attack_rng);
    const std::vector<int> preds =
        predict_labels(target, res.x_adv, opts.stochastic_samples, pred_rng);
    for (std::size_t i = 0; i < idx.size(); ++i) hits += preds[i] == y[i];
    ++batch_index;
  }
  return static_cast<double>(hits) / static_cast<double>(data.count);
}

AblationReport ablation_random_vs_uncertainty(const Classifier& model, const Dataset& data,
                                              const MaskModel& mask_model,
                                              const ThreatConfig& threat, std::uint64_t seed,
                                              const EvalOptions& opts) {
  AblationReport out;
  std::vector<double> densities;
  out.learned = attack_eval_impl(model, data, threat, &mask_model, nullptr, seed, opts,
                                 &densities);
  double mean_density = 0.0;
  for (double d : densities) mean_density += d;
  mean_density /= static_cast<double>(densities.size());
  out.learned_density = mean_density;

  const std::vector<double> fixed{mean_density};
  out.random = attack_eval_impl(model, data, threat, nullptr, &fixed, seed, opts, nullptr);
  out.random_density = out.random.mean_mask_density;
  return out;
}

std::pair<double, double> surrogate_fidelity(const Classifier& deterministic,
                                             const SurrogateModel& surrogate,
                                             const Classifier& meanfield, const Dataset& data,
                                             int T, std::uint64_t seed) {
  data.validate();
  if (T < 1) throw ValueError("surrogate_fidelity: T must be >= 1");
  if (!meanfield.is_stochastic()) {
    throw UnsupportedModelError("surrogate_fidelity: third model must be stochastic");
  }
  NoGradGuard guard;
  const std::size_t k = deterministic.class_count();
  double kl_d = 0.0, kl_s = 0.0;
  std::size_t batch_index = 0;
  for (const auto& idx : fixed_batches(data.count, 256)) {
    Rng rng(Rng::mix(seed, kStreamPred + batch_index));
    Tensor x = data.batch(idx);
    const std::size_t n = idx.size();

    Tensor p_d = softmax_lastdim(deterministic.predict_logits(x));

    Tensor p_m;
    for (int t = 0; t < T; ++t) {
      Tensor probs = softmax_lastdim(meanfield.logits_under_draw(x, meanfield.sample_draw(rng)));
      p_m = t == 0 ? probs : add(p_m, probs);
    }
    p_m = div(p_m, static_cast<double>(T));

    Tensor h = deterministic.embed(x);
    Tensor sig = surrogate.sigma(h);
    Tensor p_s;
    for (int t = 0; t < T; ++t) {
      Tensor eta = Tensor::normal(h.shape(), 0.0, 1.0, rng);
      Tensor probs = softmax_lastdim(surrogate.head_logits(add(h, mul(sig, eta))));
      p_s = t == 0 ? probs : add(p_s, probs);
    }
    p_s = div(p_s, static_cast<double>(T));

    for (std::size_t i = 0; i < n; ++i) {
      auto row = [&](const Tensor& t) {
        return std::span<const double>(t.data().data() + i * k, k);
      };
      kl_d += categorical_kl(row(p_d), row(p_m));
      kl_s += categorical_kl(row(p_s), row(p_m));
    }
    ++batch_index;
  }
  const double n = static_cast<double>(data.count);
  return {kl_d / n, kl_s / n};
}

void emit_report(const EvalReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("report: cannot write " + path);
  std::string out;
  out += "# fingerprint=" + report.config_fingerprint + " seed=" + std::to_string(report.seed) +
         "\n";
  out += "index,true_label,clean_pred,adv_pred,success,l0_fraction,linf,mask_density,loss_final\n";
  double max_linf = 0.0, mean_loss = 0.0;
  for (const EvalRow& r : report.rows) {
    out += std::to_string(r.index) + "," + std::to_string(r.true_label) + "," +
           std::to_string(r.clean_pred) + "," + std::to_string(r.adv_pred) + "," +
           (r.success ? "1" : "0") + ",";
    append_csv_value(out, r.l0_fraction);
    out += ",";
    append_csv_value(out, r.linf);
    out += ",";
    append_csv_value(out, r.mask_density);
    out += ",";
    append_csv_value(out, r.loss_final);
    out += "\n";
    max_linf = std::max(max_linf, r.linf);
    mean_loss += r.loss_final;
  }
  mean_loss = report.rows.empty() ? 0.0 : mean_loss / static_cast<double>(report.rows.size());
  out += "SUMMARY," + std::to_string(report.rows.size()) + ",";
  append_csv_value(out, report.clean_accuracy);
  out += ",";
  append_csv_value(out, report.post_attack_accuracy);
  out += ",";
  append_csv_value(out, report.asr_drop);
  out += ",";
  append_csv_value(out, report.mean_l0_fraction);
  out += ",";
  append_csv_value(out, max_linf);
  out += ",";
  append_csv_value(out, report.mean_mask_density);
  out += ",";
  append_csv_value(out, mean_loss);
  out += "\n";
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("report: short write to " + path);
}

EvalReport parse_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("report: cannot open " + path);
  EvalReport report;
  std::string line;
  bool summary_seen = false;
  double summary_clean = 0.0, summary_post = 0.0, summary_l0 = 0.0;
  std::size_t summary_count = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto fp = line.find("fingerprint=");
      const auto sd = line.find(" seed=");
      if (fp != std::string::npos && sd != std::string::npos) {
        report.config_fingerprint = line.substr(fp + 12, sd - fp - 12);
        report.seed = std::stoull(line.substr(sd + 6));
      }
      continue;
    }
    if (line.rfind("index,", 0) == 0) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 9) throw IoError("report: malformed row in " + path);
    if (cells[0] == "SUMMARY") {
      summary_seen = true;
      summary_count = std::stoull(cells[1]);
      summary_clean = std::stod(cells[2]);
      summary_post = std::stod(cells[3]);
      summary_l0 = std::stod(cells[5]);
      continue;
    }
    EvalRow r;
    r.index = std::stoull(cells[0]);
    r.true_label = std::stoi(cells[1]);
    r.clean_pred = std::stoi(cells[2]);
    r.adv_pred = std::stoi(cells[3]);
    r.success = cells[4] == "1";
    r.l0_fraction = std::stod(cells[5]);
    r.linf = std::stod(cells[6]);
    r.mask_density = std::stod(cells[7]);
    r.loss_final = std::stod(cells[8]);
    report.rows.push_back(r);
  }
  if (!summary_seen) throw IoError("report: missing SUMMARY row in " + path);
  report.recompute_aggregates();
  if (report.rows.size() != summary_count ||
      std::abs(report.clean_accuracy - summary_clean) > 1e-6 ||
      std::abs(report.post_attack_accuracy - summary_post) > 1e-6 ||
      std::abs(report.mean_l0_fraction - summary_l0) > 1e-6) {
    throw IoError("report: summary row does not match per-example rows in " + path);
  }
  return report;
}

}  // namespace unc
