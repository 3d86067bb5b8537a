// Command-line driver: train classifiers (point-estimate, Bayesian
// mean-field), fit surrogate uncertainty and mask models, run masked and
// unmasked additive / recolor attacks, and evaluate the results.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>

#include "unc/checkpoint.hpp"
#include "unc/config.hpp"
#include "unc/errors.hpp"
#include "unc/evaluation.hpp"
#include "unc/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace unc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

struct RunContext {
  std::string command;
  ConfigMap config;
  std::uint64_t seed = 0;
  fs::path out;
  std::vector<std::string> outputs;

  fs::path path(const std::string& name) {
    outputs.push_back(name);
    return out / name;
  }
};

ConfigMap load_config(const CommonArgs& args) {
  if (args.config_path.empty()) throw ConfigError("config: no --config file given");
  if (!fs::exists(args.config_path)) {
    throw ConfigError("config: file does not exist: " + args.config_path);
  }
  return ConfigMap::parse_file(args.config_path);
}

RunContext make_context(const std::string& command, const CommonArgs& args) {
  RunContext ctx;
  ctx.command = command;
  ctx.config = load_config(args);
  if (args.seed) {
    ctx.config.set("run", "seed", std::to_string(*args.seed));
  }
  if (!ctx.config.has("run", "seed")) {
    throw ConfigError("config: missing required key [run] seed (or pass --seed)");
  }
  ctx.seed = ctx.config.get_u64("run", "seed", 0);
  ctx.out = args.out_dir.empty() ? fs::path(ctx.config.get("run", "out", "out"))
                                 : fs::path(args.out_dir);
  fs::create_directories(ctx.out);
  return ctx;
}

void write_manifest(RunContext& ctx) {
  json manifest;
  manifest["command"] = ctx.command;
  manifest["seed"] = ctx.seed;
  json cfg = json::object();
  for (const auto& [key, value] : ctx.config.entries()) cfg[key] = value;
  manifest["config"] = cfg;
  manifest["outputs"] = ctx.outputs;
  std::ofstream f(ctx.out / "manifest.json", std::ios::binary);
  if (!f) throw IoError("manifest: cannot write " + (ctx.out / "manifest.json").string());
  f << manifest.dump(2) << "\n";
}

void write_train_log(const TrainLog& log, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("train log: cannot write " + path.string());
  f << "epoch,mean_loss,accuracy\n";
  char buf[64];
  for (const EpochLog& e : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.9f,%.9f\n", e.epoch, e.mean_loss, e.accuracy);
    f << buf;
  }
}

Dataset train_split(const Dataset& full, const ConfigMap& cfg) {
  const double frac = cfg.get_double("data", "train_fraction", 1.0);
  const std::size_t n = static_cast<std::size_t>(frac * static_cast<double>(full.count));
  return frac >= 1.0 ? full : full.slice(0, n, "train");
}

Dataset eval_split(const Dataset& full, const ConfigMap& cfg) {
  const double frac = cfg.get_double("data", "train_fraction", 1.0);
  if (frac >= 1.0) return full;
  const std::size_t n = static_cast<std::size_t>(frac * static_cast<double>(full.count));
  return full.slice(n, full.count, "eval");
}

std::unique_ptr<Classifier> load_model_arg(const ConfigMap& cfg, const std::string& key) {
  const std::string path = cfg.require("model", key);
  if (!fs::exists(path)) throw ConfigError("config: referenced file does not exist: " + path);
  return load_classifier_checkpoint(path);
}

EvalOptions eval_options(const ConfigMap& cfg, const Classifier& model) {
  EvalOptions opts;
  if (model.is_stochastic()) {
    opts.stochastic_samples = cfg.get_int("eval", "samples", 10);
  }
  opts.batch_size = cfg.get_u64("eval", "batch", 128);
  opts.tau_eval = cfg.get_double("mask", "tau_eval", 0.1);
  opts.config_fingerprint = config_fingerprint(cfg);
  return opts;
}

void export_samples(const Dataset& data, const EvalReport& report, const Tensor& adv_batch,
                    RunContext& ctx, std::size_t count) {
  // First few clean/adversarial pairs for visual inspection.
  const std::size_t n = std::min<std::size_t>(count, report.rows.size());
  const std::size_t img = data.image_size();
  for (std::size_t i = 0; i < n; ++i) {
    export_image(data.image(i), (ctx.out / ("clean_" + std::to_string(i))).string());
    std::vector<double> v(adv_batch.data().begin() + i * img,
                          adv_batch.data().begin() + (i + 1) * img);
    Tensor adv = Tensor::from_vector(data.image_shape(), std::move(v));
    export_image(adv, (ctx.out / ("adv_" + std::to_string(i))).string());
  }
}

// ---- commands ------------------------------------------------------------

int cmd_synth(const CommonArgs& args) {
  RunContext ctx = make_context("synth", args);
  Dataset data = dataset_from_config(ctx.config, ctx.seed);
  if (data.channels != 1) {
    throw ConfigError("synth: IDX export supports single-channel kinds only");
  }
  save_idx(data, ctx.path("images.idx").string(), ctx.path("labels.idx").string());
  write_manifest(ctx);
  std::cout << "wrote " << data.count << " examples (" << data.provenance << ") to " << ctx.out
            << "\n";
  return kExitOk;
}

int cmd_train(const CommonArgs& args) {
  RunContext ctx = make_context("train", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset train = train_split(full, ctx.config);
  std::size_t boundary = 0;
  auto specs = model_from_config(ctx.config, train, &boundary);
  Rng rng(ctx.seed);
  FeedForwardClassifier model(specs, {train.channels, train.height, train.width},
                              train.class_count, boundary, rng);
  TrainLog log = train_classifier(model, train, optimizer_from_config(ctx.config), rng);
  save_checkpoint(model, ctx.path("model.uncm").string());
  write_train_log(log, ctx.path("train_log.csv"));
  write_manifest(ctx);
  if (!log.empty()) {
    std::cout << "final train accuracy " << log.back().accuracy << "\n";
  }
  return kExitOk;
}

int cmd_train_bayes(const CommonArgs& args) {
  RunContext ctx = make_context("train-bayes", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset train = train_split(full, ctx.config);
  std::size_t boundary = 0;
  ConfigMap cfg = ctx.config;
  cfg.set("model", "dropout", "0");  // mean-field takes no dropout layers
  auto specs = model_from_config(cfg, train, &boundary);
  Rng rng(ctx.seed);
  MeanFieldClassifier model(specs, {train.channels, train.height, train.width},
                            train.class_count, boundary, rng);
  TrainLog log = train_meanfield_classifier(model, train, optimizer_from_config(ctx.config),
                                            rng);
  save_checkpoint(model, ctx.path("bayes.uncm").string());
  write_train_log(log, ctx.path("train_log.csv"));
  write_manifest(ctx);
  if (!log.empty()) {
    std::cout << "final train accuracy " << log.back().accuracy << "\n";
  }
  return kExitOk;
}

int cmd_train_surrogate(const CommonArgs& args) {
  RunContext ctx = make_context("train-surrogate", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset train = train_split(full, ctx.config);
  auto classifier = load_model_arg(ctx.config, "classifier");
  Rng rng(ctx.seed);
  SurrogateModel surrogate(classifier->embedding_width(), classifier->class_count(), rng,
                           ctx.config.get_double("surrogate", "dropout", 0.1));
  TrainLog log = train_surrogate(*classifier, surrogate, train,
                                 surrogate_train_from_config(ctx.config), rng);
  save_checkpoint(surrogate, ctx.path("surrogate.uncm").string());
  write_train_log(log, ctx.path("train_log.csv"));
  write_manifest(ctx);
  return kExitOk;
}

int cmd_train_mask(const CommonArgs& args) {
  RunContext ctx = make_context("train-mask", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset train = train_split(full, ctx.config);
  auto classifier = load_model_arg(ctx.config, "classifier");
  Rng rng(ctx.seed);

  std::unique_ptr<SurrogateModel> surrogate;
  bool co_train = false;
  if (!classifier->is_stochastic()) {
    if (ctx.config.has("model", "surrogate")) {
      surrogate = std::make_unique<SurrogateModel>(
          load_surrogate_checkpoint(ctx.config.require("model", "surrogate")));
      co_train = ctx.config.get_bool("mask", "co_train_surrogate", false);
    } else {
      surrogate = std::make_unique<SurrogateModel>(classifier->embedding_width(),
                                                   classifier->class_count(), rng,
                                                   ctx.config.get_double("surrogate", "dropout", 0.1));
      co_train = true;
    }
  }

  MaskTrainConfig mcfg = mask_train_from_config(ctx.config);
  ThreatConfig threat = threat_from_config(ctx.config);
  MaskModel mask_model({train.channels, train.height, train.width}, rng);
  auto log = train_mask_model(*classifier, surrogate.get(), mask_model, train, threat, mcfg,
                              rng, co_train,
                              ctx.config.get_int("surrogate", "m", 5),
                              ctx.config.get_double("surrogate", "lr", 0.05));

  save_checkpoint(mask_model, ctx.path("mask.uncm").string());
  if (surrogate && co_train) {
    save_checkpoint(*surrogate, ctx.path("surrogate.uncm").string());
  }
  {
    std::ofstream f(ctx.path("mask_log.csv"), std::ios::binary);
    f << "step,tau,ue,adv,sparsity,total\n";
    char buf[160];
    for (const auto& e : log) {
      std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.9f,%.9f,%.9f,%.9f\n", e.step, e.tau,
                    e.terms.ue, e.terms.adv, e.terms.sparsity, e.terms.total);
      f << buf;
    }
  }
  // A few sampled masks for visual inspection.
  Rng mask_rng(Rng::mix(ctx.seed, 0x9a5c));
  for (std::size_t i = 0; i < std::min<std::size_t>(4, train.count); ++i) {
    Mask m = eval_mask(mask_model, train.image(i), mcfg.tau_eval, mask_rng);
    export_image(m.values, (ctx.out / ("mask_" + std::to_string(i))).string());
  }
  write_manifest(ctx);
  return kExitOk;
}

int cmd_attack(const CommonArgs& args) {
  RunContext ctx = make_context("attack", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset eval = eval_split(full, ctx.config);
  auto classifier = load_model_arg(ctx.config, "classifier");
  ThreatConfig threat = threat_from_config(ctx.config);

  std::unique_ptr<MaskModel> mask_model;
  if (ctx.config.has("model", "mask")) {
    mask_model =
        std::make_unique<MaskModel>(load_maskmodel_checkpoint(ctx.config.require("model", "mask")));
  }

  EvalOptions opts = eval_options(ctx.config, *classifier);
  EvalReport report =
      run_attack_eval(*classifier, eval, threat, mask_model.get(), ctx.seed, opts);
  emit_report(report, ctx.path("report.csv").string());

  // Re-attack the first few examples for image export.
  const std::size_t sample_count = std::min<std::size_t>(4, eval.count);
  if (sample_count > 0) {
    std::vector<std::size_t> idx(sample_count);
    for (std::size_t i = 0; i < sample_count; ++i) idx[i] = i;
    Tensor x = eval.batch(idx);
    Rng attack_rng(Rng::mix(ctx.seed, 0xa77ac4));
    Rng mask_rng(Rng::mix(ctx.seed, 0x3a5c01));
    std::optional<Tensor> gate;
    if (mask_model) {
      NoGradGuard guard;
      gate = harden_mask(sample_relaxed_mask(mask_model->probabilities(x), opts.tau_eval,
                                             mask_rng))
                 .values;
    }
    AttackResult res = run_attack(*classifier, x, eval.batch_labels(idx),
                                  gate ? &*gate : nullptr, threat, attack_rng);
    export_samples(eval, report, res.x_adv, ctx, sample_count);
  }
  write_manifest(ctx);
  std::cout << "clean accuracy " << report.clean_accuracy << ", post-attack accuracy "
            << report.post_attack_accuracy << ", mean l0 " << report.mean_l0_fraction << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args) {
  RunContext ctx = make_context("eval", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset eval = eval_split(full, ctx.config);
  auto classifier = load_model_arg(ctx.config, "classifier");
  EvalOptions opts = eval_options(ctx.config, *classifier);
  const double acc = accuracy(*classifier, eval, opts.stochastic_samples, ctx.seed);

  double mean_ue = 0.0, mean_ut = 0.0, mean_up = 0.0;
  bool have_uncertainty = false;
  const int T = ctx.config.get_int("eval", "samples", 10);
  std::unique_ptr<SurrogateModel> surrogate;
  if (ctx.config.has("model", "surrogate")) {
    surrogate = std::make_unique<SurrogateModel>(
        load_surrogate_checkpoint(ctx.config.require("model", "surrogate")));
  }
  const std::size_t probe = std::min<std::size_t>(eval.count, 256);
  if (classifier->is_stochastic() || surrogate) {
    Rng rng(Rng::mix(ctx.seed, 0xe7a1));
    for (std::size_t i = 0; i < probe; ++i) {
      UncertaintyEstimate est =
          classifier->is_stochastic()
              ? stochastic_uncertainty(*classifier, eval.image(i), T, rng)
              : amortized_uncertainty(*classifier, *surrogate, eval.image(i), T, rng);
      mean_ut += est.u_t;
      mean_up += est.u_p;
      mean_ue += est.u_e;
    }
    mean_ut /= probe;
    mean_up /= probe;
    mean_ue /= probe;
    have_uncertainty = true;
  }

  {
    std::ofstream f(ctx.path("eval.csv"), std::ios::binary);
    f << "metric,value\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "accuracy,%.9f\n", acc);
    f << buf;
    if (have_uncertainty) {
      std::snprintf(buf, sizeof(buf), "mean_u_t,%.9f\n", mean_ut);
      f << buf;
      std::snprintf(buf, sizeof(buf), "mean_u_p,%.9f\n", mean_up);
      f << buf;
      std::snprintf(buf, sizeof(buf), "mean_u_e,%.9f\n", mean_ue);
      f << buf;
    }
  }
  write_manifest(ctx);
  std::cout << "accuracy " << acc << "\n";
  return kExitOk;
}

int cmd_ablate(const CommonArgs& args) {
  RunContext ctx = make_context("ablate", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset eval = eval_split(full, ctx.config);
  auto classifier = load_model_arg(ctx.config, "classifier");
  ThreatConfig threat = threat_from_config(ctx.config);
  EvalOptions opts = eval_options(ctx.config, *classifier);

  // Optional lambda sweep: retrain a mask model per lambda value.
  if (ctx.config.has("ablate", "lambdas")) {
    Dataset train = train_split(full, ctx.config);
    std::unique_ptr<SurrogateModel> surrogate;
    Rng srng(Rng::mix(ctx.seed, 0x5a9));
    if (!classifier->is_stochastic()) {
      surrogate = std::make_unique<SurrogateModel>(classifier->embedding_width(),
                                                   classifier->class_count(), srng);
    }
    std::ofstream f(ctx.path("lambda_sweep.csv"), std::ios::binary);
    f << "lambda,post_attack_accuracy,mean_l0_fraction,mean_mask_density\n";
    std::stringstream ss(ctx.config.require("ablate", "lambdas"));
    std::string token;
    char buf[128];
    while (std::getline(ss, token, ',')) {
      MaskTrainConfig mcfg = mask_train_from_config(ctx.config);
      mcfg.lambda = std::stod(token);
      Rng rng(ctx.seed);
      MaskModel mask_model({train.channels, train.height, train.width}, rng);
      train_mask_model(*classifier, surrogate.get(), mask_model, train, threat, mcfg, rng);
      EvalReport rep = run_attack_eval(*classifier, eval, threat, &mask_model, ctx.seed, opts);
      std::snprintf(buf, sizeof(buf), "%s,%.9f,%.9f,%.9f\n", token.c_str(),
                    rep.post_attack_accuracy, rep.mean_l0_fraction, rep.mean_mask_density);
      f << buf;
    }
    write_manifest(ctx);
    return kExitOk;
  }

  MaskModel mask_model = load_maskmodel_checkpoint(ctx.config.require("model", "mask"));
  AblationReport ab =
      ablation_random_vs_uncertainty(*classifier, eval, mask_model, threat, ctx.seed, opts);

  // Both runs in one CSV, rows tagged by mask kind.
  std::ofstream f(ctx.path("ablate.csv"), std::ios::binary);
  f << "mask_kind,index,true_label,clean_pred,adv_pred,success,l0_fraction,linf,mask_density,"
       "loss_final\n";
  char buf[192];
  auto dump = [&](const char* kind, const EvalReport& rep) {
    for (const EvalRow& r : rep.rows) {
      std::snprintf(buf, sizeof(buf), "%s,%zu,%d,%d,%d,%d,%.9f,%.9f,%.9f,%.9f\n", kind, r.index,
                    r.true_label, r.clean_pred, r.adv_pred, r.success ? 1 : 0, r.l0_fraction,
                    r.linf, r.mask_density, r.loss_final);
      f << buf;
    }
    std::snprintf(buf, sizeof(buf), "%s,SUMMARY,%zu,%.9f,%.9f,%.9f,%.9f,0,%.9f,0\n", kind,
                  rep.rows.size(), rep.clean_accuracy, rep.post_attack_accuracy, rep.asr_drop,
                  rep.mean_l0_fraction, rep.mean_mask_density);
    f << buf;
  };
  dump("learned", ab.learned);
  dump("random", ab.random);
  write_manifest(ctx);
  std::cout << "learned-mask post accuracy " << ab.learned.post_attack_accuracy
            << ", random-mask post accuracy " << ab.random.post_attack_accuracy << "\n";
  return kExitOk;
}

int cmd_transfer(const CommonArgs& args) {
  RunContext ctx = make_context("transfer", args);
  Dataset full = dataset_from_config(ctx.config, ctx.seed);
  Dataset eval = eval_split(full, ctx.config);
  auto source = load_model_arg(ctx.config, "source");
  auto target = load_model_arg(ctx.config, "target");
  ThreatConfig threat = threat_from_config(ctx.config);
  EvalOptions opts = eval_options(ctx.config, *target);

  const double target_clean = accuracy(*target, eval, opts.stochastic_samples, ctx.seed);
  const double target_post = transferability_eval(*source, *target, eval, threat, ctx.seed,
                                                  opts);
  {
    std::ofstream f(ctx.path("transfer.csv"), std::ios::binary);
    char buf[96];
    f << "metric,value\n";
    std::snprintf(buf, sizeof(buf), "target_clean_accuracy,%.9f\n", target_clean);
    f << buf;
    std::snprintf(buf, sizeof(buf), "target_post_attack_accuracy,%.9f\n", target_post);
    f << buf;
  }
  write_manifest(ctx);
  std::cout << "target clean " << target_clean << " -> post " << target_post << "\n";
  return kExitOk;
}

int cmd_report(const std::string& in_path) {
  EvalReport report = parse_report(in_path);
  std::cout << "rows " << report.rows.size() << "\n"
            << "clean_accuracy " << report.clean_accuracy << "\n"
            << "post_attack_accuracy " << report.post_attack_accuracy << "\n"
            << "asr_drop " << report.asr_drop << "\n"
            << "mean_l0_fraction " << report.mean_l0_fraction << "\n"
            << "mean_mask_density " << report.mean_mask_density << "\n";
  return kExitOk;
}

int dispatch(const std::string& command, const CommonArgs& args);

int cmd_rerun(const std::string& manifest_path, const std::string& out_dir) {
  if (!fs::exists(manifest_path)) {
    throw ConfigError("rerun: manifest does not exist: " + manifest_path);
  }
  std::ifstream f(manifest_path);
  json manifest = json::parse(f);
  ConfigMap cfg;
  for (const auto& [key, value] : manifest.at("config").items()) {
    const auto dot = key.find('.');
    cfg.set(key.substr(0, dot), key.substr(dot + 1), value.get<std::string>());
  }
  // Re-dispatch through a temporary config file so the path is identical to
  // a fresh run.
  const fs::path tmp = fs::path(out_dir).empty() ? "rerun.ini" : fs::path(out_dir) / "rerun.ini";
  fs::create_directories(fs::path(out_dir));
  {
    std::string text;
    for (const auto& [key, value] : cfg.entries()) {
      const auto dot = key.find('.');
      text += "[" + key.substr(0, dot) + "]\n" + key.substr(dot + 1) + " = " + value + "\n";
    }
    std::ofstream tf(tmp, std::ios::binary);
    tf << text;
  }
  CommonArgs args;
  args.config_path = tmp.string();
  args.out_dir = out_dir;
  const int rc = dispatch(manifest.at("command").get<std::string>(), args);
  fs::remove(tmp);
  return rc;
}

int dispatch(const std::string& command, const CommonArgs& args) {
  if (command == "synth") return cmd_synth(args);
  if (command == "train") return cmd_train(args);
  if (command == "train-bayes") return cmd_train_bayes(args);
  if (command == "train-surrogate") return cmd_train_surrogate(args);
  if (command == "train-mask") return cmd_train_mask(args);
  if (command == "attack") return cmd_attack(args);
  if (command == "eval") return cmd_eval(args);
  if (command == "ablate") return cmd_ablate(args);
  if (command == "transfer") return cmd_transfer(args);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localized uncertainty attacks: training, masking, attack evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string report_in, manifest_path;

  auto add_common = [&](CLI::App* cmd, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "INI config file");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "Seed override (u64)");
    cmd->add_option("--out", args.out_dir, "Output directory");
  };

  add_common(app.add_subcommand("synth", "Generate a synthetic dataset as IDX files"));
  add_common(app.add_subcommand("train", "Train a feedforward classifier"));
  add_common(app.add_subcommand("train-bayes", "Train a mean-field variational classifier"));
  add_common(app.add_subcommand("train-surrogate", "Fit the surrogate uncertainty model"));
  add_common(app.add_subcommand("train-mask", "Train the mask model (joint objective)"));
  add_common(app.add_subcommand("attack", "Run an additive or recolor attack"));
  add_common(app.add_subcommand("eval", "Clean accuracy and uncertainty summary"));
  add_common(app.add_subcommand("ablate", "Learned vs random masks; lambda sweep"));
  add_common(app.add_subcommand("transfer", "Cross-model transferability"));

  auto* report_cmd = app.add_subcommand("report", "Summarize and verify a report CSV");
  report_cmd->add_option("--in", report_in, "report.csv path")->required();

  auto* rerun_cmd = app.add_subcommand("rerun", "Re-execute a run from its manifest");
  rerun_cmd->add_option("--manifest", manifest_path, "manifest.json path")->required();
  rerun_cmd->add_option("--out", args.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "report") return cmd_report(report_in);
    if (command == "rerun") return cmd_rerun(manifest_path, args.out_dir);
    return dispatch(command, args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
