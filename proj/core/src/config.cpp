#include "unc/config.hpp"

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "unc/errors.hpp"

namespace unc {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_string(ss.str(), path);
}

ConfigMap ConfigMap::parse_string(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  std::string section;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') {
        throw ConfigError("config: unterminated section header at " + origin + ":" +
                          std::to_string(lineno));
      }
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) {
        throw ConfigError("config: empty section name at " + origin + ":" +
                          std::to_string(lineno));
      }
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config: expected key = value at " + origin + ":" +
                        std::to_string(lineno));
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty() || section.empty()) {
      throw ConfigError("config: key outside a section at " + origin + ":" +
                        std::to_string(lineno));
    }
    cfg.values_[section + "." + key] = trim(t.substr(eq + 1));
  }
  return cfg;
}

bool ConfigMap::has(const std::string& section, const std::string& key) const {
  return values_.count(section + "." + key) != 0;
}

std::string ConfigMap::get(const std::string& section, const std::string& key,
                           const std::string& fallback) const {
  const auto it = values_.find(section + "." + key);
  return it == values_.end() ? fallback : it->second;
}

std::string ConfigMap::require(const std::string& section, const std::string& key) const {
  const auto it = values_.find(section + "." + key);
  if (it == values_.end()) {
    throw ConfigError("config: missing required key [" + section + "] " + key);
  }
  return it->second;
}

double ConfigMap::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stod(get(section, key, ""));
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not a number");
  }
}

std::uint64_t ConfigMap::get_u64(const std::string& section, const std::string& key,
                                 std::uint64_t fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoull(get(section, key, ""));
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not an unsigned integer");
  }
}

int ConfigMap::get_int(const std::string& section, const std::string& key, int fallback) const {
  if (!has(section, key)) return fallback;
  try {
    return std::stoi(get(section, key, ""));
  } catch (const std::exception&) {
    throw ConfigError("config: [" + section + "] " + key + " is not an integer");
  }
}

bool ConfigMap::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string v = get(section, key, "");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: [" + section + "] " + key + " is not a boolean");
}

void ConfigMap::set(const std::string& section, const std::string& key,
                    const std::string& value) {
  values_[section + "." + key] = value;
}

std::string ConfigMap::canonical() const {
  std::string out;
  for (const auto& [key, value] : values_) {
    out += key + " = " + value + "\n";
  }
  return out;
}

std::string config_fingerprint(const ConfigMap& cfg) {
  // The KL smoothing and l0 thresholds are part of every reported number.
  const std::string basis = cfg.canonical() + "kl_smoothing = 1e-12\nl0_threshold = 1e-9\n";
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(basis.data()),
                          static_cast<uInt>(basis.size()));
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

Dataset dataset_from_config(const ConfigMap& cfg, std::uint64_t seed) {
  const std::string kind = cfg.require("data", "kind");
  if (kind == "idx") {
    const std::string images = cfg.require("data", "images");
    const std::string labels = cfg.require("data", "labels");
    for (const std::string& p : {images, labels}) {
      if (!std::filesystem::exists(p)) {
        throw ConfigError("config: referenced file does not exist: " + p);
      }
    }
    return load_idx(images, labels);
  }
  const std::size_t n = cfg.get_u64("data", "n", 1000);
  const std::uint64_t data_seed = cfg.get_u64("data", "seed", seed);
  return synth_dataset(synth_kind_from_string(kind), n, data_seed);
}

ThreatConfig threat_from_config(const ConfigMap& cfg) {
  ThreatConfig t;
  t.kind = threat_kind_from_string(cfg.get("threat", "kind", "additive"));
  t.epsilon = cfg.get_double("threat", "epsilon", t.epsilon);
  const double bound = cfg.get_double("threat", "channel_bound", 0.03);
  t.bound_r = cfg.get_double("threat", "bound_r", bound);
  t.bound_g = cfg.get_double("threat", "bound_g", bound);
  t.bound_b = cfg.get_double("threat", "bound_b", bound);
  t.steps = cfg.get_int("threat", "steps", t.steps);
  t.step_size = cfg.get_double("threat", "step_size", t.step_size);
  t.kappa = cfg.get_double("threat", "kappa", t.kappa);
  t.loss = loss_kind_from_string(cfg.get("threat", "loss", "f6"));
  t.posterior_samples = cfg.get_int("threat", "samples", t.posterior_samples);
  t.grid_resolution = cfg.get_u64("threat", "grid", t.grid_resolution);
  t.random_start = cfg.get_bool("threat", "random_start", t.random_start);
  t.validate();
  return t;
}

MaskTrainConfig mask_train_from_config(const ConfigMap& cfg) {
  MaskTrainConfig m;
  m.lambda = cfg.get_double("mask", "lambda", m.lambda);
  m.tau_start = cfg.get_double("mask", "tau_start", m.tau_start);
  m.tau_end = cfg.get_double("mask", "tau_end", m.tau_end);
  m.tau_eval = cfg.get_double("mask", "tau_eval", m.tau_eval);
  m.learning_rate = cfg.get_double("mask", "lr", m.learning_rate);
  m.uncertainty_samples = cfg.get_int("mask", "samples", m.uncertainty_samples);
  m.inner_attack_steps = cfg.get_int("mask", "inner_steps", m.inner_attack_steps);
  m.steps = cfg.get_u64("mask", "steps", m.steps);
  m.batch_size = cfg.get_u64("mask", "batch", m.batch_size);
  m.validate();
  return m;
}

OptimizerConfig optimizer_from_config(const ConfigMap& cfg) {
  OptimizerConfig o;
  o.learning_rate = cfg.get_double("train", "lr", o.learning_rate);
  o.momentum = cfg.get_double("train", "momentum", o.momentum);
  o.batch_size = cfg.get_u64("train", "batch", o.batch_size);
  o.epochs = cfg.get_u64("train", "epochs", o.epochs);
  return o;
}

SurrogateTrainConfig surrogate_train_from_config(const ConfigMap& cfg) {
  SurrogateTrainConfig s;
  s.representation_samples = cfg.get_int("surrogate", "m", s.representation_samples);
  s.learning_rate = cfg.get_double("surrogate", "lr", s.learning_rate);
  s.batch_size = cfg.get_u64("surrogate", "batch", s.batch_size);
  s.epochs = cfg.get_u64("surrogate", "epochs", s.epochs);
  return s;
}

std::vector<LayerSpec> model_from_config(const ConfigMap& cfg, const Dataset& data,
                                         std::size_t* embedding_boundary) {
  const std::string arch = cfg.get("model", "arch", "conv");
  const double dropout = cfg.get_double("model", "dropout", 0.0);
  if (arch == "conv") {
    if (embedding_boundary) *embedding_boundary = conv_image_embedding_boundary(dropout);
    return conv_image_architecture(data.channels, data.height, data.width, data.class_count,
                                   dropout);
  }
  if (arch == "dense") {
    if (dropout > 0.0) {
      throw ConfigError("config: dense architecture does not take dropout here");
    }
    const std::size_t hidden = cfg.get_u64("model", "hidden", 32);
    if (embedding_boundary) *embedding_boundary = 3;
    return dense_architecture(data.image_size(), hidden, data.class_count);
  }
  throw ConfigError("config: unknown model arch '" + arch + "'");
}

}  // namespace unc
