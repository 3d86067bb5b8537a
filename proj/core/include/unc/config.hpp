#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unc/attacks.hpp"
#include "unc/dataset.hpp"
#include "unc/mask.hpp"
#include "unc/nn.hpp"
#include "unc/uncertainty.hpp"

namespace unc {

// Flat INI-style configuration: [section] headers, key = value lines,
// '#'/';' comments. Keys are addressed as "section.key".
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& fallback) const;
  std::string require(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  void set(const std::string& section, const std::string& key, const std::string& value);

  // Sorted "section.key = value" lines; the manifest and fingerprint basis.
  std::string canonical() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;  // "section.key" -> value
};

// CRC-32 (hex) of the canonical config text plus fixed evaluation constants.
std::string config_fingerprint(const ConfigMap& cfg);

// [data]: either kind=<synth kind> with n=..., or kind=idx with images=...
// labels=... paths (validated to exist at parse time).
Dataset dataset_from_config(const ConfigMap& cfg, std::uint64_t seed);

// [threat]
ThreatConfig threat_from_config(const ConfigMap& cfg);
// [mask]
MaskTrainConfig mask_train_from_config(const ConfigMap& cfg);
// [train]
OptimizerConfig optimizer_from_config(const ConfigMap& cfg);
// [surrogate]
SurrogateTrainConfig surrogate_train_from_config(const ConfigMap& cfg);

// [model]: arch = conv | dense, dropout = rate, hidden = width (dense only).
std::vector<LayerSpec> model_from_config(const ConfigMap& cfg, const Dataset& data,
                                         std::size_t* embedding_boundary);

}  // namespace unc
