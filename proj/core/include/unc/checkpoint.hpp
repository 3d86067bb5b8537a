#pragma once

#include <memory>
#include <string>

#include "unc/mask.hpp"
#include "unc/nn.hpp"
#include "unc/uncertainty.hpp"

namespace unc {

// UNCM checkpoint container: magic "UNCM", little-endian u16 format version,
// a kind tag, a JSON header carrying the architecture and tensor shape
// table, the 64-bit float payload (little-endian), and a CRC-32 of the
// payload. Round-trips are bit-exact.
inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(const FeedForwardClassifier& model, const std::string& path);
void save_checkpoint(const MeanFieldClassifier& model, const std::string& path);
void save_checkpoint(const SurrogateModel& model, const std::string& path);
void save_checkpoint(const MaskModel& model, const std::string& path);

// Kind tag without loading the payload ("deterministic", "dropout",
// "meanfield", "surrogate", "maskmodel").
std::string checkpoint_kind(const std::string& path);

FeedForwardClassifier load_feedforward_checkpoint(const std::string& path);
MeanFieldClassifier load_meanfield_checkpoint(const std::string& path);
SurrogateModel load_surrogate_checkpoint(const std::string& path);
MaskModel load_maskmodel_checkpoint(const std::string& path);

// Loads any classifier kind behind the common interface.
std::unique_ptr<Classifier> load_classifier_checkpoint(const std::string& path);

}  // namespace unc
