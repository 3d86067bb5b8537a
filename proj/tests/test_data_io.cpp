#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "testutil.hpp"
#include "unc/checkpoint.hpp"
#include "unc/config.hpp"
#include "unc/dataset.hpp"
#include "unc/image_io.hpp"

using namespace unc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("unc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static inline int counter = 0;
};

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> idx_image_header(std::uint32_t n, std::uint32_t rows,
                                            std::uint32_t cols) {
  std::vector<unsigned char> b;
  auto be = [&](std::uint32_t v) {
    b.push_back(v >> 24);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back(v & 0xff);
  };
  be(0x00000803);
  be(n);
  be(rows);
  be(cols);
  return b;
}

std::vector<unsigned char> idx_label_bytes(const std::vector<unsigned char>& labels) {
  std::vector<unsigned char> b;
  auto be = [&](std::uint32_t v) {
    b.push_back(v >> 24);
    b.push_back((v >> 16) & 0xff);
    b.push_back((v >> 8) & 0xff);
    b.push_back(v & 0xff);
  };
  be(0x00000801);
  be(static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

}  // namespace

TEST_CASE("idx: minimal hand-built file parses per the format definition") {
  TempDir dir;
  std::vector<unsigned char> img = idx_image_header(1, 28, 28);
  img.resize(img.size() + 784, 0);
  img[16] = 255;  // first pixel
  img[17] = 128;
  write_bytes(dir.file("images.idx"), img);
  write_bytes(dir.file("labels.idx"), idx_label_bytes({7}));

  Dataset d = load_idx(dir.file("images.idx"), dir.file("labels.idx"));
  CHECK(d.count == 1);
  CHECK(d.channels == 1);
  CHECK(d.height == 28);
  CHECK(d.width == 28);
  CHECK(d.images[0] == doctest::Approx(1.0));  // byte 255 scales to 1.0
  CHECK(d.images[1] == doctest::Approx(128.0 / 255.0));
  CHECK(d.labels[0] == 7);
}

TEST_CASE("idx: magic, truncation, and count mismatches are rejected") {
  TempDir dir;
  // Image magic passed as labels file.
  std::vector<unsigned char> img = idx_image_header(1, 2, 2);
  img.resize(img.size() + 4, 10);
  write_bytes(dir.file("images.idx"), img);
  write_bytes(dir.file("bad_labels.idx"), img);
  CHECK_THROWS_WITH_AS(load_idx(dir.file("images.idx"), dir.file("bad_labels.idx")),
                       doctest::Contains("magic"), IoError);

  // Truncated pixel payload.
  std::vector<unsigned char> trunc = idx_image_header(2, 2, 2);
  trunc.resize(trunc.size() + 5, 10);  // needs 8 bytes
  write_bytes(dir.file("trunc.idx"), trunc);
  write_bytes(dir.file("labels2.idx"), idx_label_bytes({0, 1}));
  CHECK_THROWS_WITH_AS(load_idx(dir.file("trunc.idx"), dir.file("labels2.idx")),
                       doctest::Contains("truncated"), IoError);

  // Image/label count mismatch.
  write_bytes(dir.file("labels3.idx"), idx_label_bytes({0, 1, 2}));
  std::vector<unsigned char> ok = idx_image_header(2, 2, 2);
  ok.resize(ok.size() + 8, 10);
  write_bytes(dir.file("ok.idx"), ok);
  CHECK_THROWS_AS(load_idx(dir.file("ok.idx"), dir.file("labels3.idx")), IoError);

  CHECK_THROWS_WITH_AS(load_idx(dir.file("nope.idx"), dir.file("labels2.idx")),
                       doctest::Contains("nope.idx"), IoError);
}

TEST_CASE("idx: exported synthetic data round-trips exactly") {
  TempDir dir;
  Dataset d = synth_dataset(SynthKind::digits, 24, 3);
  save_idx(d, dir.file("a_images.idx"), dir.file("a_labels.idx"));
  Dataset loaded = load_idx(dir.file("a_images.idx"), dir.file("a_labels.idx"));
  CHECK(loaded.count == d.count);
  CHECK(loaded.labels == d.labels);
  save_idx(loaded, dir.file("b_images.idx"), dir.file("b_labels.idx"));
  CHECK(read_bytes(dir.file("a_images.idx")) == read_bytes(dir.file("b_images.idx")));
  CHECK(read_bytes(dir.file("a_labels.idx")) == read_bytes(dir.file("b_labels.idx")));

  Dataset colored = synth_dataset(SynthKind::colored_shapes, 4, 3);
  CHECK_THROWS_AS(save_idx(colored, dir.file("c.idx"), dir.file("cl.idx")), IoError);
}

TEST_CASE("synthetic datasets: determinism and label balance") {
  for (SynthKind kind : {SynthKind::gaussian_blobs, SynthKind::two_moons_images,
                         SynthKind::colored_shapes, SynthKind::digits}) {
    Dataset a = synth_dataset(kind, 60, 11);
    Dataset b = synth_dataset(kind, 60, 11);
    CHECK(a.images == b.images);
    CHECK(a.labels == b.labels);
    a.validate();

    std::vector<int> counts(a.class_count, 0);
    for (int y : a.labels) counts[y]++;
    const int lo = *std::min_element(counts.begin(), counts.end());
    const int hi = *std::max_element(counts.begin(), counts.end());
    CHECK(hi - lo <= 1);
  }
  CHECK_THROWS_AS(synth_kind_from_string("no_such_kind"), ValueError);
  CHECK_THROWS_AS(synth_dataset(SynthKind::digits, 0, 1), ValueError);
}

TEST_CASE("checkpoints: feedforward round-trip is bit-exact on 100 inputs") {
  TempDir dir;
  Rng rng(5);
  auto specs = conv_image_architecture(1, 8, 8, 4);
  FeedForwardClassifier model(specs, {1, 8, 8}, 4, conv_image_embedding_boundary(), rng);
  save_checkpoint(model, dir.file("m.uncm"));
  CHECK(checkpoint_kind(dir.file("m.uncm")) == "deterministic");
  FeedForwardClassifier loaded = load_feedforward_checkpoint(dir.file("m.uncm"));

  NoGradGuard guard;
  for (int i = 0; i < 100; ++i) {
    Tensor x = Tensor::uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
    CHECK(testutil::bits_equal(model.predict_logits(x), loaded.predict_logits(x)));
  }
}

TEST_CASE("checkpoints: all model kinds round-trip") {
  TempDir dir;
  Rng rng(7);

  std::vector<LayerSpec> dropout_specs{LayerSpec::Flatten(), LayerSpec::Dense(16, 8),
                                       LayerSpec::Relu(), LayerSpec::Dropout(0.25),
                                       LayerSpec::Dense(8, 3)};
  FeedForwardClassifier dropout_model(dropout_specs, {1, 4, 4}, 3, 3, rng);
  save_checkpoint(dropout_model, dir.file("d.uncm"));
  CHECK(checkpoint_kind(dir.file("d.uncm")) == "dropout");
  FeedForwardClassifier d2 = load_feedforward_checkpoint(dir.file("d.uncm"));
  CHECK(d2.is_stochastic());

  MeanFieldClassifier mf(dense_architecture(16, 8, 3), {1, 4, 4}, 3, 3, rng);
  save_checkpoint(mf, dir.file("mf.uncm"));
  MeanFieldClassifier mf2 = load_meanfield_checkpoint(dir.file("mf.uncm"));
  NoGradGuard guard;
  Tensor x = Tensor::uniform({2, 1, 4, 4}, 0.0, 1.0, rng);
  CHECK(testutil::bits_equal(mf.predict_logits(x), mf2.predict_logits(x)));
  CHECK(mf.kl_to_standard_normal().item() == mf2.kl_to_standard_normal().item());

  SurrogateModel sur(8, 3, rng, 0.15);
  save_checkpoint(sur, dir.file("s.uncm"));
  SurrogateModel sur2 = load_surrogate_checkpoint(dir.file("s.uncm"));
  CHECK(sur2.dropout_rate() == 0.15);
  Tensor h = Tensor::uniform({1, 8}, -1.0, 1.0, rng);
  CHECK(testutil::bits_equal(sur.sigma(h), sur2.sigma(h)));

  MaskModel mask({1, 8, 8}, rng, 4, 8);
  save_checkpoint(mask, dir.file("k.uncm"));
  MaskModel mask2 = load_maskmodel_checkpoint(dir.file("k.uncm"));
  Tensor img = Tensor::uniform({1, 1, 8, 8}, 0.0, 1.0, rng);
  CHECK(testutil::bits_equal(mask.probabilities(img), mask2.probabilities(img)));

  auto any = load_classifier_checkpoint(dir.file("mf.uncm"));
  CHECK(any->kind_tag() == "meanfield");
  CHECK_THROWS_AS(load_classifier_checkpoint(dir.file("k.uncm")), IoError);
}

TEST_CASE("checkpoints: corruption and version gates") {
  TempDir dir;
  Rng rng(9);
  FeedForwardClassifier model(dense_architecture(8, 6, 2), {1, 2, 4}, 2, 3, rng);
  save_checkpoint(model, dir.file("m.uncm"));

  // Flip one payload byte: checksum error.
  auto bytes = read_bytes(dir.file("m.uncm"));
  bytes[bytes.size() - 20] ^= 0x40;
  write_bytes(dir.file("corrupt.uncm"), bytes);
  CHECK_THROWS_WITH_AS(load_feedforward_checkpoint(dir.file("corrupt.uncm")),
                       doctest::Contains("checksum"), IoError);

  // Bump the version field: explicit version error, not a misparse.
  bytes = read_bytes(dir.file("m.uncm"));
  bytes[4] = 0x2a;
  write_bytes(dir.file("versioned.uncm"), bytes);
  CHECK_THROWS_WITH_AS(load_feedforward_checkpoint(dir.file("versioned.uncm")),
                       doctest::Contains("version"), IoError);

  // Kind tag mismatch against the requested type.
  CHECK_THROWS_WITH_AS(load_surrogate_checkpoint(dir.file("m.uncm")),
                       doctest::Contains("kind"), IoError);
}

TEST_CASE("pgm/ppm export") {
  TempDir dir;
  std::vector<double> mask{0.0, 1.0, 1.0, 0.0};
  write_pgm(dir.file("m.pgm"), 2, 2, mask);
  auto bytes = read_bytes(dir.file("m.pgm"));
  const std::string header(bytes.begin(), bytes.begin() + 9);
  CHECK(header == "P5\n2 2\n25");  // "P5\n2 2\n255\n"
  CHECK(bytes[bytes.size() - 4] == 0);
  CHECK(bytes[bytes.size() - 3] == 255);
  CHECK(bytes[bytes.size() - 2] == 255);
  CHECK(bytes[bytes.size() - 1] == 0);

  Rng rng(3);
  Tensor rgb = Tensor::uniform({1, 3, 4, 4}, 0.0, 1.0, rng);
  export_image(rgb, dir.file("img"));
  CHECK(fs::exists(dir.file("img.ppm")));
}

TEST_CASE("config: parsing, fingerprint, and validation") {
  ConfigMap cfg = ConfigMap::parse_string(
      "# comment\n[run]\nseed = 42\n[threat]\nkind = additive\nepsilon = 0.3\n");
  CHECK(cfg.get_u64("run", "seed", 0) == 42);
  CHECK(cfg.get_double("threat", "epsilon", 0.0) == doctest::Approx(0.3));
  CHECK(cfg.get("missing", "key", "fallback") == "fallback");
  CHECK_THROWS_AS(cfg.require("missing", "key"), ConfigError);

  const std::string fp1 = config_fingerprint(cfg);
  cfg.set("threat", "epsilon", "0.4");
  CHECK(config_fingerprint(cfg) != fp1);

  CHECK_THROWS_WITH_AS(ConfigMap::parse_file("/nonexistent/q.ini"),
                       doctest::Contains("/nonexistent/q.ini"), ConfigError);
  CHECK_THROWS_AS(ConfigMap::parse_string("key_without_section = 1\n"), ConfigError);

  ThreatConfig threat = threat_from_config(cfg);
  CHECK(threat.epsilon == doctest::Approx(0.4));
  CHECK(threat.steps == 100);

  ConfigMap data_cfg = ConfigMap::parse_string("[data]\nkind = idx\nimages = /no/i\nlabels = /no/l\n");
  CHECK_THROWS_WITH_AS(dataset_from_config(data_cfg, 1), doctest::Contains("/no/i"),
                       ConfigError);
}
