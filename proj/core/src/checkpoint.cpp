#include "unc/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "unc/errors.hpp"

namespace unc {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'U', 'N', 'C', 'M'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(std::string bytes, std::string path)
      : bytes_(std::move(bytes)), path_(std::move(path)) {}

  void expect_magic() {
    if (bytes_.size() < 4 || std::memcmp(bytes_.data(), kMagic, 4) != 0) {
      throw IoError("checkpoint: bad magic in " + path_);
    }
    pos_ = 4;
  }
  std::uint16_t u16() {
    need(2);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 2;
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    need(4);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data() + pos_);
    pos_ += 4;
    return p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t(p[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t lo = u32();
    std::uint64_t hi = u32();
    return lo | (hi << 32);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  const std::string& path() const { return path_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint: truncated file " + path_);
  }
  std::string bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::string payload_bytes(const std::vector<Tensor>& tensors) {
  std::string out;
  for (const Tensor& t : tensors) {
    for (double v : t.data()) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, 8);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
      }
      out.append(reinterpret_cast<const char*>(&bits), 8);
    }
  }
  return out;
}

std::uint32_t payload_crc(const std::string& payload) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t off = 0;
  while (off < payload.size()) {
    const std::size_t chunk = std::min<std::size_t>(payload.size() - off, 1u << 30);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(payload.data() + off),
                static_cast<uInt>(chunk));
    off += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

json shape_table(const std::vector<std::pair<std::string, Tensor>>& named) {
  json arr = json::array();
  for (const auto& [name, t] : named) {
    arr.push_back({{"name", name}, {"shape", t.shape()}});
  }
  return arr;
}

void write_file(const std::string& path, const std::string& kind, const json& header,
                const std::vector<Tensor>& tensors) {
  const std::string payload = payload_bytes(tensors);
  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kCheckpointVersion);
  put_u16(out, static_cast<std::uint16_t>(kind.size()));
  out += kind;
  const std::string header_text = header.dump();
  put_u32(out, static_cast<std::uint32_t>(header_text.size()));
  out += header_text;
  put_u64(out, payload.size());
  out += payload;
  put_u32(out, payload_crc(payload));

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("checkpoint: short write to " + path);
}

struct Parsed {
  std::string kind;
  json header;
  std::string payload;
};

Parsed read_file(const std::string& path, const std::string& expected_kind) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes), path);
  r.expect_magic();
  const std::uint16_t version = r.u16();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported format version " + std::to_string(version) +
                  " in " + path + " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Parsed p;
  p.kind = r.bytes(r.u16());
  if (!expected_kind.empty() && p.kind != expected_kind) {
    throw IoError("checkpoint: kind '" + p.kind + "' in " + path + " does not match requested '" +
                  expected_kind + "'");
  }
  const std::string header_text = r.bytes(r.u32());
  try {
    p.header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw IoError("checkpoint: bad header in " + path + ": " + e.what());
  }
  p.payload = r.bytes(r.u64());
  const std::uint32_t stored = r.u32();
  if (stored != payload_crc(p.payload)) {
    throw IoError("checkpoint: payload checksum mismatch in " + path);
  }
  return p;
}

void fill_tensors(const Parsed& p, const std::string& path, std::vector<Tensor> tensors) {
  const json& table = p.header.at("tensors");
  if (table.size() != tensors.size()) {
    throw IoError("checkpoint: tensor count mismatch in " + path);
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const Shape shape = table[i].at("shape").get<Shape>();
    if (shape != tensors[i].shape()) {
      throw IoError("checkpoint: tensor " + std::to_string(i) + " shape mismatch in " + path);
    }
    auto d = tensors[i].data();
    if (offset + d.size() * 8 > p.payload.size()) {
      throw IoError("checkpoint: payload too small in " + path);
    }
    for (std::size_t j = 0; j < d.size(); ++j) {
      std::uint64_t bits;
      std::memcpy(&bits, p.payload.data() + offset, 8);
      if constexpr (std::endian::native == std::endian::big) {
        bits = __builtin_bswap64(bits);
      }
      std::memcpy(&d[j], &bits, 8);
      offset += 8;
    }
  }
  if (offset != p.payload.size()) {
    throw IoError("checkpoint: trailing payload bytes in " + path);
  }
}

json layers_to_json(const std::vector<LayerSpec>& specs) {
  json arr = json::array();
  for (const LayerSpec& s : specs) {
    json o{{"kind", to_string(s.kind)}};
    switch (s.kind) {
      case LayerKind::dense:
        o["in_dim"] = s.in_dim;
        o["out_dim"] = s.out_dim;
        break;
      case LayerKind::conv2d:
        o["in_channels"] = s.in_channels;
        o["out_channels"] = s.out_channels;
        o["kernel"] = s.kernel;
        o["stride"] = s.stride;
        o["pad"] = s.pad;
        break;
      case LayerKind::dropout:
        o["rate"] = s.dropout_rate;
        break;
      default:
        break;
    }
    arr.push_back(o);
  }
  return arr;
}

std::vector<LayerSpec> layers_from_json(const json& arr) {
  std::vector<LayerSpec> specs;
  for (const json& o : arr) {
    const LayerKind kind = layer_kind_from_string(o.at("kind").get<std::string>());
    switch (kind) {
      case LayerKind::dense:
        specs.push_back(LayerSpec::Dense(o.at("in_dim"), o.at("out_dim")));
        break;
      case LayerKind::conv2d:
        specs.push_back(LayerSpec::Conv2d(o.at("in_channels"), o.at("out_channels"),
                                          o.at("kernel"), o.at("stride"), o.at("pad")));
        break;
      case LayerKind::dropout:
        specs.push_back(LayerSpec::Dropout(o.at("rate")));
        break;
      case LayerKind::relu:
        specs.push_back(LayerSpec::Relu());
        break;
      case LayerKind::tanh_act:
        specs.push_back(LayerSpec::Tanh());
        break;
      case LayerKind::flatten:
        specs.push_back(LayerSpec::Flatten());
        break;
    }
  }
  return specs;
}

std::vector<std::pair<std::string, Tensor>> named_ff(const FeedForwardClassifier& m) {
  std::vector<std::pair<std::string, Tensor>> named;
  std::size_t li = 0;
  for (const auto& [w, b] : m.layer_params()) {
    named.emplace_back("layer" + std::to_string(li) + ".W", w);
    named.emplace_back("layer" + std::to_string(li) + ".b", b);
    ++li;
  }
  return named;
}

}  // namespace

void save_checkpoint(const FeedForwardClassifier& model, const std::string& path) {
  json header{{"input_shape", model.input_shape()},
              {"class_count", model.class_count()},
              {"embedding_boundary", model.embedding_boundary()},
              {"layers", layers_to_json(model.specs())}};
  std::vector<Tensor> tensors;
  std::vector<std::pair<std::string, Tensor>> named = named_ff(model);
  for (auto& [n, t] : named) tensors.push_back(t);
  header["tensors"] = shape_table(named);
  write_file(path, model.kind_tag(), header, tensors);
}

void save_checkpoint(const MeanFieldClassifier& model, const std::string& path) {
  json header{{"input_shape", model.input_shape()},
              {"class_count", model.class_count()},
              {"embedding_boundary", model.embedding_boundary()},
              {"layers", layers_to_json(model.specs())}};
  std::vector<std::pair<std::string, Tensor>> named;
  std::size_t li = 0;
  for (const auto& vp : model.variational_parameters()) {
    named.emplace_back("layer" + std::to_string(li) + ".mu_w", vp.mu_w);
    named.emplace_back("layer" + std::to_string(li) + ".rho_w", vp.rho_w);
    named.emplace_back("layer" + std::to_string(li) + ".mu_b", vp.mu_b);
    named.emplace_back("layer" + std::to_string(li) + ".rho_b", vp.rho_b);
    ++li;
  }
  std::vector<Tensor> tensors;
  for (auto& [n, t] : named) tensors.push_back(t);
  header["tensors"] = shape_table(named);
  write_file(path, model.kind_tag(), header, tensors);
}

void save_checkpoint(const SurrogateModel& model, const std::string& path) {
  static const char* names[] = {"w1", "b1", "w2", "b2", "w3", "b3", "head_W", "head_b"};
  json header{{"embedding_width", model.embedding_width()},
              {"class_count", model.class_count()},
              {"dropout_rate", model.dropout_rate()}};
  std::vector<std::pair<std::string, Tensor>> named;
  for (std::size_t i = 0; i < model.raw_tensors().size(); ++i) {
    named.emplace_back(names[i], model.raw_tensors()[i]);
  }
  std::vector<Tensor> tensors = model.raw_tensors();
  header["tensors"] = shape_table(named);
  write_file(path, "surrogate", header, tensors);
}

void save_checkpoint(const MaskModel& model, const std::string& path) {
  static const char* names[] = {"conv1.W", "conv1.b", "conv2.W", "conv2.b",
                                "up1.W",   "up1.b",   "up2.W",   "up2.b"};
  json header{{"input_shape", model.input_shape()},
              {"width1", model.width1()},
              {"width2", model.width2()}};
  std::vector<std::pair<std::string, Tensor>> named;
  for (std::size_t i = 0; i < model.raw_tensors().size(); ++i) {
    named.emplace_back(names[i], model.raw_tensors()[i]);
  }
  std::vector<Tensor> tensors = model.raw_tensors();
  header["tensors"] = shape_table(named);
  write_file(path, "maskmodel", header, tensors);
}

std::string checkpoint_kind(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open " + path);
  std::string head(8, '\0');
  f.read(head.data(), 8);
  if (!f || std::memcmp(head.data(), kMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic in " + path);
  }
  const auto* p = reinterpret_cast<const unsigned char*>(head.data() + 4);
  const std::uint16_t version = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported format version " + std::to_string(version) +
                  " in " + path);
  }
  const std::uint16_t len = static_cast<std::uint16_t>(p[2] | (p[3] << 8));
  std::string kind(len, '\0');
  f.read(kind.data(), len);
  if (!f) throw IoError("checkpoint: truncated file " + path);
  return kind;
}

namespace {

FeedForwardClassifier load_ff_as(const std::string& path, const std::string& kind) {
  Parsed p = read_file(path, kind);
  Rng init(0);
  FeedForwardClassifier model(layers_from_json(p.header.at("layers")),
                              p.header.at("input_shape").get<Shape>(),
                              p.header.at("class_count"), p.header.at("embedding_boundary"),
                              init);
  std::vector<Tensor> tensors;
  for (auto& [w, b] : model.layer_params()) {
    tensors.push_back(w);
    tensors.push_back(b);
  }
  fill_tensors(p, path, tensors);
  return model;
}

}  // namespace

FeedForwardClassifier load_feedforward_checkpoint(const std::string& path) {
  const std::string kind = checkpoint_kind(path);
  if (kind != "deterministic" && kind != "dropout") {
    throw IoError("checkpoint: kind '" + kind + "' in " + path +
                  " does not match requested 'deterministic|dropout'");
  }
  return load_ff_as(path, kind);
}

MeanFieldClassifier load_meanfield_checkpoint(const std::string& path) {
  Parsed p = read_file(path, "meanfield");
  Rng init(0);
  MeanFieldClassifier model(layers_from_json(p.header.at("layers")),
                            p.header.at("input_shape").get<Shape>(),
                            p.header.at("class_count"), p.header.at("embedding_boundary"),
                            init);
  std::vector<Tensor> tensors;
  for (auto& vp : model.variational_parameters()) {
    tensors.push_back(vp.mu_w);
    tensors.push_back(vp.rho_w);
    tensors.push_back(vp.mu_b);
    tensors.push_back(vp.rho_b);
  }
  fill_tensors(p, path, tensors);
  return model;
}

SurrogateModel load_surrogate_checkpoint(const std::string& path) {
  Parsed p = read_file(path, "surrogate");
  Rng init(0);
  SurrogateModel model(p.header.at("embedding_width"), p.header.at("class_count"), init,
                       p.header.at("dropout_rate"));
  fill_tensors(p, path, model.raw_tensors());
  return model;
}

MaskModel load_maskmodel_checkpoint(const std::string& path) {
  Parsed p = read_file(path, "maskmodel");
  Rng init(0);
  MaskModel model(p.header.at("input_shape").get<Shape>(), init, p.header.at("width1"),
                  p.header.at("width2"));
  fill_tensors(p, path, model.raw_tensors());
  return model;
}

std::unique_ptr<Classifier> load_classifier_checkpoint(const std::string& path) {
  const std::string kind = checkpoint_kind(path);
  if (kind == "deterministic" || kind == "dropout") {
    return std::make_unique<FeedForwardClassifier>(load_ff_as(path, kind));
  }
  if (kind == "meanfield") {
    return std::make_unique<MeanFieldClassifier>(load_meanfield_checkpoint(path));
  }
  throw IoError("checkpoint: kind '" + kind + "' in " + path + " is not a classifier");
}

}  // namespace unc
