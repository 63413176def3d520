#include "gdl/training/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "gdl/core/error.hpp"
#include "gdl/training/registry.hpp"

namespace gdl::training {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw TruncatedCheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  constexpr std::uint64_t kLimit = 1ull << 32;
  if (n > kLimit) throw TruncatedCheckpointError(std::string("checkpoint ") + what + " length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw TruncatedCheckpointError(std::string("checkpoint truncated while reading ") + what);
  }
  return s;
}

model::json metadata_json(const TrainingMetadata& m) {
  model::json j = {{"seed", m.seed}, {"epoch", m.epoch}};
  j["best_val_mae"] = std::isfinite(m.best_val_mae) ? model::json(m.best_val_mae) : model::json(nullptr);
  if (!m.hemisphere.empty()) j["hemisphere"] = m.hemisphere;
  return j;
}

TrainingMetadata metadata_from(const model::json& j) {
  TrainingMetadata m;
  m.seed = j.value("seed", std::uint64_t{0});
  m.epoch = j.value("epoch", std::size_t{0});
  if (j.contains("best_val_mae") && j.at("best_val_mae").is_number()) m.best_val_mae = j.at("best_val_mae").get<double>();
  m.hemisphere = j.value("hemisphere", std::string{});
  return m;
}

TensorBlock to_block(const ad::NamedTensor& t) {
  TensorBlock b{t.name, t.value.shape(), {}};
  b.values.reserve(t.value.numel());
  for (double v : t.value.data()) b.values.push_back(static_cast<float>(v));
  return b;
}

}  // namespace

Checkpoint capture_checkpoint(model::Regressor& model, const TrainingMetadata& metadata) {
  Checkpoint c;
  c.architecture = model.architecture();
  c.config = model.config_json();
  c.preprocessing = model.preprocessing().to_json();
  c.metadata = metadata;
  for (const auto& p : model.parameters()) c.tensors.push_back(to_block(p));
  for (const auto& [name, norm] : model.norms()) {
    std::vector<ad::NamedTensor> buffers;
    norm->collect_buffers(name, buffers);
    for (const auto& b : buffers) c.tensors.push_back(to_block(b));
  }
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint) {
  out.write(kCheckpointMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  const model::json header = {{"architecture", checkpoint.architecture},
                              {"config", checkpoint.config},
                              {"preprocessing", checkpoint.preprocessing},
                              {"metadata", metadata_json(checkpoint.metadata)}};
  const std::string text = header.dump();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& t : checkpoint.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() < 4) throw TruncatedCheckpointError("checkpoint shorter than its magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) throw BadMagicError("not a GDLM checkpoint (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(in, "header length");
  const std::string text = get_bytes(in, header_len, "header");
  model::json header;
  try {
    header = model::json::parse(text);
  } catch (const model::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  Checkpoint c;
  c.architecture = header.value("architecture", std::string{});
  c.config = header.value("config", model::json::object());
  c.preprocessing = header.value("preprocessing", model::json::object());
  c.metadata = metadata_from(header.value("metadata", model::json::object()));
  const auto count = get<std::uint32_t>(in, "tensor count");
  for (std::uint32_t k = 0; k < count; ++k) {
    TensorBlock b;
    b.name = get_bytes(in, get<std::uint32_t>(in, "tensor name length"), "tensor name");
    const auto rank = get<std::uint32_t>(in, "tensor rank");
    if (rank > 8) throw CheckpointError("tensor " + b.name + " has implausible rank " + std::to_string(rank));
    std::uint64_t n = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      b.shape.push_back(get<std::uint64_t>(in, "tensor shape"));
      n *= b.shape.back();
    }
    const std::string raw = get_bytes(in, n * sizeof(float), "tensor values");
    b.values.resize(n);
    if (n) std::memcpy(b.values.data(), raw.data(), raw.size());
    c.tensors.push_back(std::move(b));
  }
  return c;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

void apply_checkpoint(model::Regressor& model, const Checkpoint& checkpoint) {
  if (checkpoint.architecture != model.architecture()) {
    throw ArchitectureMismatchError("checkpoint holds a " + checkpoint.architecture + " model, not " +
                                    model.architecture());
  }
  std::map<std::string, const TensorBlock*> blocks;
  for (const auto& t : checkpoint.tensors) blocks[t.name] = &t;
  auto find = [&](const std::string& name, const ad::Shape& shape) -> const TensorBlock& {
    const auto it = blocks.find(name);
    if (it == blocks.end()) throw ArchitectureMismatchError("checkpoint is missing tensor " + name);
    if (it->second->shape != shape) {
      throw ArchitectureMismatchError("tensor " + name + " has shape " + ad::shape_string(it->second->shape) +
                                      " in the checkpoint but " + ad::shape_string(shape) + " in the model");
    }
    return *it->second;
  };
  for (auto& p : model.parameters()) {
    const auto& b = find(p.name, p.value.shape());
    auto dst = p.value.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = b.values[i];
  }
  for (auto& [name, norm] : model.norms()) {
    const ad::Shape shape{norm->channels()};
    const auto& mean = find(name + ".running_mean", shape);
    const auto& var = find(name + ".running_var", shape);
    const std::vector<double> m(mean.values.begin(), mean.values.end()), v(var.values.begin(), var.values.end());
    norm->load_buffers(m, v);
  }
}

std::unique_ptr<model::Regressor> restore_model(const Checkpoint& checkpoint) {
  if (!is_architecture(checkpoint.architecture)) {
    throw ArchitectureMismatchError("checkpoint names unknown architecture '" + checkpoint.architecture + "'");
  }
  auto m = make_regressor(checkpoint.architecture, checkpoint.config,
                          model::Preprocessing::from_json(checkpoint.preprocessing));
  apply_checkpoint(*m, checkpoint);
  return m;
}

}  // namespace gdl::training
