#include "gseg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace gseg {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using Kind = CheckpointError::Kind;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  std::uint8_t bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.insert(out.end(), bytes, bytes + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_string(std::size_t n) {
    need(n, "parameter name");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointError(Kind::truncated, std::string("checkpoint truncated while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct ManifestEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset;
  std::uint64_t length;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(std::span<const Parameter> params) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const Parameter& p : params) {
    if (p.name.size() > 0xffff) throw CheckpointError(Kind::malformed, "parameter name too long: " + p.name);
    if (p.tensor.rank() > 0xff) throw CheckpointError(Kind::malformed, "tensor rank too large: " + p.name);
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put<std::uint8_t>(out, kDtypeFloat64);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.tensor.rank()));
    for (std::size_t e : p.tensor.shape()) put<std::uint64_t>(out, e);
    const std::uint64_t length = p.tensor.numel() * sizeof(double);
    put<std::uint64_t>(out, offset);
    put<std::uint64_t>(out, length);
    offset += length;
  }
  for (const Parameter& p : params) {
    for (double v : p.tensor.data()) put<double>(out, v);
  }
  return out;
}

std::vector<CheckpointEntry> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kCheckpointMagic ||
      !std::equal(std::begin(kCheckpointMagic), std::end(kCheckpointMagic), bytes.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw CheckpointError(Kind::bad_magic, "not a checkpoint file (bad magic)");
  }
  Reader r(bytes.subspan(sizeof kCheckpointMagic));
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw CheckpointError(Kind::unsupported_version, "unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<ManifestEntry> manifest;
  for (std::uint32_t i = 0; i < count; ++i) {
    ManifestEntry e;
    e.name = r.get_string(r.get<std::uint16_t>("name length"));
    const auto dtype = r.get<std::uint8_t>("dtype");
    if (dtype != kDtypeFloat64) {
      throw CheckpointError(Kind::malformed, "entry '" + e.name + "' has unsupported dtype " + std::to_string(dtype));
    }
    const auto rank = r.get<std::uint8_t>("rank");
    for (std::uint8_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>("extent")));
    e.offset = r.get<std::uint64_t>("blob offset");
    e.length = r.get<std::uint64_t>("blob length");
    if (e.length != shape_numel(e.shape) * sizeof(double)) {
      throw CheckpointError(Kind::malformed, "entry '" + e.name + "' length does not match its shape");
    }
    manifest.push_back(std::move(e));
  }

  const std::size_t blob_start = sizeof kCheckpointMagic + r.position();
  const std::uint64_t blob_size = bytes.size() - blob_start;
  std::uint64_t expected = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
  for (const auto& e : manifest) {
    expected += e.length;
    spans.emplace_back(e.offset, e.length);
  }
  std::sort(spans.begin(), spans.end());
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i - 1].first + spans[i - 1].second > spans[i].first) {
      throw CheckpointError(Kind::malformed, "checkpoint manifest has overlapping blob ranges");
    }
  }
  if (blob_size < expected) {
    throw CheckpointError(Kind::truncated, "checkpoint blob truncated: " + std::to_string(blob_size) + " of " +
                                               std::to_string(expected) + " bytes");
  }
  if (blob_size > expected) throw CheckpointError(Kind::malformed, "checkpoint has trailing bytes after the blob");

  std::vector<CheckpointEntry> out;
  out.reserve(manifest.size());
  for (auto& e : manifest) {
    if (e.offset + e.length > blob_size) {
      throw CheckpointError(Kind::malformed, "entry '" + e.name + "' points outside the blob");
    }
    CheckpointEntry entry{std::move(e.name), std::move(e.shape), std::vector<double>(e.length / sizeof(double))};
    std::memcpy(entry.values.data(), bytes.data() + blob_start + e.offset, e.length);
    out.push_back(std::move(entry));
  }
  return out;
}

void save_checkpoint(const Segmenter& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model.parameters());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(Kind::io, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError(Kind::io, "failed writing " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, Segmenter& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Kind::io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto entries = decode_checkpoint(bytes);

  auto params = model.parameters();
  if (entries.size() != params.size()) {
    throw CheckpointError(Kind::manifest_mismatch, "checkpoint has " + std::to_string(entries.size()) +
                                                       " tensors, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (entries[i].name != params[i].name || entries[i].shape != params[i].tensor.shape()) {
      throw CheckpointError(Kind::manifest_mismatch, "checkpoint entry '" + entries[i].name + "' " +
                                                         shape_to_string(entries[i].shape) + " does not match '" +
                                                         params[i].name + "' " +
                                                         shape_to_string(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(entries[i].values.begin(), entries[i].values.end(), params[i].tensor.mutable_data().begin());
  }
}

Segmenter load_checkpoint(const std::filesystem::path& path, const SegmenterConfig& config) {
  Segmenter model(config);
  load_checkpoint(path, model);
  return model;
}

}  // namespace gseg
