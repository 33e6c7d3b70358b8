#include "fcgnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fcgnn/error.hpp"

namespace fcgnn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'C', 'G', 'N', 'N', 'C', 'K', 'P'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) { buffer_.append(static_cast<const char*>(p), n); }
  template <typename T>
  void pod(T v) {
    bytes(&v, sizeof(v));
  }
  const std::string& buffer() const { return buffer_; }

 private:
  std::string buffer_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}
  void bytes(void* p, std::size_t n) {
    if (n > data_.size() - pos_) throw DataError("checkpoint is truncated");
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T pod() {
    T v;
    bytes(&v, sizeof(v));
    return v;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const Tensor2& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return t;
  }
  throw DataError("checkpoint has no tensor named '" + name + "'");
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic, sizeof(kMagic));
  w.pod<std::uint32_t>(kCheckpointVersion);
  const std::string descriptor = ckpt.descriptor.dump();
  w.pod<std::uint64_t>(descriptor.size());
  w.bytes(descriptor.data(), descriptor.size());
  w.pod<std::uint64_t>(ckpt.tensors.size());
  for (const auto& [name, t] : ckpt.tensors) {
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.pod<std::uint64_t>(t.rows());
    w.pod<std::uint64_t>(t.cols());
    w.bytes(t.data(), t.size() * sizeof(double));
  }
  const std::uint64_t hash = fnv1a(w.buffer());
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  out.write(reinterpret_cast<const char*>(&hash), sizeof(hash));
  if (!out) throw DataError("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::ostringstream slurp;
  slurp << in.rdbuf();
  const std::string data = slurp.str();
  if (data.size() < sizeof(kMagic) + sizeof(std::uint32_t) + 2 * sizeof(std::uint64_t)) {
    throw DataError("checkpoint is truncated");
  }
  const std::string_view body(data.data(), data.size() - sizeof(std::uint64_t));
  std::uint64_t stored_hash;
  std::memcpy(&stored_hash, data.data() + body.size(), sizeof(stored_hash));
  if (std::memcmp(data.data(), kMagic, sizeof(kMagic)) != 0) throw DataError("not a checkpoint file (bad magic)");
  if (fnv1a(body) != stored_hash) throw DataError("checkpoint checksum mismatch");

  Reader r(body);
  char magic[sizeof(kMagic)];
  r.bytes(magic, sizeof(magic));
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto descriptor_len = r.pod<std::uint64_t>();
  if (descriptor_len > r.remaining()) throw DataError("checkpoint is truncated");
  std::string descriptor(descriptor_len, '\0');
  r.bytes(descriptor.data(), descriptor_len);
  try {
    ckpt.descriptor = nlohmann::json::parse(descriptor);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint descriptor is not valid JSON: ") + e.what());
  }
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.pod<std::uint32_t>();
    if (name_len > r.remaining()) throw DataError("checkpoint is truncated");
    std::string name(name_len, '\0');
    r.bytes(name.data(), name_len);
    const auto rows = r.pod<std::uint64_t>();
    const auto cols = r.pod<std::uint64_t>();
    if (cols != 0 && rows > r.remaining() / sizeof(double) / cols) throw DataError("checkpoint is truncated");
    Tensor2 t(rows, cols);
    r.bytes(t.data(), t.size() * sizeof(double));
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.remaining() != 0) throw DataError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace fcgnn
