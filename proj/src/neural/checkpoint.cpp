#include "etd/neural/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "etd/errors.hpp"

namespace etd::nn {

namespace {

constexpr char kMagic[8] = {'E', 'T', 'D', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  template <typename T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void raw(const char* data, std::size_t n) { out_.write(data, static_cast<std::streamsize>(n)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("failed writing checkpoint: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open checkpoint: " + path.string());
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return to_little(v);
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > (1u << 20)) throw IoError("corrupt checkpoint (string length): " + path_.string());
    std::string s(n, '\0');
    in_.read(s.data(), n);
    check();
    return s;
  }
  void raw(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    check();
  }

 private:
  void check() {
    if (!in_) throw IoError("truncated checkpoint: " + path_.string());
  }
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

const Matrix& Checkpoint::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w(path);
  w.raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(Checkpoint::kVersion);
  w.put<std::uint64_t>(ckpt.config_hash);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.metadata.size()));
  for (const auto& [k, v] : ckpt.metadata) {
    w.put_string(k);
    w.put_string(v);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    w.put_string(t.name);
    w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.rows()));
    w.put<std::uint64_t>(static_cast<std::uint64_t>(t.value.cols()));
    for (Index i = 0; i < t.value.rows(); ++i)
      for (Index j = 0; j < t.value.cols(); ++j) w.put<std::uint64_t>(std::bit_cast<std::uint64_t>(t.value(i, j)));
  }
  w.finish();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  Checkpoint ckpt;
  ckpt.config_hash = r.get<std::uint64_t>();
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.get_string();
    ckpt.metadata[k] = r.get_string();
  }
  const auto n_tensors = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (rows > (1u << 24) || cols > (1u << 24) || rows * cols > (1u << 26))
      throw IoError("corrupt checkpoint (tensor shape): " + path.string());
    t.value.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index a = 0; a < t.value.rows(); ++a)
      for (Index b = 0; b < t.value.cols(); ++b) t.value(a, b) = std::bit_cast<double>(r.get<std::uint64_t>());
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void store_parameters(Checkpoint& ckpt, const std::string& prefix,
                      const std::vector<std::pair<std::string, const Matrix*>>& params) {
  for (const auto& [name, m] : params) ckpt.tensors.push_back({prefix + name, *m});
}

void load_parameters(const Checkpoint& ckpt, const std::string& prefix,
                     const std::vector<std::pair<std::string, const Matrix*>>& names,
                     const std::vector<Matrix*>& params) {
  if (names.size() != params.size()) throw ShapeError("load_parameters: name/parameter count mismatch");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const Matrix& src = ckpt.tensor(prefix + names[i].first);
    if (src.rows() != params[i]->rows() || src.cols() != params[i]->cols())
      throw ShapeError("checkpoint tensor '" + prefix + names[i].first + "' has shape " +
                       std::to_string(src.rows()) + "x" + std::to_string(src.cols()) + ", expected " +
                       std::to_string(params[i]->rows()) + "x" + std::to_string(params[i]->cols()));
    *params[i] = src;
  }
}

}  // namespace etd::nn
