#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "etd/neural/networks.hpp"

namespace etd::nn {

struct NamedTensor {
  std::string name;
  Matrix value;
};

// Binary container, little-endian:
//   "ETDCKPT\0" | u32 version | u64 config_hash
//   u32 n_meta    { str key, str value }*
//   u32 n_tensors { str name, u64 rows, u64 cols, f64[rows*cols] row-major }*
// where str is u32 length followed by bytes. Doubles are stored as their
// IEEE-754 bit patterns so a write/read round trip is bit-exact.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t config_hash = 0;
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(const std::string& name) const;
  bool has_tensor(const std::string& name) const;
};

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

void store_parameters(Checkpoint& ckpt, const std::string& prefix,
                      const std::vector<std::pair<std::string, const Matrix*>>& params);

// Copies tensors `prefix + name` into the given parameters, validating shapes.
void load_parameters(const Checkpoint& ckpt, const std::string& prefix,
                     const std::vector<std::pair<std::string, const Matrix*>>& names,
                     const std::vector<Matrix*>& params);

}  // namespace etd::nn
