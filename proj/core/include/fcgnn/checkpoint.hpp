#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fcgnn/tensor.hpp"

namespace fcgnn {

// Versioned binary container: a JSON descriptor plus named tensors.
//
//   offset  content
//   0       magic "FCGNNCKP" (8 bytes)
//   8       u32 format version (currently 1)
//   12      u64 descriptor length L, then L bytes of UTF-8 JSON
//           u64 tensor count, then per tensor:
//             u32 name length, name bytes, u64 rows, u64 cols,
//             rows * cols IEEE-754 binary64 values, row-major
//   end-8   u64 FNV-1a hash of every preceding byte
//
// All integers and doubles are little-endian. Values round-trip bit-exactly.
struct Checkpoint {
  nlohmann::json descriptor = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor2>> tensors;

  const Tensor2& tensor(const std::string& name) const;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws DataError when the file is missing, truncated or fails its checksum.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace fcgnn
