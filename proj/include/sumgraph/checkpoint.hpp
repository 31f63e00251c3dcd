#pragma once

// Checkpoint layout (all little-endian):
//
//   "SGRF"  u16 version  u64 config_hash  u32 epoch  u32 K
//   u32 tensor_count
//   per tensor:  u16 name_len, name, u32 rows, u32 cols, u64 n, n x f64
//   Adam:        f64 beta1, f64 beta2, f64 eps, u64 steps,
//                per tensor: u64 n, n x f64 (first moment), u64 n, n x f64 (second)

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sumgraph/adam.hpp"
#include "sumgraph/graph_model.hpp"

namespace sumgraph {

struct Checkpoint {
  ModelParams params;
  AdamState adam;
  std::uint32_t epoch = 0;
  std::uint32_t k = 5;
  std::uint64_t config_hash = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c);
// DataError with the byte offset on any malformed input.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
// A hash mismatch against `expected_hash` is reported through `warnings`
// (when given), never as an error.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_hash = {},
                           std::vector<std::string>* warnings = nullptr);

}  // namespace sumgraph
