#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "e2d/layers.hpp"

// E2DW container, little-endian:
//   "E2DW" | u32 version | u32 tensor count
//   per tensor: u32 name length | UTF-8 name | u32 rank | u64 dims[rank] | f64 payload

namespace e2d::nn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
void write_checkpoint(const std::filesystem::path& path, const NamedTensors& tensors);

/// Returned tensors are plain leaves (no gradient tracking).
NamedTensors read_checkpoint(std::istream& in);
NamedTensors read_checkpoint(const std::filesystem::path& path);

/// Copies stored values into existing tensors, matching by name and shape.
/// Every target must be present; extra stored tensors are an error too.
void load_into(const NamedTensors& stored, NamedTensors& targets);

}  // namespace e2d::nn
