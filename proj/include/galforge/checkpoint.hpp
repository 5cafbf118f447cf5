#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "galforge/tensor.hpp"

namespace galforge {

// Named f64 arrays in the "GLT1" container:
//   magic "GLT1" | version u32 | count u32 | per array:
//   name_len u32 | name bytes | rank u32 | dims u64 each | f64 payload
// All integers and floats little-endian. Order-preserving; duplicate names
// rejected on both write and read. Truncated or malformed files throw with
// the offending path.
using CheckpointArrays = std::vector<std::pair<std::string, Tensor>>;

void write_checkpoint(const std::filesystem::path& path, const CheckpointArrays& arrays);
CheckpointArrays read_checkpoint(const std::filesystem::path& path);

// content digest of an existing file (FNV-1a 64 over raw bytes)
std::uint64_t file_digest(const std::filesystem::path& path);

const Tensor& checkpoint_array(const CheckpointArrays& arrays, const std::string& name);

}  // namespace galforge
