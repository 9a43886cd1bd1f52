#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "trapcc/network.hpp"

namespace trapcc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: "TRAPCC01", u32 version, u32 descriptor length, architecture JSON,
/// then per tensor: u32 name length, name, u32 rank, u32 dims, f64 data. All
/// integers and reals are little-endian.
std::string encode_checkpoint(const nn::NetworkParams& params);
nn::NetworkParams decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const nn::NetworkParams& params);
/// Throws CheckpointLoad on any missing, malformed or mismatched content.
nn::NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace trapcc
