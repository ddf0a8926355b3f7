#pragma once

#include <filesystem>

#include "train.hpp"

namespace mg {

inline constexpr uint16_t kCheckpointVersion = 1;

// Binary layout (all integers little-endian):
//   "MGAN" | u16 version | u32 metadata_len | metadata text |
//   tensor records: u32 name_len, name, u32 rank, u32 dims[rank], f32 data[] |
//   u32 crc32 of every preceding byte
// Serialization is canonical (fixed key order, fixed float formatting), so
// save -> load -> save reproduces files byte for byte.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mg
