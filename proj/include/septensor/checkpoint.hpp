#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "septensor/model.hpp"

namespace septensor {

/// Checkpoint layout, all integers and floats little-endian:
///
///   8 bytes   magic "SEPTNSR1"
///   u32       format version (1)
///   u32       kind (0 = CP, 1 = TT, 2 = Tucker)
///   u64       d, u64 rank
///   d times:  u64 depth, u64 hidden_width, u64 output_width, u32 activation,
///             f64 input_scale, f64 input_shift
///   u64       parameter count N, then N x f64 parameters (model order)
///   u64       FNV-1a 64 of every preceding byte
inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'P', 'T', 'N', 'S', 'R', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

[[nodiscard]] std::vector<std::uint8_t> serialize_model(const SeparatedModel& model);
/// Throws CheckpointError on bad magic, version, checksum, truncation or an
/// inconsistent header.
[[nodiscard]] SeparatedModel deserialize_model(std::span<const std::uint8_t> bytes);

/// Written to a sibling temporary file and renamed into place.
void save_checkpoint(const SeparatedModel& model, const std::filesystem::path& path);
[[nodiscard]] SeparatedModel load_checkpoint(const std::filesystem::path& path);

[[nodiscard]] std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

}  // namespace septensor
