#pragma once

#include <filesystem>
#include <optional>

#include "nex/mpi.hpp"
#include "nex/nn.hpp"

namespace nex {

inline constexpr int kCheckpointVersion = 1;

/// Binary container: 8-byte magic "NEXCKPT\0", uint32 version, uint64 header
/// size, a JSON header describing the model and tensor table, then raw
/// little-endian float64 payload (parameters, then Adam first and second
/// moments when present).
void save_checkpoint(const std::filesystem::path& path, MpiModel& model, const AdamState* adam = nullptr);

struct Checkpoint {
  MpiModel model;
  std::optional<AdamState> adam;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nex
