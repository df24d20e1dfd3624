#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dimrank/state.hpp"

namespace dimrank {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Hyperparameters {
    ModelDims dims;
    double eta_w = 0.01;
    double eta_emb = 0.05;
    double l2_emb = 0.0;

    bool operator==(const Hyperparameters&) const = default;
};

struct ModelCheckpoint {
    std::uint32_t format_version = kCheckpointFormatVersion;
    Hyperparameters hyper;
    ModelState state;

    bool operator==(const ModelCheckpoint&) const = default;
};

/// Canonical bytes: fixed section order, rows sorted by id, little-endian
/// float32 arrays, CRC32 trailer. Equal checkpoints give equal bytes.
std::vector<std::byte> serialize_checkpoint(const ModelCheckpoint& ckpt);

/// Throws CorruptCheckpoint, VersionMismatch or DimensionMismatch (when
/// `expected` is given and differs from the stored dimensions).
ModelCheckpoint deserialize_checkpoint(std::span<const std::byte> bytes,
                                       std::optional<ModelDims> expected = std::nullopt);

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt,
                     bool sync = true);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path,
                                std::optional<ModelDims> expected = std::nullopt);

}  // namespace dimrank
