#pragma once

#include <cstdint>
#include <string>

#include "camnet/generator.hpp"

namespace camnet {

constexpr uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: magic "CAMN", u32 version (little-endian), u32 JSON
/// header length, UTF-8 JSON header (cascade config + seed + training step),
/// then raw little-endian float32 blobs in lexicographic parameter-name
/// order (weight-normalized convs store their ".v" and ".g" slots).
void save_checkpoint(const std::string& path, CascadeWeights& weights, uint64_t seed, int step);

struct Checkpoint {
    CascadeWeights weights;
    uint64_t seed = 0;
    int step = 0;
};

/// Rebuilds the cascade from the header config and restores every slot.
/// Version mismatch or malformed data raise IoError.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace camnet
