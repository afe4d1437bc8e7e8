#pragma once

#include "sgs/cloud.hpp"
#include "sgs/config.hpp"
#include "sgs/mlp.hpp"

#include <string>
#include <vector>

namespace sgs {

inline constexpr uint32_t kCheckpointVersion = 1;

// Versioned little-endian container: "SGSC" magic, version, Gaussian count,
// then contiguous f32 arrays (means, log-scales, quaternions wxyz, opacity
// logits, features, latents), the Phi/Psi tensor blobs with a shape table,
// and a length-prefixed JSON blob (run config + train state).
//
// In the direct-color configuration the per-Gaussian RGB logits are carried
// in the first three feature floats; the feature vectors are unused there.
struct Checkpoint {
    GaussianCloud cloud;
    Mlp phi, psi;
    RunConfig config;
    int64_t rounds_done = 0;
    int frames_consumed = 0;
    std::vector<int> final_window_ids;
    double scene_radius = 1.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

} // namespace sgs
