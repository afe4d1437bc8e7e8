#pragma once

#include "sgs/cloud.hpp"
#include "sgs/mlp.hpp"

#include <vector>

namespace sgs {

/// Frequency encoding of one scalar: [sin(2^0 pi p), cos(2^0 pi p), ...,
/// sin(2^{L-1} pi p), cos(2^{L-1} pi p)]. Vectors are encoded component-major.
void positional_encode(double p, int L, double* out);

inline VecX positional_encode_vec(const Vec3& v, int L) {
    VecX out(6 * L);
    for (int k = 0; k < 3; ++k) positional_encode(v[k], L, out.data() + 2 * L * k);
    return out;
}

inline int phi_input_dim(int L) { return kFeatureDim + 6 * L + 6 * L; }
inline int psi_input_dim(int L) { return 1 + 6 * L + 6 * L + kLatentDim; }

/// Appearance MLP: [f | enc(sun) | enc(view)] -> RGB, 3 x 256 hidden.
Mlp make_phi(int L, Rng& rng);

/// Shadow refinement MLP: [V | enc(sun) | enc(mu/r) | latent] -> V', 3 x 32
/// hidden, last layer zeroed with a 4.0-weight skip on the V input so the
/// initial output tracks sigmoid(4 (V - 0.5)).
Mlp make_psi(int L, Rng& rng);

/// Per-Gaussian view directions (Gaussian center toward camera center, object
/// frame) for the visible set of a frame.
std::vector<Vec3> view_directions(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                                  const Vec3& cam_center_obj);

/// Input rows for Phi over the visible set.
MatXR build_phi_input(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                      const Vec3& sun_obj, const std::vector<Vec3>& view_dirs, int L);

/// Input rows for Psi over the given subset; `visibility` is indexed like
/// `cloud_index` (one raw V per row).
MatXR build_psi_input(const GaussianCloud& cloud, const std::vector<int>& cloud_index,
                      const std::vector<double>& visibility, const Vec3& sun_obj,
                      double scene_radius, int L);

// Chunked MLP evaluation with parameter-gradient reduction in fixed chunk
// order (bit-stable for any worker count). Activations are kept per chunk for
// the backward pass.
struct ChunkedMlpPass {
    const Mlp* mlp = nullptr;
    int64_t chunk_rows = 512;
    std::vector<MlpActivations> acts;
    MatXR output;

    void forward(const Mlp& m, const MatXR& x);
    /// Returns dL/dx; accumulates into grads.
    MatXR backward(const MatXR& dy, MlpGrads& grads) const;
};

} // namespace sgs
