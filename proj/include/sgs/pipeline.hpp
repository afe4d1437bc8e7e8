#pragma once

#include "sgs/losses.hpp"
#include "sgs/mlp.hpp"
#include "sgs/rasterizer.hpp"
#include "sgs/shadow.hpp"

namespace sgs {

struct PipelineOptions {
    bool use_appearance_mlp = true;
    bool use_shadow = true;
    int encoding_freqs = kEncodingFreqs;
    double scene_radius = 1.0;
    double d_sun = 1.0; // sun-camera distance for the shadow pass
};

// Everything the backward pass needs from one rendered frame. When the shadow
// pass is disabled the final image IS the raw color render — the multiply is
// skipped entirely, not replaced by a unit shadow image.
struct ForwardPass {
    PipelineOptions opts;
    Vec3 sun_obj = Vec3::UnitX();
    Vec3 cam_center_obj = Vec3::Zero();

    SplatFrame frame;
    MatXR payload; // visible x 3 colors
    RenderOutput color_out;

    std::vector<Vec3> view_dirs; // per visible
    MatXR phi_in;
    ChunkedMlpPass phi_pass;

    std::vector<double> vis_raw;     // per visible, V
    std::vector<double> vis_refined; // per visible, V'
    MatXR psi_in;
    ChunkedMlpPass psi_pass;
    MatXR vprime_payload;
    RenderOutput shadow_out;
    Image shadow_image; // H x W x 1 incl. unit background fill

    Image final_image;
    Image coverage; // H x W x 1, 1 where any splat contributed
};

ForwardPass pipeline_forward(const GaussianCloud& cloud, const Mlp& phi, const Mlp& psi,
                             const RigidTransform& pose, const Vec3& sun_obj, const Pinhole& K,
                             const PipelineOptions& opts);

struct CloudGrads {
    std::vector<Vec3> dmeans;
    std::vector<Vec4> drotations;
    std::vector<Vec3> dlog_scales;
    std::vector<double> dopacity_logits;
    std::vector<Feature> dfeatures;
    std::vector<Latent> dlatents;
    std::vector<Vec3> drgb_logits;
    MlpGrads dphi, dpsi;

    // Densification statistics from this frame: screen-space positional
    // gradient norm (NDC scaling) per cloud Gaussian, zero when not visible.
    std::vector<double> screen_grad_norm;
    std::vector<char> visible;

    void init(size_t n, const Mlp& phi, const Mlp& psi);
};

/// Full reverse pass: raster -> MLPs -> EWA geometry chain. Raw visibility is
/// treated as a constant (no gradient from V into geometry or opacity).
CloudGrads pipeline_backward(const GaussianCloud& cloud, const Mlp& phi, const Mlp& psi,
                             const ForwardPass& fwd, const Image& dL_dimage);

} // namespace sgs
