#pragma once

#include "sgs/common.hpp"

#include <string>

namespace sgs {

// Declarative run configuration. Every hyperparameter carries its default, so
// the four ablation configurations are pure one-line diffs on config_id:
//   a: direct per-Gaussian RGB, no MLPs, no shadow, no iso loss
//   b: + appearance MLP conditioned on sun/view directions
//   c: + shadow splatting multiplied into the render
//   d: + isotropic scale regularizer
struct RunConfig {
    char config_id = 'd';
    int window_size = 10;
    double theta_view_deg = 10.0;
    double lambda_ssim = 0.2;
    double lambda_iso = 10.0;
    int n_init = 10000;
    uint64_t seed = 1;
    int encoding_freqs = kEncodingFreqs;

    // Per-group base learning rates; means are additionally scaled by the
    // scene radius.
    double lr_means = 1.6e-4;
    double lr_rotations = 1e-3;
    double lr_log_scales = 5e-3;
    double lr_opacity = 5e-2;
    double lr_features = 2.5e-3;
    double lr_latents = 2.5e-3;
    double lr_phi = 1e-3;
    double lr_psi = 1e-3;
    double lr_rgb = 2.5e-3;

    int densify_interval_rounds = 10;
    double tau_grad = 2e-4;          // mean accumulated screen-gradient (NDC units)
    double tau_small_frac = 0.01;    // clone/split size split, fraction of scene radius
    double tau_prune = 5e-3;         // opacity floor
    double prune_radius_px_frac = 0.25; // screen-radius anomaly, fraction of max(W, H)
    double prune_world_frac = 0.5;   // world-size anomaly, fraction of scene radius

    int checkpoint_interval_rounds = 0; // 0 = final only

    bool use_appearance_mlp() const { return config_id != 'a'; }
    bool use_shadow() const { return config_id == 'c' || config_id == 'd'; }
    bool use_iso() const { return config_id == 'd'; }

    /// Parses + validates; error messages carry the offending field path.
    static RunConfig from_json_text(const std::string& text);
    static RunConfig from_file(const std::string& path);
    std::string to_json_text() const;
};

} // namespace sgs
