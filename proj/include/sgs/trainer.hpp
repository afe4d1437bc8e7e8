#pragma once

#include "sgs/adam.hpp"
#include "sgs/config.hpp"
#include "sgs/datagen.hpp"
#include "sgs/keyframes.hpp"
#include "sgs/pipeline.hpp"

#include <functional>
#include <map>
#include <string>

namespace sgs {

struct CameraFrame {
    int id = -1;
    RigidTransform pose;
    Vec3 sun_obj = Vec3::UnitX();
    Image image; // H x W x 3
    Image mask;  // H x W x 1
    Vec3 view_dir = Vec3::UnitZ(); // origin -> camera center, object frame
    double cam_distance = 0.0;
};

struct StepRecord {
    int64_t round = 0;
    int frame_id = -1;
    double loss_total = 0, loss_l1 = 0, loss_ssim = 0, loss_iso = 0;
    size_t gaussian_count = 0;
    double lr = 0; // means LR after sawtooth decay
};

struct DensifyStats {
    std::vector<double> grad_accum; // accumulated screen-gradient norms
    std::vector<Vec3> grad3d_accum; // accumulated 3D mean gradients
    std::vector<int> count;         // visible-step count since last densify
    std::vector<double> max_radius_px;

    void reset(size_t n);
    void append(size_t n_new);
};

/// lr0 decayed to lr0/10 across a round: lr0 * 10^(-step/steps_per_round).
double sawtooth_lr(double lr0, int step_in_round, int steps_per_round);

class Trainer {
public:
    Trainer(const RunConfig& cfg, const Pinhole& K, GaussianCloud cloud);

    /// Streams one frame through the keyframe rules; runs a round when the
    /// (full) window composition changes. Returns true when a round ran.
    bool ingest(const CameraFrame& frame);

    /// One optimizer step per keyframe, seeded random order. Throws NotReady
    /// unless the window is full.
    std::vector<StepRecord> training_round();

    /// Replaces model state (resume path); optimizer moments restart fresh.
    void restore(GaussianCloud cloud, Mlp phi, Mlp psi, int64_t rounds_done);

    void densify_and_prune();

    ForwardPass render(const RigidTransform& pose, const Vec3& sun_obj, double d_sun) const;

    const GaussianCloud& cloud() const { return cloud_; }
    GaussianCloud& cloud_mut() { return cloud_; }
    const Mlp& phi() const { return phi_; }
    const Mlp& psi() const { return psi_; }
    Mlp& phi_mut() { return phi_; }
    Mlp& psi_mut() { return psi_; }
    const KeyframeWindow& window() const { return window_; }
    int64_t rounds_done() const { return rounds_done_; }
    void set_rounds_done(int64_t r) { rounds_done_ = r; }
    double scene_radius() const { return scene_radius_; }
    const RunConfig& config() const { return cfg_; }
    const Pinhole& intrinsics() const { return K_; }

    std::function<void(const StepRecord&)> on_step;
    std::function<void(int64_t round, const std::vector<KeyframeEntry>&)> on_round;
    std::function<void(int64_t round)> on_round_complete;

    DensifyStats& densify_stats() { return stats_; }
    /// Moment buffers shape-match their parameter groups (densify invariant).
    bool optimizer_shapes_consistent() const;

private:
    double window_median_distance() const;
    PipelineOptions pipeline_opts(double d_sun) const;
    void optimizer_step(const CloudGrads& grads, double decay);

    RunConfig cfg_;
    Pinhole K_;
    GaussianCloud cloud_;
    Mlp phi_, psi_;
    KeyframeWindow window_;
    std::map<int, CameraFrame> frames_; // keyed by frame id, window members only
    double scene_radius_ = 1.0;
    int64_t rounds_done_ = 0;
    Rng order_rng_;

    DensifyStats stats_;
    AdamState opt_means_, opt_rot_, opt_scales_, opt_opacity_, opt_features_, opt_latents_,
        opt_rgb_;
    std::vector<AdamState> opt_phi_, opt_psi_; // per tensor: W0, b0, W1, b1, ...
    AdamState opt_psi_skip_;
};

struct TrainResult {
    int64_t rounds = 0;
    int64_t steps = 0;
    int frames_consumed = 0;
    double wall_seconds = 0;
    std::vector<int> final_window_ids;
};

/// Streams manifest frames (ids < holdout_start) through the trainer,
/// starting at `start_index` into the manifest frame list (used by resume).
TrainResult run_training(Trainer& trainer, const Manifest& manifest,
                         const std::string& dataset_dir, size_t start_index = 0);

CameraFrame load_frame(const std::string& dataset_dir, const Manifest& manifest, size_t index);

} // namespace sgs
