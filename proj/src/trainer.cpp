#include "sgs/trainer.hpp"

#include "sgs/png_io.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>

namespace sgs {

double sawtooth_lr(double lr0, int step_in_round, int steps_per_round) {
    if (steps_per_round < 1) steps_per_round = 1;
    return lr0 * std::pow(10.0, -double(step_in_round) / steps_per_round);
}

void DensifyStats::reset(size_t n) {
    grad_accum.assign(n, 0.0);
    grad3d_accum.assign(n, Vec3::Zero());
    count.assign(n, 0);
    max_radius_px.assign(n, 0.0);
}

void DensifyStats::append(size_t n_new) {
    grad_accum.resize(grad_accum.size() + n_new, 0.0);
    grad3d_accum.resize(grad3d_accum.size() + n_new, Vec3::Zero());
    count.resize(count.size() + n_new, 0);
    max_radius_px.resize(max_radius_px.size() + n_new, 0.0);
}

Trainer::Trainer(const RunConfig& cfg, const Pinhole& K, GaussianCloud cloud)
    : cfg_(cfg),
      K_(K),
      cloud_(std::move(cloud)),
      window_(cfg.window_size, cfg.theta_view_deg),
      order_rng_(Rng::stream(cfg.seed, 101)) {
    Rng phi_rng = Rng::stream(cfg.seed, 11);
    Rng psi_rng = Rng::stream(cfg.seed, 12);
    phi_ = make_phi(cfg.encoding_freqs, phi_rng);
    psi_ = make_psi(cfg.encoding_freqs, psi_rng);
    scene_radius_ = std::max(cloud_.bounding_radius(), 1e-6);

    const size_t n = cloud_.size();
    stats_.reset(n);
    opt_means_.resize(3 * n);
    opt_rot_.resize(4 * n);
    opt_scales_.resize(3 * n);
    opt_opacity_.resize(n);
    opt_features_.resize(kFeatureDim * n);
    opt_latents_.resize(kLatentDim * n);
    opt_rgb_.resize(3 * n);
    opt_phi_.resize(2 * phi_.n_layers());
    for (size_t l = 0; l < phi_.n_layers(); ++l) {
        opt_phi_[2 * l].resize(size_t(phi_.weights[l].size()));
        opt_phi_[2 * l + 1].resize(size_t(phi_.biases[l].size()));
    }
    opt_psi_.resize(2 * psi_.n_layers());
    for (size_t l = 0; l < psi_.n_layers(); ++l) {
        opt_psi_[2 * l].resize(size_t(psi_.weights[l].size()));
        opt_psi_[2 * l + 1].resize(size_t(psi_.biases[l].size()));
    }
    opt_psi_skip_.resize(1);
}

bool Trainer::optimizer_shapes_consistent() const {
    const size_t n = cloud_.size();
    auto match = [](const AdamState& s, size_t want) {
        return s.m.size() == want && s.v.size() == want;
    };
    return match(opt_means_, 3 * n) && match(opt_rot_, 4 * n) && match(opt_scales_, 3 * n) &&
           match(opt_opacity_, n) && match(opt_features_, kFeatureDim * n) &&
           match(opt_latents_, kLatentDim * n) && match(opt_rgb_, 3 * n);
}

void Trainer::restore(GaussianCloud cloud, Mlp phi, Mlp psi, int64_t rounds_done) {
    cloud_ = std::move(cloud);
    phi_ = std::move(phi);
    psi_ = std::move(psi);
    rounds_done_ = rounds_done;
    scene_radius_ = std::max(cloud_.bounding_radius(), 1e-6);
    const size_t n = cloud_.size();
    stats_.reset(n);
    opt_means_.resize(3 * n);
    opt_rot_.resize(4 * n);
    opt_scales_.resize(3 * n);
    opt_opacity_.resize(n);
    opt_features_.resize(kFeatureDim * n);
    opt_latents_.resize(kLatentDim * n);
    opt_rgb_.resize(3 * n);
}

PipelineOptions Trainer::pipeline_opts(double d_sun) const {
    PipelineOptions opts;
    opts.use_appearance_mlp = cfg_.use_appearance_mlp();
    opts.use_shadow = cfg_.use_shadow();
    opts.encoding_freqs = cfg_.encoding_freqs;
    opts.scene_radius = scene_radius_;
    opts.d_sun = d_sun;
    return opts;
}

double Trainer::window_median_distance() const {
    std::vector<double> d;
    for (const auto& kf : window_.frames()) d.push_back(frames_.at(kf.frame_id).cam_distance);
    if (d.empty()) return 1.0;
    std::sort(d.begin(), d.end());
    return d[d.size() / 2];
}

bool Trainer::ingest(const CameraFrame& frame) {
    KeyframeEntry entry{frame.id, frame.view_dir};
    auto result = window_.ingest(entry);
    if (!result.admitted) return false;
    frames_[frame.id] = frame;
    if (result.evicted_frame_id) frames_.erase(*result.evicted_frame_id);

    if (!window_.full()) return false;
    training_round();
    if (cfg_.densify_interval_rounds > 0 && rounds_done_ % cfg_.densify_interval_rounds == 0)
        densify_and_prune();
    if (on_round_complete) on_round_complete(rounds_done_);
    return true;
}

std::vector<StepRecord> Trainer::training_round() {
    if (!window_.full()) fail("NotReady", "keyframe window not yet full");

    const auto& kfs = window_.frames();
    std::vector<int> order(kfs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    // Seeded Fisher-Yates; avoids ordering bias across rounds.
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[order_rng_.uniform_index(i)]);

    if (on_round) on_round(rounds_done_ + 1, kfs);

    const double d_sun = window_median_distance();
    const int steps = int(order.size());
    std::vector<StepRecord> records;
    for (int s = 0; s < steps; ++s) {
        const CameraFrame& frame = frames_.at(kfs[order[s]].frame_id);
        ForwardPass fwd =
            pipeline_forward(cloud_, phi_, psi_, frame.pose, frame.sun_obj, K_, pipeline_opts(d_sun));

        // L1 region: ground-truth mask union rendered coverage, so strays
        // outside the silhouette still see the black background.
        Image union_mask = frame.mask;
        for (size_t p = 0; p < union_mask.data.size(); ++p)
            if (fwd.coverage.data[p] > 0.5) union_mask.data[p] = 1.0;

        TotalLoss loss = total_loss(fwd.final_image, frame.image, union_mask, cfg_.lambda_ssim,
                                    cfg_.lambda_iso, cfg_.use_iso(), cloud_.log_scales);

        CloudGrads grads = pipeline_backward(cloud_, phi_, psi_, fwd, loss.dimage);
        if (cfg_.use_iso()) {
            for (size_t i = 0; i < cloud_.size(); ++i) grads.dlog_scales[i] += loss.dlog_scales[i];
        }

        // Densification statistics (visible splats only).
        for (size_t i = 0; i < fwd.frame.size(); ++i) {
            const int g = fwd.frame.cloud_index[i];
            stats_.grad_accum[g] += grads.screen_grad_norm[g];
            stats_.grad3d_accum[g] += grads.dmeans[g];
            stats_.count[g] += 1;
            stats_.max_radius_px[g] = std::max(stats_.max_radius_px[g], fwd.frame.radii_px[i]);
        }

        const double decay = std::pow(10.0, -double(s) / steps);
        optimizer_step(grads, decay);

        StepRecord rec;
        rec.round = rounds_done_ + 1;
        rec.frame_id = frame.id;
        rec.loss_total = loss.value;
        rec.loss_l1 = loss.l1;
        rec.loss_ssim = loss.ssim_loss;
        rec.loss_iso = loss.iso;
        rec.gaussian_count = cloud_.size();
        rec.lr = sawtooth_lr(cfg_.lr_means * scene_radius_, s, steps);
        if (on_step) on_step(rec);
        records.push_back(rec);
    }
    ++rounds_done_;
    return records;
}

void Trainer::optimizer_step(const CloudGrads& grads, double decay) {
    const size_t n = cloud_.size();
    static_assert(sizeof(Vec3) == 3 * sizeof(double));
    static_assert(sizeof(Quat) == 4 * sizeof(double));
    static_assert(sizeof(Feature) == kFeatureDim * sizeof(double));

    adam_step(cloud_.means.data()->data(), grads.dmeans.data()->data(), opt_means_, 3 * n,
              decay * cfg_.lr_means * scene_radius_);
    adam_step(&cloud_.rotations.data()->w, grads.drotations.data()->data(), opt_rot_, 4 * n,
              decay * cfg_.lr_rotations);
    adam_step(cloud_.log_scales.data()->data(), grads.dlog_scales.data()->data(), opt_scales_,
              3 * n, decay * cfg_.lr_log_scales);
    adam_step(cloud_.opacity_logits.data(), grads.dopacity_logits.data(), opt_opacity_, n,
              decay * cfg_.lr_opacity);
    if (cfg_.use_appearance_mlp()) {
        adam_step(cloud_.features.data()->data(), grads.dfeatures.data()->data(), opt_features_,
                  kFeatureDim * n, decay * cfg_.lr_features);
        for (size_t l = 0; l < phi_.n_layers(); ++l) {
            adam_step(phi_.weights[l].data(), grads.dphi.dweights[l].data(), opt_phi_[2 * l],
                      size_t(phi_.weights[l].size()), decay * cfg_.lr_phi);
            adam_step(phi_.biases[l].data(), grads.dphi.dbiases[l].data(), opt_phi_[2 * l + 1],
                      size_t(phi_.biases[l].size()), decay * cfg_.lr_phi);
        }
    } else {
        adam_step(cloud_.rgb_logits.data()->data(), grads.drgb_logits.data()->data(), opt_rgb_,
                  3 * n, decay * cfg_.lr_rgb);
    }
    if (cfg_.use_shadow()) {
        adam_step(cloud_.latents.data()->data(), grads.dlatents.data()->data(), opt_latents_,
                  kLatentDim * n, decay * cfg_.lr_latents);
        for (size_t l = 0; l < psi_.n_layers(); ++l) {
            adam_step(psi_.weights[l].data(), grads.dpsi.dweights[l].data(), opt_psi_[2 * l],
                      size_t(psi_.weights[l].size()), decay * cfg_.lr_psi);
            adam_step(psi_.biases[l].data(), grads.dpsi.dbiases[l].data(), opt_psi_[2 * l + 1],
                      size_t(psi_.biases[l].size()), decay * cfg_.lr_psi);
        }
        adam_step(&psi_.skip_weight, &grads.dpsi.dskip_weight, opt_psi_skip_, 1,
                  decay * cfg_.lr_psi);
    }

    // Restore parameter domain invariants.
    const double ls_min = std::log(1e-6), ls_max = std::log(scene_radius_);
    for (size_t i = 0; i < n; ++i) {
        cloud_.rotations[i] = cloud_.rotations[i].normalized();
        for (int k = 0; k < 3; ++k)
            cloud_.log_scales[i][k] = std::clamp(cloud_.log_scales[i][k], ls_min, ls_max);
    }
}

void Trainer::densify_and_prune() {
    const size_t n = cloud_.size();
    const double tau_small = cfg_.tau_small_frac * scene_radius_;
    const double radius_limit = cfg_.prune_radius_px_frac * std::max(K_.width, K_.height);
    const double world_limit = cfg_.prune_world_frac * scene_radius_;
    Rng rng = Rng::stream(cfg_.seed, 3000 + uint64_t(rounds_done_));

    // Clone/split selection from the accumulated screen gradients.
    std::vector<int> moment_source; // per post-op Gaussian: source index or -1
    GaussianCloud next;
    next.reserve(n + n / 4);
    for (size_t i = 0; i < n; ++i) {
        const double opacity = cloud_.opacity(i);
        const double max_scale = cloud_.scales(i).maxCoeff();
        const bool prune = opacity < cfg_.tau_prune || stats_.max_radius_px[i] > radius_limit ||
                           max_scale > world_limit;
        if (prune) continue;

        const double mean_grad =
            stats_.count[i] > 0 ? stats_.grad_accum[i] / stats_.count[i] : 0.0;
        const bool densify = mean_grad > cfg_.tau_grad;

        if (densify && max_scale >= tau_small) {
            // Split: two children sampled inside the parent, scales / 1.6.
            Mat3 R = quat_to_rotmat(cloud_.rotations[i]);
            Vec3 s = cloud_.scales(i);
            Vec3 child_ls = cloud_.log_scales[i].array() - std::log(1.6);
            for (int c = 0; c < 2; ++c) {
                Vec3 local(rng.normal() * s[0], rng.normal() * s[1], rng.normal() * s[2]);
                next.push_back(cloud_.means[i] + R * local, child_ls, cloud_.rotations[i],
                               cloud_.opacity_logits[i], cloud_.features[i], cloud_.latents[i],
                               cloud_.rgb_logits[i]);
                moment_source.push_back(-1); // fresh moments for split children
            }
        } else if (densify) {
            // Clone: keep the original and add a copy shifted by one gradient
            // step along the accumulated 3D mean gradient.
            next.push_back(cloud_.means[i], cloud_.log_scales[i], cloud_.rotations[i],
                           cloud_.opacity_logits[i], cloud_.features[i], cloud_.latents[i],
                           cloud_.rgb_logits[i]);
            moment_source.push_back(int(i));
            Vec3 g3 = stats_.count[i] > 0 ? Vec3(stats_.grad3d_accum[i] / stats_.count[i])
                                          : Vec3::Zero();
            Vec3 shifted = cloud_.means[i] - cfg_.lr_means * scene_radius_ * g3;
            next.push_back(shifted, cloud_.log_scales[i], cloud_.rotations[i],
                           cloud_.opacity_logits[i], cloud_.features[i], cloud_.latents[i],
                           cloud_.rgb_logits[i]);
            moment_source.push_back(int(i)); // clones inherit moments
        } else {
            next.push_back(cloud_.means[i], cloud_.log_scales[i], cloud_.rotations[i],
                           cloud_.opacity_logits[i], cloud_.features[i], cloud_.latents[i],
                           cloud_.rgb_logits[i]);
            moment_source.push_back(int(i));
        }
    }
    cloud_ = std::move(next);
    opt_means_.remap(moment_source, 3);
    opt_rot_.remap(moment_source, 4);
    opt_scales_.remap(moment_source, 3);
    opt_opacity_.remap(moment_source, 1);
    opt_features_.remap(moment_source, kFeatureDim);
    opt_latents_.remap(moment_source, kLatentDim);
    opt_rgb_.remap(moment_source, 3);
    stats_.reset(cloud_.size());
}

ForwardPass Trainer::render(const RigidTransform& pose, const Vec3& sun_obj, double d_sun) const {
    return pipeline_forward(cloud_, phi_, psi_, pose, sun_obj, K_, pipeline_opts(d_sun));
}

CameraFrame load_frame(const std::string& dataset_dir, const Manifest& manifest, size_t index) {
    namespace fs = std::filesystem;
    const FrameRecord& rec = manifest.frames.at(index);
    CameraFrame frame;
    frame.id = rec.id;
    frame.pose = {rec.q_obj2cam, rec.t_obj2cam};
    frame.sun_obj = rec.sun_obj;
    frame.image = read_png((fs::path(dataset_dir) / rec.image).string());
    Image mask_raw = read_png((fs::path(dataset_dir) / rec.mask).string());
    frame.mask = Image(mask_raw.height, mask_raw.width, 1);
    for (size_t p = 0; p < frame.mask.data.size(); ++p)
        frame.mask.data[p] = mask_raw.data[p] >= 128.0 / 255.0 ? 1.0 : 0.0;
    Vec3 center = frame.pose.center_in_object();
    frame.cam_distance = center.norm();
    frame.view_dir = frame.cam_distance > 1e-12 ? Vec3(center / frame.cam_distance) : Vec3::UnitZ();
    return frame;
}

TrainResult run_training(Trainer& trainer, const Manifest& manifest,
                         const std::string& dataset_dir, size_t start_index) {
    if (manifest.frames.empty()) fail("EmptyDataset", "manifest has no frames");
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    for (size_t i = start_index; i < manifest.frames.size(); ++i) {
        if (manifest.holdout_start >= 0 && manifest.frames[i].id >= manifest.holdout_start)
            continue;
        CameraFrame frame = load_frame(dataset_dir, manifest, i);
        trainer.ingest(frame);
        result.frames_consumed = int(i) + 1;
    }
    result.rounds = trainer.rounds_done();
    result.steps = trainer.rounds_done() * trainer.config().window_size;
    for (const auto& kf : trainer.window().frames()) result.final_window_ids.push_back(kf.frame_id);
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

} // namespace sgs
