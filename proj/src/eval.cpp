#include "sgs/eval.hpp"

#include "sgs/losses.hpp"
#include "sgs/pipeline.hpp"
#include "sgs/trainer.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>

namespace sgs {

using nlohmann::json;

namespace {

// Infinite PSNR (bit-identical render) folds to a large finite value so the
// aggregate mean stays meaningful.
double fold_inf(double v) { return std::isinf(v) ? 99.0 : v; }

} // namespace

EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const std::string& dataset_dir,
                               const std::string& split) {
    namespace fs = std::filesystem;
    EvalReport report;
    report.split = split;
    report.gaussian_count = ckpt.cloud.size();

    std::string dir = dataset_dir;
    Manifest manifest;
    std::vector<size_t> indices;
    if (split == "random-pose") {
        dir = (fs::path(dataset_dir) / "eval").string();
        manifest = load_manifest(dir);
        for (size_t i = 0; i < manifest.frames.size(); ++i) indices.push_back(i);
    } else if (split == "holdout") {
        manifest = load_manifest(dir);
        if (manifest.holdout_start < 0) fail("ConfigError", "dataset has no holdout split");
        for (size_t i = 0; i < manifest.frames.size(); ++i)
            if (manifest.frames[i].id >= manifest.holdout_start) indices.push_back(i);
    } else if (split == "train-window") {
        manifest = load_manifest(dir);
        for (size_t i = 0; i < manifest.frames.size(); ++i)
            if (std::find(ckpt.final_window_ids.begin(), ckpt.final_window_ids.end(),
                          manifest.frames[i].id) != ckpt.final_window_ids.end())
                indices.push_back(i);
    } else {
        fail("ConfigError", "split must be train-window, holdout, or random-pose");
    }
    if (indices.empty()) fail("EmptyDataset", "split '" + split + "' selects no frames");

    PipelineOptions opts;
    opts.use_appearance_mlp = ckpt.config.use_appearance_mlp();
    opts.use_shadow = ckpt.config.use_shadow();
    opts.encoding_freqs = ckpt.config.encoding_freqs;
    opts.scene_radius = ckpt.scene_radius;

    const auto t0 = std::chrono::steady_clock::now();
    for (size_t idx : indices) {
        CameraFrame frame = load_frame(dir, manifest, idx);
        opts.d_sun = frame.cam_distance; // singleton window: its own distance
        ForwardPass fwd = pipeline_forward(ckpt.cloud, ckpt.phi, ckpt.psi, frame.pose,
                                           frame.sun_obj, manifest.intrinsics, opts);
        EvalRow row;
        row.frame_id = frame.id;
        row.psnr_full = fold_inf(psnr(fwd.final_image, frame.image));
        row.psnr_masked = fold_inf(psnr_masked(fwd.final_image, frame.image, frame.mask));
        row.ssim_full = ssim(fwd.final_image, frame.image);
        row.ssim_masked = ssim_masked(fwd.final_image, frame.image, frame.mask);
        report.rows.push_back(row);
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.frames_per_sec = wall > 0 ? double(indices.size()) / wall : 0.0;

    for (const auto& r : report.rows) {
        report.mean_psnr_full += r.psnr_full;
        report.mean_psnr_masked += r.psnr_masked;
        report.mean_ssim_full += r.ssim_full;
        report.mean_ssim_masked += r.ssim_masked;
    }
    const double n = double(report.rows.size());
    report.mean_psnr_full /= n;
    report.mean_psnr_masked /= n;
    report.mean_ssim_full /= n;
    report.mean_ssim_masked /= n;
    return report;
}

std::string EvalReport::to_json() const {
    json j;
    j["split"] = split;
    j["gaussian_count"] = gaussian_count;
    j["frames_per_sec"] = frames_per_sec;
    j["aggregate"] = {{"psnr_full", mean_psnr_full},
                      {"psnr_masked", mean_psnr_masked},
                      {"ssim_full", mean_ssim_full},
                      {"ssim_masked", mean_ssim_masked}};
    j["frames"] = json::array();
    for (const auto& r : rows) {
        j["frames"].push_back({{"id", r.frame_id},
                               {"psnr_full", r.psnr_full},
                               {"psnr_masked", r.psnr_masked},
                               {"ssim_full", r.ssim_full},
                               {"ssim_masked", r.ssim_masked}});
    }
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::string out;
    char line[160];
    std::snprintf(line, sizeof(line), "%8s %12s %12s %12s %12s\n", "frame", "psnr_full",
                  "psnr_mask", "ssim_full", "ssim_mask");
    out += line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%8d %12.4f %12.4f %12.6f %12.6f\n", r.frame_id,
                      r.psnr_full, r.psnr_masked, r.ssim_full, r.ssim_masked);
        out += line;
    }
    std::snprintf(line, sizeof(line), "%8s %12.4f %12.4f %12.6f %12.6f\n", "mean", mean_psnr_full,
                  mean_psnr_masked, mean_ssim_full, mean_ssim_masked);
    out += line;
    std::snprintf(line, sizeof(line), "gaussians: %zu   frames/sec: %.3f\n", gaussian_count,
                  frames_per_sec);
    out += line;
    return out;
}

} // namespace sgs
