#pragma once

#include "sgs/checkpoint.hpp"
#include "sgs/datagen.hpp"

#include <string>
#include <vector>

namespace sgs {

struct EvalRow {
    int frame_id = -1;
    double psnr_full = 0, psnr_masked = 0;
    double ssim_full = 0, ssim_masked = 0;
};

struct EvalReport {
    std::string split;
    std::vector<EvalRow> rows;
    double mean_psnr_full = 0, mean_psnr_masked = 0;
    double mean_ssim_full = 0, mean_ssim_masked = 0;
    size_t gaussian_count = 0;
    double frames_per_sec = 0;

    std::string to_json() const;
    std::string to_table() const;
};

/// Renders every frame of a split with the checkpoint's configuration pathway
/// and reports full-frame and masked PSNR/SSIM. split is one of
/// "train-window", "holdout", "random-pose".
EvalReport evaluate_checkpoint(const Checkpoint& ckpt, const std::string& dataset_dir,
                               const std::string& split);

} // namespace sgs
