#pragma once

#include "sgs/image.hpp"

#include <limits>
#include <vector>

namespace sgs {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct LossGrad {
    double value = 0.0;
    Image grad; // dL/dpred
};

/// Mean |pred - gt| over masked pixels and channels. Throws EmptyMask.
LossGrad l1_loss(const Image& pred, const Image& gt, const Image& mask);

// SSIM with an 11x11 Gaussian window (sigma 1.5), dynamic range 1, averaged
// over channels, valid windows only (no padding). Keeps the filtered moment
// fields needed for the analytic gradient.
class SsimPass {
public:
    SsimPass(const Image& pred, const Image& gt);
    double value() const { return value_; }
    /// dL/dpred for a loss with d(loss)/d(ssim) = upstream.
    Image backward(double upstream) const;

    int valid_h() const { return vh_; }
    int valid_w() const { return vw_; }
    /// SSIM of the window whose top-left corner is (y, x), averaged channels.
    double window_value(int y, int x) const;

private:
    int h_, w_, c_, vh_, vw_;
    double value_;
    const Image *pred_, *gt_;
    // per channel, vh x vw fields
    std::vector<std::vector<double>> mu_x_, mu_y_, mu_xx_, mu_yy_, mu_xy_;
};

inline double ssim(const Image& pred, const Image& gt) { return SsimPass(pred, gt).value(); }

/// (1 - lambda) * L1 + lambda * (1 - SSIM), with superposed gradients.
LossGrad photometric_loss(const Image& pred, const Image& gt, const Image& mask,
                          double lambda_ssim);

struct IsoLoss {
    double value = 0.0;
    std::vector<Vec3> dlog_scales;
};

/// Sum over Gaussians of || s - mean(s) * 1 ||_1 on exponentiated scales.
IsoLoss isotropic_loss(const std::vector<Vec3>& log_scales);

struct TotalLoss {
    double value = 0.0;
    double l1 = 0.0;
    double ssim_loss = 0.0; // 1 - SSIM
    double iso = 0.0;
    Image dimage;
    std::vector<Vec3> dlog_scales;
};

/// Photometric plus (optionally) the isotropic term.
TotalLoss total_loss(const Image& pred, const Image& gt, const Image& mask, double lambda_ssim,
                     double lambda_iso, bool iso_active, const std::vector<Vec3>& log_scales);

/// 10 log10(1 / MSE) over the full image; +inf for identical inputs.
double psnr(const Image& pred, const Image& gt);
double psnr_masked(const Image& pred, const Image& gt, const Image& mask);
double ssim_masked(const Image& pred, const Image& gt, const Image& mask);

} // namespace sgs
