#include "sgs/losses.hpp"

#include "sgs/common.hpp"

#include <array>
#include <cmath>

namespace sgs {

namespace {

std::array<double, kSsimWindow> ssim_kernel() {
    std::array<double, kSsimWindow> k{};
    const int half = kSsimWindow / 2;
    double sum = 0;
    for (int i = 0; i < kSsimWindow; ++i) {
        double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

// Valid separable correlation of one channel, H x W -> (H-10) x (W-10).
std::vector<double> filter_valid(const Image& img, int ch, int vh, int vw) {
    static const auto k = ssim_kernel();
    const int h = img.height, w = img.width;
    std::vector<double> rows(size_t(h) * vw);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * img.at(y, x + i, ch);
            rows[size_t(y) * vw + x] = s;
        }
    std::vector<double> out(size_t(vh) * vw);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double s = 0;
            for (int i = 0; i < kSsimWindow; ++i) s += k[i] * rows[size_t(y + i) * vw + x];
            out[size_t(y) * vw + x] = s;
        }
    return out;
}

// Adjoint of filter_valid: scatters a (vh x vw) gradient field back to H x W.
void scatter_adjoint(const std::vector<double>& g, int vh, int vw, int h, int w, Image& out,
                     int ch, const Image* mul_by, double mul_scale) {
    static const auto k = ssim_kernel();
    std::vector<double> rows(size_t(h) * vw, 0.0);
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < vw; ++x) {
            double v = g[size_t(y) * vw + x];
            if (v == 0) continue;
            for (int i = 0; i < kSsimWindow; ++i) rows[size_t(y + i) * vw + x] += k[i] * v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < vw; ++x) {
            double v = rows[size_t(y) * vw + x];
            if (v == 0) continue;
            for (int i = 0; i < kSsimWindow; ++i) {
                double contrib = k[i] * v;
                if (mul_by) contrib *= mul_scale * mul_by->at(y, x + i, ch);
                out.at(y, x + i, ch) += contrib;
            }
        }
}

} // namespace

LossGrad l1_loss(const Image& pred, const Image& gt, const Image& mask) {
    if (!pred.same_shape(gt)) fail("DimensionMismatch", "pred/gt shapes differ");
    if (mask.height != pred.height || mask.width != pred.width || mask.channels != 1)
        fail("DimensionMismatch", "mask must be H x W x 1");

    size_t count = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x)
            if (mask.at(y, x, 0) > 0.5) ++count;
    if (count == 0) fail("EmptyMask", "no pixels selected");

    LossGrad out;
    out.grad = Image(pred.height, pred.width, pred.channels);
    const double norm = 1.0 / (double(count) * pred.channels);
    double sum = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (mask.at(y, x, 0) <= 0.5) continue;
            for (int c = 0; c < pred.channels; ++c) {
                double r = pred.at(y, x, c) - gt.at(y, x, c);
                sum += std::abs(r);
                out.grad.at(y, x, c) = sign(r) * norm;
            }
        }
    out.value = sum * norm;
    return out;
}

SsimPass::SsimPass(const Image& pred, const Image& gt) : pred_(&pred), gt_(&gt) {
    if (!pred.same_shape(gt)) fail("DimensionMismatch", "pred/gt shapes differ");
    h_ = pred.height;
    w_ = pred.width;
    c_ = pred.channels;
    if (h_ < kSsimWindow || w_ < kSsimWindow)
        fail("DimensionMismatch", "image smaller than the SSIM window");
    vh_ = h_ - kSsimWindow + 1;
    vw_ = w_ - kSsimWindow + 1;

    Image xx(h_, w_, c_), yy(h_, w_, c_), xy(h_, w_, c_);
    for (size_t i = 0; i < pred.data.size(); ++i) {
        xx.data[i] = pred.data[i] * pred.data[i];
        yy.data[i] = gt.data[i] * gt.data[i];
        xy.data[i] = pred.data[i] * gt.data[i];
    }

    mu_x_.resize(c_);
    mu_y_.resize(c_);
    mu_xx_.resize(c_);
    mu_yy_.resize(c_);
    mu_xy_.resize(c_);
    const double C1 = kSsimK1 * kSsimK1, C2 = kSsimK2 * kSsimK2;
    double total = 0;
    for (int ch = 0; ch < c_; ++ch) {
        mu_x_[ch] = filter_valid(pred, ch, vh_, vw_);
        mu_y_[ch] = filter_valid(gt, ch, vh_, vw_);
        mu_xx_[ch] = filter_valid(xx, ch, vh_, vw_);
        mu_yy_[ch] = filter_valid(yy, ch, vh_, vw_);
        mu_xy_[ch] = filter_valid(xy, ch, vh_, vw_);
        for (size_t i = 0; i < mu_x_[ch].size(); ++i) {
            double mx = mu_x_[ch][i], my = mu_y_[ch][i];
            double sx = mu_xx_[ch][i] - mx * mx;
            double sy = mu_yy_[ch][i] - my * my;
            double sxy = mu_xy_[ch][i] - mx * my;
            double a1 = 2 * mx * my + C1, a2 = 2 * sxy + C2;
            double b1 = mx * mx + my * my + C1, b2 = sx + sy + C2;
            total += (a1 * a2) / (b1 * b2);
        }
    }
    value_ = total / (double(vh_) * vw_ * c_);
}

double SsimPass::window_value(int y, int x) const {
    const double C1 = kSsimK1 * kSsimK1, C2 = kSsimK2 * kSsimK2;
    const size_t i = size_t(y) * vw_ + x;
    double total = 0;
    for (int ch = 0; ch < c_; ++ch) {
        double mx = mu_x_[ch][i], my = mu_y_[ch][i];
        double sx = mu_xx_[ch][i] - mx * mx;
        double sy = mu_yy_[ch][i] - my * my;
        double sxy = mu_xy_[ch][i] - mx * my;
        double a1 = 2 * mx * my + C1, a2 = 2 * sxy + C2;
        double b1 = mx * mx + my * my + C1, b2 = sx + sy + C2;
        total += (a1 * a2) / (b1 * b2);
    }
    return total / c_;
}

Image SsimPass::backward(double upstream) const {
    const double C1 = kSsimK1 * kSsimK1, C2 = kSsimK2 * kSsimK2;
    const double norm = upstream / (double(vh_) * vw_ * c_);
    Image out(h_, w_, c_);
    std::vector<double> g_mx(size_t(vh_) * vw_), g_mxx(size_t(vh_) * vw_),
        g_mxy(size_t(vh_) * vw_);
    for (int ch = 0; ch < c_; ++ch) {
        for (size_t i = 0; i < g_mx.size(); ++i) {
            double mx = mu_x_[ch][i], my = mu_y_[ch][i];
            double sx = mu_xx_[ch][i] - mx * mx;
            double sy = mu_yy_[ch][i] - my * my;
            double sxy = mu_xy_[ch][i] - mx * my;
            double a1 = 2 * mx * my + C1, a2 = 2 * sxy + C2;
            double b1 = mx * mx + my * my + C1, b2 = sx + sy + C2;
            double s = (a1 * a2) / (b1 * b2);
            double dA1 = a2 / (b1 * b2);
            double dA2 = a1 / (b1 * b2);
            double dB1 = -s / b1;
            double dB2 = -s / b2;
            // Partials w.r.t. the filtered fields feeding this window.
            g_mx[i] = norm * (2 * my * dA1 + 2 * mx * dB1 - 2 * mx * dB2 - my * 2 * dA2);
            g_mxx[i] = norm * dB2;
            g_mxy[i] = norm * 2 * dA2;
        }
        scatter_adjoint(g_mx, vh_, vw_, h_, w_, out, ch, nullptr, 0.0);
        scatter_adjoint(g_mxx, vh_, vw_, h_, w_, out, ch, pred_, 2.0);
        scatter_adjoint(g_mxy, vh_, vw_, h_, w_, out, ch, gt_, 1.0);
    }
    return out;
}

LossGrad photometric_loss(const Image& pred, const Image& gt, const Image& mask,
                          double lambda_ssim) {
    LossGrad l1 = l1_loss(pred, gt, mask);
    SsimPass sp(pred, gt);
    LossGrad out;
    out.value = (1.0 - lambda_ssim) * l1.value + lambda_ssim * (1.0 - sp.value());
    out.grad = Image(pred.height, pred.width, pred.channels);
    Image ssim_grad = sp.backward(-lambda_ssim); // d(1 - ssim)/dpred
    for (size_t i = 0; i < out.grad.data.size(); ++i)
        out.grad.data[i] = (1.0 - lambda_ssim) * l1.grad.data[i] + ssim_grad.data[i];
    return out;
}

IsoLoss isotropic_loss(const std::vector<Vec3>& log_scales) {
    IsoLoss out;
    out.dlog_scales.assign(log_scales.size(), Vec3::Zero());
    for (size_t i = 0; i < log_scales.size(); ++i) {
        Vec3 s = log_scales[i].array().exp();
        double mean = s.mean();
        Vec3 sg(sign(s[0] - mean), sign(s[1] - mean), sign(s[2] - mean));
        out.value += std::abs(s[0] - mean) + std::abs(s[1] - mean) + std::abs(s[2] - mean);
        double sg_mean = sg.mean();
        for (int k = 0; k < 3; ++k)
            out.dlog_scales[i][k] = (sg[k] - sg_mean) * s[k]; // chain through exp
    }
    return out;
}

TotalLoss total_loss(const Image& pred, const Image& gt, const Image& mask, double lambda_ssim,
                     double lambda_iso, bool iso_active, const std::vector<Vec3>& log_scales) {
    TotalLoss out;
    LossGrad l1 = l1_loss(pred, gt, mask);
    SsimPass sp(pred, gt);
    out.l1 = l1.value;
    out.ssim_loss = 1.0 - sp.value();
    out.dimage = Image(pred.height, pred.width, pred.channels);
    Image ssim_grad = sp.backward(-lambda_ssim);
    for (size_t i = 0; i < out.dimage.data.size(); ++i)
        out.dimage.data[i] = (1.0 - lambda_ssim) * l1.grad.data[i] + ssim_grad.data[i];
    out.value = (1.0 - lambda_ssim) * out.l1 + lambda_ssim * out.ssim_loss;
    if (iso_active) {
        IsoLoss iso = isotropic_loss(log_scales);
        out.iso = iso.value;
        out.value += lambda_iso * iso.value;
        out.dlog_scales.assign(log_scales.size(), Vec3::Zero());
        for (size_t i = 0; i < log_scales.size(); ++i)
            out.dlog_scales[i] = lambda_iso * iso.dlog_scales[i];
    }
    return out;
}

double psnr(const Image& pred, const Image& gt) {
    if (!pred.same_shape(gt)) fail("DimensionMismatch", "pred/gt shapes differ");
    double mse = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        double d = pred.data[i] - gt.data[i];
        mse += d * d;
    }
    mse /= double(pred.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double psnr_masked(const Image& pred, const Image& gt, const Image& mask) {
    double mse = 0;
    size_t count = 0;
    for (int y = 0; y < pred.height; ++y)
        for (int x = 0; x < pred.width; ++x) {
            if (mask.at(y, x, 0) <= 0.5) continue;
            for (int c = 0; c < pred.channels; ++c) {
                double d = pred.at(y, x, c) - gt.at(y, x, c);
                mse += d * d;
                ++count;
            }
        }
    if (count == 0) fail("EmptyMask", "no pixels selected");
    mse /= double(count);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

double ssim_masked(const Image& pred, const Image& gt, const Image& mask) {
    // Average of per-window SSIM over windows whose center pixel is masked.
    SsimPass sp(pred, gt);
    const int half = kSsimWindow / 2;
    double total = 0;
    size_t count = 0;
    for (int y = 0; y < sp.valid_h(); ++y)
        for (int x = 0; x < sp.valid_w(); ++x) {
            if (mask.at(y + half, x + half, 0) <= 0.5) continue;
            total += sp.window_value(y, x);
            ++count;
        }
    if (count == 0) fail("EmptyMask", "no masked SSIM windows");
    return total / double(count);
}

} // namespace sgs
