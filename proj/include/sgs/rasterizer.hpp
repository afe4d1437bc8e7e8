#pragma once

#include "sgs/cloud.hpp"
#include "sgs/image.hpp"

#include <vector>

namespace sgs {

inline constexpr int kTileSize = 16;
inline constexpr double kAlphaClamp = 0.99;
inline constexpr double kWeightCutoff = 1.0 / 255.0;
inline constexpr double kTransmittanceStop = 1e-4;
// Binning radius in sigmas of the major splat axis. 3.5 sigma covers the whole
// region where the Gaussian weight is >= kWeightCutoff (exp(-0.5 r^2) hits
// 1/255 at r = 3.33), so tile truncation never drops a blended contribution.
inline constexpr double kBinningSigmas = 3.5;

/// 2D Gaussian weight exp(-0.5 d^T Q d). Call sites skip weights < kWeightCutoff.
inline double eval_gaussian_2d(const Mat2& inv_cov, const Vec2& d) {
    double q = inv_cov(0, 0) * d.x() * d.x() + 2.0 * inv_cov(0, 1) * d.x() * d.y() +
               inv_cov(1, 1) * d.y() * d.y();
    return std::exp(-0.5 * q);
}

// Culled, depth-sorted, tile-binned view of a cloud from one camera. Also keeps
// the intermediates the geometry backward needs (camera points, J*W, dilated
// 2x2 covariance).
struct SplatFrame {
    Pinhole intr;
    int width = 0, height = 0;
    int tiles_x = 0, tiles_y = 0;

    std::vector<int> cloud_index; // per visible splat, ascending depth
    std::vector<Vec2> means2d;
    std::vector<double> depths;
    std::vector<Mat2> inv_covs;
    std::vector<double> opacities; // alpha source (post-sigmoid)
    std::vector<double> radii_px;  // binning radius

    std::vector<Mat2> cov2d;
    std::vector<Mat23> jw; // J * W_rot
    std::vector<Vec3> p_cam;
    Mat3 w_rot = Mat3::Identity();

    std::vector<std::vector<int>> tile_lists; // indices into the arrays above

    size_t size() const { return cloud_index.size(); }
    const std::vector<int>& tile_at(int px, int py) const {
        return tile_lists[size_t(py / kTileSize) * tiles_x + px / kTileSize];
    }
};

/// Projects, culls (behind camera, degenerate splats), sorts ascending by
/// depth with ties broken by Gaussian index, and bins into 16x16 tiles.
/// `dilation` is the anti-aliasing diagonal floor; the sun-visibility pass
/// passes 0 because it samples splats at points, not pixel footprints.
SplatFrame cull_and_sort(const GaussianCloud& cloud, const RigidTransform& T, const Pinhole& K,
                         double dilation = kCovDilation);

struct RenderOutput {
    Image color;                       // H x W x payload_dim
    Image transmittance;               // H x W x 1, final per-pixel transmittance
    std::vector<int> contributor_count; // per pixel
};

// payload holds one row per visible splat (kPayloadDim columns). When
// background_fill is set, `fill * transmittance` is added per pixel (used by
// the shadow image so uncovered pixels read 1).
RenderOutput rasterize_forward(const SplatFrame& frame, const MatXR& payload,
                               double background_fill = 0.0);

struct RasterGrads {
    MatXR dpayload;
    std::vector<Vec2> dmean2d;
    std::vector<Vec3> dinv_cov; // gradient on (Q00, Q01, Q11)
    std::vector<double> dopacity;
};

// Exact reverse of rasterize_forward (same clamp/skip/stop rules). dL_dtrans,
// when non-null, is an upstream gradient on the final transmittance (the
// background-fill path of the shadow image). Per-tile partial buffers are
// reduced in tile order, so results are bit-identical for any worker count.
RasterGrads rasterize_backward(const SplatFrame& frame, const MatXR& payload,
                               const RenderOutput& out, const Image& dL_dcolor,
                               const Image* dL_dtrans = nullptr);

} // namespace sgs
