#include "sgs/shadow.hpp"

#include "sgs/parallel.hpp"

#include <algorithm>

namespace sgs {

RigidTransform make_sun_camera(const Vec3& sun_obj, double d_sun) {
    Vec3 sun = sun_obj.normalized();
    int smallest = 0;
    for (int k = 1; k < 3; ++k)
        if (std::abs(sun[k]) < std::abs(sun[smallest])) smallest = k;
    Vec3 up = Vec3::Zero();
    up[smallest] = 1.0;

    Vec3 z_cam = -sun; // boresight, looking back at the origin
    Vec3 x_cam = up.cross(z_cam).normalized();
    Vec3 y_cam = z_cam.cross(x_cam);
    Mat3 R;
    R.row(0) = x_cam;
    R.row(1) = y_cam;
    R.row(2) = z_cam;
    Quat q = quat_from_rotmat(R);

    Vec3 center = d_sun * sun;
    return {q, -(quat_to_rotmat(q) * center)};
}

namespace {

// Orthographic sun-view splat frame. Sun rays are parallel, so an affine
// projection both matches the physical model and makes the EWA footprint
// exact; the pixel scale fx/d_sun reproduces the perspective magnification at
// the object. No anti-aliasing dilation: visibility samples splats at
// projected points, not pixel footprints.
SplatFrame ortho_sun_frame(const GaussianCloud& cloud, const RigidTransform& sun_cam,
                           const Pinhole& K, double d_sun) {
    SplatFrame frame;
    frame.intr = K;
    frame.width = K.width;
    frame.height = K.height;
    frame.tiles_x = (K.width + kTileSize - 1) / kTileSize;
    frame.tiles_y = (K.height + kTileSize - 1) / kTileSize;
    frame.w_rot = quat_to_rotmat(sun_cam.rotation);

    Mat23 J = Mat23::Zero();
    J(0, 0) = K.fx / d_sun;
    J(1, 1) = K.fy / d_sun;

    struct Candidate {
        int index;
        double depth;
        Vec2 mean2d;
        Mat2 inv_cov;
        double radius, opacity;
    };
    std::vector<Candidate> kept;
    kept.reserve(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        Vec3 p = frame.w_rot * cloud.means[i] + sun_cam.translation;
        if (p.z() <= kZNear) continue;
        Mat3 sigma = build_covariance(cloud.rotations[i], cloud.log_scales[i]);
        Mat23 M = J * frame.w_rot;
        Mat2 cov = M * sigma * M.transpose();
        double det = cov.determinant();
        if (det <= kDegenerateDet) continue;
        Mat2 inv;
        inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(0, 1) / det, cov(0, 0) / det;
        double half_trace = 0.5 * (cov(0, 0) + cov(1, 1));
        double tail = std::sqrt(std::max(0.0, half_trace * half_trace - det));
        double radius = kBinningSigmas * std::sqrt(half_trace + tail);
        Vec2 mean2d(J(0, 0) * p.x() + K.cx, J(1, 1) * p.y() + K.cy);
        kept.push_back({int(i), p.z(), mean2d, inv, radius, cloud.opacity(i)});
    }
    std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });
    frame.tile_lists.assign(size_t(frame.tiles_x) * frame.tiles_y, {});
    for (const auto& c : kept) {
        int pos = int(frame.cloud_index.size());
        frame.cloud_index.push_back(c.index);
        frame.means2d.push_back(c.mean2d);
        frame.depths.push_back(c.depth);
        frame.inv_covs.push_back(c.inv_cov);
        frame.opacities.push_back(c.opacity);
        frame.radii_px.push_back(c.radius);
        int tx0 = std::max(0, int(std::floor((c.mean2d.x() - c.radius) / kTileSize)));
        int tx1 = std::min(frame.tiles_x - 1, int(std::floor((c.mean2d.x() + c.radius) / kTileSize)));
        int ty0 = std::max(0, int(std::floor((c.mean2d.y() - c.radius) / kTileSize)));
        int ty1 = std::min(frame.tiles_y - 1, int(std::floor((c.mean2d.y() + c.radius) / kTileSize)));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                frame.tile_lists[size_t(ty) * frame.tiles_x + tx].push_back(pos);
    }
    return frame;
}

} // namespace

std::vector<double> sun_visibility(const GaussianCloud& cloud, const Vec3& sun_obj,
                                   const Pinhole& K, double d_sun) {
    const size_t n = cloud.size();
    if (n == 0) fail("EmptyCloud", "sun visibility of an empty cloud");

    RigidTransform sun_cam = make_sun_camera(sun_obj, d_sun);
    SplatFrame frame = ortho_sun_frame(cloud, sun_cam, K, d_sun);

    // Sun-view projection & depth per Gaussian (occludees), independent of the
    // occluder culling above.
    Mat3 R = quat_to_rotmat(sun_cam.rotation);
    const double sx = K.fx / d_sun, sy = K.fy / d_sun;
    std::vector<Vec2> proj(n);
    std::vector<double> depth(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 p = R * cloud.means[i] + sun_cam.translation;
        depth[i] = p.z();
        proj[i] = Vec2(sx * p.x() + K.cx, sy * p.y() + K.cy);
    }

    std::vector<double> vis(n, 1.0);
    parallel_for(int64_t(n), 64, [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const Vec2& x = proj[i];
            const bool inside = x.x() >= 0 && x.x() < K.width && x.y() >= 0 && x.y() < K.height;
            // Inside the image, the tile list already holds every splat whose
            // weight at x can reach the cutoff; outside, scan all of them.
            const std::vector<int>* list = nullptr;
            std::vector<int> all;
            if (inside) {
                list = &frame.tile_at(int(x.x()), int(x.y()));
            } else {
                all.resize(frame.size());
                for (size_t k = 0; k < frame.size(); ++k) all[k] = int(k);
                list = &all;
            }
            double v = 1.0;
            for (int idx : *list) {
                if (frame.depths[idx] >= depth[i]) break; // sorted; rest are behind
                if (frame.cloud_index[idx] == int(i)) continue;
                Vec2 d = x - frame.means2d[idx];
                double w = eval_gaussian_2d(frame.inv_covs[idx], d);
                if (w < kWeightCutoff) continue;
                double alpha = std::min(frame.opacities[idx] * w, kAlphaClamp);
                v *= 1.0 - alpha;
            }
            vis[i] = v;
        }
    });
    return vis;
}

Image apply_shadow(const Image& color, const Image& shadow) {
    if (color.height != shadow.height || color.width != shadow.width || shadow.channels != 1)
        fail("DimensionMismatch", "shadow image must be H x W x 1 matching the color image");
    Image out = color;
    for (int y = 0; y < color.height; ++y)
        for (int x = 0; x < color.width; ++x)
            for (int c = 0; c < color.channels; ++c) out.at(y, x, c) *= shadow.at(y, x, 0);
    return out;
}

void apply_shadow_backward(const Image& color, const Image& shadow, const Image& dL_dout,
                           Image& dL_dcolor, Image& dL_dshadow) {
    dL_dcolor = Image(color.height, color.width, color.channels);
    dL_dshadow = Image(color.height, color.width, 1);
    for (int y = 0; y < color.height; ++y)
        for (int x = 0; x < color.width; ++x) {
            double s = shadow.at(y, x, 0);
            double acc = 0;
            for (int c = 0; c < color.channels; ++c) {
                double g = dL_dout.at(y, x, c);
                dL_dcolor.at(y, x, c) = g * s;
                acc += g * color.at(y, x, c);
            }
            dL_dshadow.at(y, x, 0) = acc;
        }
}

} // namespace sgs
