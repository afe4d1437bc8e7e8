#include "sgs/rasterizer.hpp"

#include "sgs/parallel.hpp"

#include <algorithm>
#include <numeric>

namespace sgs {

SplatFrame cull_and_sort(const GaussianCloud& cloud, const RigidTransform& T, const Pinhole& K,
                         double dilation) {
    const size_t n = cloud.size();
    SplatFrame frame;
    frame.intr = K;
    frame.width = K.width;
    frame.height = K.height;
    frame.tiles_x = (K.width + kTileSize - 1) / kTileSize;
    frame.tiles_y = (K.height + kTileSize - 1) / kTileSize;
    frame.w_rot = quat_to_rotmat(T.rotation);

    struct Candidate {
        int index;
        double depth;
        Vec2 mean2d;
        Mat2 cov, inv_cov;
        Mat23 jw;
        Vec3 p_cam;
        double radius;
        double opacity;
    };
    std::vector<Candidate> kept;
    kept.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Vec3 p = frame.w_rot * cloud.means[i] + T.translation;
        if (p.z() <= kZNear) continue;
        Mat23 J = projection_jacobian(p, K);
        Mat3 sigma = build_covariance(cloud.rotations[i], cloud.log_scales[i]);
        Mat23 M = J * frame.w_rot;
        Mat2 cov = M * sigma * M.transpose();
        cov(0, 0) += dilation;
        cov(1, 1) += dilation;
        double det = cov.determinant();
        if (det <= kDegenerateDet) continue;
        Mat2 inv;
        inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(0, 1) / det, cov(0, 0) / det;
        double half_trace = 0.5 * (cov(0, 0) + cov(1, 1));
        double tail = std::sqrt(std::max(0.0, half_trace * half_trace - det));
        double radius = kBinningSigmas * std::sqrt(half_trace + tail);
        Vec2 mean2d(K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy);
        kept.push_back({int(i), p.z(), mean2d, cov, inv, M, p, radius, cloud.opacity(i)});
    }

    std::stable_sort(kept.begin(), kept.end(), [](const Candidate& a, const Candidate& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    frame.cloud_index.reserve(kept.size());
    frame.tile_lists.assign(size_t(frame.tiles_x) * frame.tiles_y, {});
    for (const auto& c : kept) {
        int pos = int(frame.cloud_index.size());
        frame.cloud_index.push_back(c.index);
        frame.means2d.push_back(c.mean2d);
        frame.depths.push_back(c.depth);
        frame.inv_covs.push_back(c.inv_cov);
        frame.opacities.push_back(c.opacity);
        frame.radii_px.push_back(c.radius);
        frame.cov2d.push_back(c.cov);
        frame.jw.push_back(c.jw);
        frame.p_cam.push_back(c.p_cam);

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

RenderOutput rasterize_forward(const SplatFrame& frame, const MatXR& payload,
                               double background_fill) {
    const int D = int(payload.cols());
    RenderOutput out;
    out.color = Image(frame.height, frame.width, D);
    out.transmittance = Image(frame.height, frame.width, 1, 1.0);
    out.contributor_count.assign(size_t(frame.height) * frame.width, 0);

    const int n_tiles = frame.tiles_x * frame.tiles_y;
    parallel_for(n_tiles, 1, [&](int64_t t0, int64_t t1) {
        for (int64_t tile = t0; tile < t1; ++tile) {
            const auto& list = frame.tile_lists[tile];
            const int px0 = int(tile % frame.tiles_x) * kTileSize;
            const int py0 = int(tile / frame.tiles_x) * kTileSize;
            const int px1 = std::min(px0 + kTileSize, frame.width);
            const int py1 = std::min(py0 + kTileSize, frame.height);
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    double T = 1.0;
                    int count = 0;
                    double* accum = &out.color.at(py, px, 0);
                    const Vec2 pixel(px + 0.5, py + 0.5);
                    for (int idx : list) {
                        Vec2 d = pixel - frame.means2d[idx];
                        double w = eval_gaussian_2d(frame.inv_covs[idx], d);
                        if (w < kWeightCutoff) continue;
                        double alpha = std::min(frame.opacities[idx] * w, kAlphaClamp);
                        const double wt = alpha * T;
                        for (int c = 0; c < D; ++c) accum[c] += payload(idx, c) * wt;
                        T *= 1.0 - alpha;
                        ++count;
                        if (T < kTransmittanceStop) break;
                    }
                    if (background_fill != 0.0) {
                        for (int c = 0; c < D; ++c) accum[c] += background_fill * T;
                    }
                    out.transmittance.at(py, px, 0) = T;
                    out.contributor_count[size_t(py) * frame.width + px] = count;
                }
            }
        }
    });
    return out;
}

RasterGrads rasterize_backward(const SplatFrame& frame, const MatXR& payload,
                               const RenderOutput& out, const Image& dL_dcolor,
                               const Image* dL_dtrans) {
    const int D = int(payload.cols());
    const size_t n = frame.size();
    RasterGrads grads;
    grads.dpayload = MatXR::Zero(long(n), D);
    grads.dmean2d.assign(n, Vec2::Zero());
    grads.dinv_cov.assign(n, Vec3::Zero());
    grads.dopacity.assign(n, 0.0);

    const int n_tiles = frame.tiles_x * frame.tiles_y;
    struct TilePartial {
        std::vector<Vec2> dmean;
        std::vector<Vec3> dinv;
        std::vector<double> dop;
        MatXR dpayload;
    };
    std::vector<TilePartial> partials(n_tiles);

    parallel_for(n_tiles, 1, [&](int64_t t0, int64_t t1) {
        struct Contrib {
            int local;  // position within the tile list
            double w, alpha, T_before;
        };
        std::vector<Contrib> stack;
        for (int64_t tile = t0; tile < t1; ++tile) {
            const auto& list = frame.tile_lists[tile];
            if (list.empty()) continue;
            auto& part = partials[tile];
            part.dmean.assign(list.size(), Vec2::Zero());
            part.dinv.assign(list.size(), Vec3::Zero());
            part.dop.assign(list.size(), 0.0);
            part.dpayload = MatXR::Zero(long(list.size()), D);

            const int px0 = int(tile % frame.tiles_x) * kTileSize;
            const int py0 = int(tile / frame.tiles_x) * kTileSize;
            const int px1 = std::min(px0 + kTileSize, frame.width);
            const int py1 = std::min(py0 + kTileSize, frame.height);
            VecX suffix(D);
            for (int py = py0; py < py1; ++py) {
                for (int px = px0; px < px1; ++px) {
                    const double* g = &dL_dcolor.at(py, px, 0);
                    double gT = dL_dtrans ? dL_dtrans->at(py, px, 0) : 0.0;
                    bool any_g = gT != 0.0;
                    for (int c = 0; c < D && !any_g; ++c) any_g = g[c] != 0.0;
                    if (!any_g) continue;

                    // Replay the forward blend for this pixel.
                    const Vec2 pixel(px + 0.5, py + 0.5);
                    stack.clear();
                    double T = 1.0;
                    for (size_t li = 0; li < list.size(); ++li) {
                        int idx = list[li];
                        Vec2 d = pixel - frame.means2d[idx];
                        double w = eval_gaussian_2d(frame.inv_covs[idx], d);
                        if (w < kWeightCutoff) continue;
                        double alpha = std::min(frame.opacities[idx] * w, kAlphaClamp);
                        stack.push_back({int(li), w, alpha, T});
                        T *= 1.0 - alpha;
                        if (T < kTransmittanceStop) break;
                    }
                    const double T_final = T;

                    suffix.setZero();
                    for (size_t si = stack.size(); si-- > 0;) {
                        const Contrib& cb = stack[si];
                        const int li = cb.local;
                        const int idx = list[li];
                        const double om = 1.0 - cb.alpha;
                        double dalpha = 0.0;
                        for (int c = 0; c < D; ++c) {
                            dalpha += g[c] * (payload(idx, c) * cb.T_before - suffix[c] / om);
                            part.dpayload(li, c) += g[c] * cb.alpha * cb.T_before;
                        }
                        dalpha += gT * (-T_final / om);
                        for (int c = 0; c < D; ++c)
                            suffix[c] += payload(idx, c) * cb.alpha * cb.T_before;

                        if (frame.opacities[idx] * cb.w >= kAlphaClamp) continue; // clamped
                        part.dop[li] += dalpha * cb.w;
                        const double dw = dalpha * frame.opacities[idx];
                        Vec2 d = pixel - frame.means2d[idx];
                        const Mat2& Q = frame.inv_covs[idx];
                        part.dmean[li] += dw * cb.w * (Q * d);
                        part.dinv[li] += dw * cb.w *
                                         Vec3(-0.5 * d.x() * d.x(), -d.x() * d.y(),
                                              -0.5 * d.y() * d.y());
                    }
                }
            }
        }
    });

    // Fixed-order reduction keeps results independent of worker count.
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = frame.tile_lists[tile];
        const auto& part = partials[tile];
        if (part.dop.empty()) continue;
        for (size_t li = 0; li < list.size(); ++li) {
            int idx = list[li];
            grads.dmean2d[idx] += part.dmean[li];
            grads.dinv_cov[idx] += part.dinv[li];
            grads.dopacity[idx] += part.dop[li];
            grads.dpayload.row(idx) += part.dpayload.row(long(li));
        }
    }
    return grads;
}

} // namespace sgs
