#include "sgs/pipeline.hpp"

#include "sgs/parallel.hpp"

namespace sgs {

ForwardPass pipeline_forward(const GaussianCloud& cloud, const Mlp& phi, const Mlp& psi,
                             const RigidTransform& pose, const Vec3& sun_obj, const Pinhole& K,
                             const PipelineOptions& opts) {
    ForwardPass fwd;
    fwd.opts = opts;
    fwd.sun_obj = sun_obj.normalized();
    fwd.cam_center_obj = pose.center_in_object();
    fwd.frame = cull_and_sort(cloud, pose, K);
    const size_t n_vis = fwd.frame.size();

    if (opts.use_appearance_mlp) {
        fwd.view_dirs = view_directions(cloud, fwd.frame.cloud_index, fwd.cam_center_obj);
        fwd.phi_in = build_phi_input(cloud, fwd.frame.cloud_index, fwd.sun_obj, fwd.view_dirs,
                                     opts.encoding_freqs);
        fwd.phi_pass.forward(phi, fwd.phi_in);
        fwd.payload = fwd.phi_pass.output;
    } else {
        fwd.payload.resize(long(n_vis), 3);
        for (size_t i = 0; i < n_vis; ++i) {
            const Vec3& raw = cloud.rgb_logits[fwd.frame.cloud_index[i]];
            for (int c = 0; c < 3; ++c) fwd.payload(long(i), c) = sigmoid(raw[c]);
        }
    }

    fwd.color_out = rasterize_forward(fwd.frame, fwd.payload);

    if (opts.use_shadow && n_vis > 0) {
        std::vector<double> vis_all = sun_visibility(cloud, fwd.sun_obj, K, opts.d_sun);
        fwd.vis_raw.resize(n_vis);
        for (size_t i = 0; i < n_vis; ++i) fwd.vis_raw[i] = vis_all[fwd.frame.cloud_index[i]];
        fwd.psi_in = build_psi_input(cloud, fwd.frame.cloud_index, fwd.vis_raw, fwd.sun_obj,
                                     opts.scene_radius, opts.encoding_freqs);
        fwd.psi_pass.forward(psi, fwd.psi_in);
        fwd.vis_refined.resize(n_vis);
        fwd.vprime_payload.resize(long(n_vis), 1);
        for (size_t i = 0; i < n_vis; ++i) {
            fwd.vis_refined[i] = fwd.psi_pass.output(long(i), 0);
            fwd.vprime_payload(long(i), 0) = fwd.vis_refined[i];
        }
        // Unit background fill: uncovered pixels are unshadowed.
        fwd.shadow_out = rasterize_forward(fwd.frame, fwd.vprime_payload, 1.0);
        fwd.shadow_image = fwd.shadow_out.color;
        fwd.final_image = apply_shadow(fwd.color_out.color, fwd.shadow_image);
    } else {
        fwd.final_image = fwd.color_out.color;
    }

    fwd.coverage = Image(K.height, K.width, 1);
    for (size_t p = 0; p < fwd.color_out.contributor_count.size(); ++p)
        fwd.coverage.data[p] = fwd.color_out.contributor_count[p] > 0 ? 1.0 : 0.0;
    return fwd;
}

void CloudGrads::init(size_t n, const Mlp& phi, const Mlp& psi) {
    dmeans.assign(n, Vec3::Zero());
    drotations.assign(n, Vec4::Zero());
    dlog_scales.assign(n, Vec3::Zero());
    dopacity_logits.assign(n, 0.0);
    dfeatures.assign(n, Feature::Zero());
    dlatents.assign(n, Latent::Zero());
    drgb_logits.assign(n, Vec3::Zero());
    dphi.init_like(phi);
    dpsi.init_like(psi);
    screen_grad_norm.assign(n, 0.0);
    visible.assign(n, 0);
}

CloudGrads pipeline_backward(const GaussianCloud& cloud, const Mlp& phi, const Mlp& psi,
                             const ForwardPass& fwd, const Image& dL_dimage) {
    const PipelineOptions& opts = fwd.opts;
    const size_t n_vis = fwd.frame.size();
    CloudGrads grads;
    grads.init(cloud.size(), phi, psi);

    const bool shadow_active = opts.use_shadow && n_vis > 0;

    Image dC_raw, dShadow;
    if (shadow_active) {
        apply_shadow_backward(fwd.color_out.color, fwd.shadow_image, dL_dimage, dC_raw, dShadow);
    } else {
        dC_raw = dL_dimage;
    }

    // Accumulated per-visible geometry gradients from both raster passes.
    std::vector<Vec2> dmean2d(n_vis, Vec2::Zero());
    std::vector<Vec3> dinv_cov(n_vis, Vec3::Zero());
    std::vector<double> dopacity(n_vis, 0.0);

    if (shadow_active) {
        // Shadow image = V'-blend + 1 * transmittance, so the upstream image
        // gradient also reaches the final transmittance.
        RasterGrads sg = rasterize_backward(fwd.frame, fwd.vprime_payload, fwd.shadow_out,
                                            dShadow, &dShadow);
        for (size_t i = 0; i < n_vis; ++i) {
            dmean2d[i] += sg.dmean2d[i];
            dinv_cov[i] += sg.dinv_cov[i];
            dopacity[i] += sg.dopacity[i];
        }
        // dV' -> Psi parameters, latents. Raw V and the position encoding are
        // treated as constants.
        MatXR dx = fwd.psi_pass.backward(sg.dpayload, grads.dpsi);
        const int enc = 6 * opts.encoding_freqs;
        for (size_t i = 0; i < n_vis; ++i) {
            const int g = fwd.frame.cloud_index[i];
            grads.dlatents[g] += dx.block(long(i), 1 + 2 * enc, 1, kLatentDim).transpose();
        }
    }

    RasterGrads cg = rasterize_backward(fwd.frame, fwd.payload, fwd.color_out, dC_raw);
    for (size_t i = 0; i < n_vis; ++i) {
        dmean2d[i] += cg.dmean2d[i];
        dinv_cov[i] += cg.dinv_cov[i];
        dopacity[i] += cg.dopacity[i];
    }

    if (opts.use_appearance_mlp) {
        // Color -> Phi parameters and features; the sun/view encodings are
        // fixed per step.
        MatXR dx = fwd.phi_pass.backward(cg.dpayload, grads.dphi);
        for (size_t i = 0; i < n_vis; ++i) {
            const int g = fwd.frame.cloud_index[i];
            grads.dfeatures[g] += dx.block(long(i), 0, 1, kFeatureDim).transpose();
        }
    } else {
        for (size_t i = 0; i < n_vis; ++i) {
            const int g = fwd.frame.cloud_index[i];
            const Vec3& raw = cloud.rgb_logits[g];
            for (int c = 0; c < 3; ++c) {
                double s = sigmoid(raw[c]);
                grads.drgb_logits[g][c] += cg.dpayload(long(i), c) * s * (1.0 - s);
            }
        }
    }

    // EWA geometry chain, parallel over visible splats (outputs are disjoint:
    // culling keeps at most one splat per cloud Gaussian).
    const double ndc_x = fwd.frame.width / 2.0, ndc_y = fwd.frame.height / 2.0;
    parallel_for(int64_t(n_vis), 128, [&](int64_t begin, int64_t end) {
        for (int64_t i = begin; i < end; ++i) {
            const int g = fwd.frame.cloud_index[i];
            grads.visible[g] = 1;
            grads.screen_grad_norm[g] =
                Vec2(dmean2d[i].x() * ndc_x, dmean2d[i].y() * ndc_y).norm();

            // Opacity through the sigmoid.
            const double o = fwd.frame.opacities[i];
            grads.dopacity_logits[g] += dopacity[i] * o * (1.0 - o);

            // 2D mean -> 3D mean via J W.
            grads.dmeans[g] += fwd.frame.jw[i].transpose() * dmean2d[i];

            // inv(Cov2d) -> Cov2d: dA = -Q G Q with the symmetric split of the
            // (a, b, c) parameter gradient.
            const Mat2& Q = fwd.frame.inv_covs[i];
            Mat2 G;
            G << dinv_cov[i][0], 0.5 * dinv_cov[i][1], 0.5 * dinv_cov[i][1], dinv_cov[i][2];
            Mat2 dCov2d = -Q * G * Q;

            Mat3 sigma = build_covariance(cloud.rotations[g], cloud.log_scales[g]);
            Mat23 J = fwd.frame.jw[i] * fwd.frame.w_rot.transpose();
            Mat3 dSigma;
            Mat23 dJ;
            splat_covariance_backward(sigma, fwd.frame.w_rot, J, dCov2d, dSigma, dJ);

            Vec3 dp = projection_jacobian_backward(fwd.frame.p_cam[i], fwd.frame.intr, dJ);
            grads.dmeans[g] += fwd.frame.w_rot.transpose() * dp;

            Vec4 dq;
            Vec3 dls;
            build_covariance_backward(cloud.rotations[g], cloud.log_scales[g], dSigma, dq, dls);
            grads.drotations[g] += dq;
            grads.dlog_scales[g] += dls;
        }
    });
    return grads;
}

} // namespace sgs
