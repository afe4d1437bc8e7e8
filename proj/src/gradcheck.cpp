#include "sgs/gradcheck.hpp"

#include "sgs/appearance.hpp"
#include "sgs/losses.hpp"
#include "sgs/pipeline.hpp"
#include "sgs/shadow.hpp"

#include <functional>

namespace sgs {

namespace {

constexpr double kRtol = 1e-3;
constexpr double kAtol = 1e-6;

struct Collector {
    GradSuiteResult result;
    int failures = 0;

    explicit Collector(std::string name) { result.name = std::move(name); }

    void record(double analytic, double fd) {
        ++result.checked;
        double denom = std::max({std::abs(analytic), std::abs(fd), 1e-12});
        result.max_rel_err = std::max(result.max_rel_err, std::abs(analytic - fd) / denom);
        if (std::abs(analytic - fd) > kAtol + kRtol * std::max(std::abs(analytic), std::abs(fd)))
            ++failures;
    }

    GradSuiteResult finish() {
        result.pass = result.checked > 0 && failures == 0;
        return result;
    }
};

double fd(const std::function<double(double)>& f, double x, double h = 1e-5) {
    return (f(x + h) - f(x - h)) / (2 * h);
}

GaussianCloud small_cloud(Rng& rng, size_t n) {
    GaussianCloud cloud;
    for (size_t i = 0; i < n; ++i) {
        Vec3 mean(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5));
        Vec3 ls(std::log(rng.uniform(0.1, 0.3)), std::log(rng.uniform(0.1, 0.3)),
                std::log(rng.uniform(0.1, 0.3)));
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        Feature f;
        for (int k = 0; k < kFeatureDim; ++k) f[k] = rng.normal(0, 0.01);
        Latent l = Latent::Zero();
        for (int k = 0; k < kLatentDim; ++k) l[k] = rng.normal(0, 0.1);
        cloud.push_back(mean, ls, q.normalized(), logit(rng.uniform(0.2, 0.8)), f, l,
                        Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)));
    }
    return cloud;
}

GradSuiteResult suite_projection_jacobian(Rng& rng) {
    Collector col("projection_jacobian");
    Pinhole K{150, 140, 64, 60, 128, 120};
    RigidTransform T;
    for (int t = 0; t < 20; ++t) {
        Vec3 p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(2, 10));
        Mat23 J = projection_jacobian(p, K);
        for (int k = 0; k < 3; ++k) {
            col.record(J(0, k), fd([&](double v) {
                           Vec3 c = p;
                           c[k] = v;
                           return project_point(c, T, K).u;
                       },
                       p[k]));
            col.record(J(1, k), fd([&](double v) {
                           Vec3 c = p;
                           c[k] = v;
                           return project_point(c, T, K).v;
                       },
                       p[k]));
        }
    }
    return col.finish();
}

GradSuiteResult suite_splat_covariance(Rng& rng) {
    Collector col("splat_covariance");
    Pinhole K{150, 150, 64, 64, 128, 128};
    for (int t = 0; t < 12; ++t) {
        Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        Vec3 ls(rng.uniform(-1.5, 0.2), rng.uniform(-1.5, 0.2), rng.uniform(-1.5, 0.2));
        Mat3 sigma = build_covariance(q.normalized(), ls);
        Mat3 W = quat_to_rotmat(
            Quat{rng.normal(), rng.normal(), rng.normal(), rng.normal()}.normalized());
        Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2, 8));
        Mat23 J = projection_jacobian(p, K);
        Mat2 up;
        up << rng.normal(), rng.normal(), rng.normal(), rng.normal();
        Mat3 dSigma;
        Mat23 dJ;
        splat_covariance_backward(sigma, W, J, up, dSigma, dJ);
        auto loss = [&](const Mat3& s) {
            Mat23 M = J * W;
            Mat2 cov = M * s * M.transpose();
            return up(0, 0) * (cov(0, 0) + kCovDilation) + up(0, 1) * cov(0, 1) +
                   up(1, 0) * cov(1, 0) + up(1, 1) * (cov(1, 1) + kCovDilation);
        };
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                col.record(dSigma(r, c), fd([&](double v) {
                               Mat3 s = sigma;
                               s(r, c) = v;
                               return loss(s);
                           },
                           sigma(r, c)));
            }
    }
    return col.finish();
}

GradSuiteResult suite_rasterizer(Rng& rng) {
    Collector col("rasterizer_backward");
    Pinhole K{12, 12, 4, 4, 8, 8};
    for (int scene = 0; scene < 6; ++scene) {
        GaussianCloud cloud = small_cloud(rng, 1 + rng.uniform_index(8));
        RigidTransform pose;
        pose.translation = Vec3(0, 0, 4);
        SplatFrame frame = cull_and_sort(cloud, pose, K);
        if (frame.size() == 0) continue;
        MatXR payload(long(frame.size()), 3);
        for (long i = 0; i < payload.size(); ++i) payload.data()[i] = rng.uniform(0, 1);
        Image up(8, 8, 3);
        for (auto& v : up.data) v = rng.uniform(-1, 1);

        RenderOutput out = rasterize_forward(frame, payload);
        RasterGrads g = rasterize_backward(frame, payload, out, up);

        auto loss_counts = [&](const SplatFrame& f, const MatXR& pl) {
            RenderOutput o = rasterize_forward(f, pl);
            double L = 0;
            for (size_t i = 0; i < o.color.data.size(); ++i) L += o.color.data[i] * up.data[i];
            return std::make_pair(L, o.contributor_count);
        };
        const double h = 1e-4;
        for (size_t i = 0; i < frame.size(); ++i) {
            // 2D means (clamp-boundary crossings skipped via contributor sets).
            for (int k = 0; k < 2; ++k) {
                SplatFrame lo = frame, hi = frame;
                lo.means2d[i][k] -= h;
                hi.means2d[i][k] += h;
                auto [llo, clo] = loss_counts(lo, payload);
                auto [lhi, chi] = loss_counts(hi, payload);
                if (clo != chi) {
                    ++col.result.skipped;
                    continue;
                }
                col.record(g.dmean2d[i][k], (lhi - llo) / (2 * h));
            }
            { // opacity
                SplatFrame lo = frame, hi = frame;
                lo.opacities[i] -= h;
                hi.opacities[i] += h;
                auto [llo, clo] = loss_counts(lo, payload);
                auto [lhi, chi] = loss_counts(hi, payload);
                if (clo == chi) col.record(g.dopacity[i], (lhi - llo) / (2 * h));
                else ++col.result.skipped;
            }
            { // payload
                MatXR lo = payload, hi = payload;
                lo(long(i), 1) -= h;
                hi(long(i), 1) += h;
                col.record(g.dpayload(long(i), 1),
                           (loss_counts(frame, hi).first - loss_counts(frame, lo).first) / (2 * h));
            }
        }
    }
    return col.finish();
}

GradSuiteResult suite_mlp(const char* name, Mlp mlp, Rng& rng, bool corrupt) {
    Collector col(name);
    const int batch = 12;
    MatXR x(batch, mlp.in_dim());
    for (long i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    MatXR up(batch, mlp.out_dim());
    for (long i = 0; i < up.size(); ++i) up.data()[i] = rng.uniform(-1, 1);

    MlpActivations acts;
    mlp_forward(mlp, x, &acts);
    MlpGrads grads;
    grads.init_like(mlp);
    MatXR dx = mlp_backward(mlp, acts, up, grads);
    if (corrupt) grads.dweights[0](0, 0) += 1e-2; // negative control hook

    auto loss = [&](const MatXR& xx) { return (mlp_forward(mlp, xx).array() * up.array()).sum(); };
    const double h = 1e-5;
    for (size_t l = 0; l < mlp.n_layers(); ++l) {
        for (int probe = 0; probe < 20; ++probe) {
            // Probe 0 pins index 0 so the corruption hook is always covered.
            long idx = probe == 0 && l == 0
                           ? 0
                           : long(rng.uniform_index(uint64_t(mlp.weights[l].size())));
            double saved = mlp.weights[l].data()[idx];
            mlp.weights[l].data()[idx] = saved + h;
            double hi = loss(x);
            mlp.weights[l].data()[idx] = saved - h;
            double lo = loss(x);
            mlp.weights[l].data()[idx] = saved;
            col.record(grads.dweights[l].data()[idx], (hi - lo) / (2 * h));
        }
    }
    for (int probe = 0; probe < 30; ++probe) {
        long idx = long(rng.uniform_index(uint64_t(x.size())));
        double saved = x.data()[idx];
        x.data()[idx] = saved + h;
        double hi = loss(x);
        x.data()[idx] = saved - h;
        double lo = loss(x);
        x.data()[idx] = saved;
        col.record(dx.data()[idx], (hi - lo) / (2 * h));
    }
    return col.finish();
}

GradSuiteResult suite_losses(Rng& rng) {
    Collector col("loss_terms");
    Image gt(14, 14, 3), pred(14, 14, 3), mask(14, 14, 1, 1.0);
    for (auto& v : gt.data) v = rng.uniform(0, 1);
    for (auto& v : pred.data) v = rng.uniform(0, 1);

    LossGrad pl = photometric_loss(pred, gt, mask, 0.2);
    const double h = 1e-5;
    for (int probe = 0; probe < 40; ++probe) {
        size_t i = rng.uniform_index(pred.data.size());
        if (std::abs(pred.data[i] - gt.data[i]) < 10 * h) continue; // L1 kink
        Image p = pred;
        p.data[i] = pred.data[i] + h;
        double hi = photometric_loss(p, gt, mask, 0.2).value;
        p.data[i] = pred.data[i] - h;
        double lo = photometric_loss(p, gt, mask, 0.2).value;
        col.record(pl.grad.data[i], (hi - lo) / (2 * h));
    }

    for (int t = 0; t < 10; ++t) {
        Vec3 ls(rng.uniform(-2, 0.3), rng.uniform(-2, 0.3), rng.uniform(-2, 0.3));
        Vec3 s = ls.array().exp();
        double mean = s.mean();
        bool near_tie = false;
        for (int k = 0; k < 3; ++k) near_tie |= std::abs(s[k] - mean) < 1e-3;
        if (near_tie) continue;
        IsoLoss il = isotropic_loss({ls});
        for (int k = 0; k < 3; ++k) {
            col.record(il.dlog_scales[0][k], fd([&](double v) {
                           Vec3 c = ls;
                           c[k] = v;
                           return isotropic_loss({c}).value;
                       },
                       ls[k]));
        }
    }
    return col.finish();
}

GradSuiteResult suite_shadow_multiply(Rng& rng) {
    Collector col("shadow_multiply");
    Image color(9, 9, 3), shadow(9, 9, 1), up(9, 9, 3);
    for (auto& v : color.data) v = rng.uniform(0, 1);
    for (auto& v : shadow.data) v = rng.uniform(0, 1);
    for (auto& v : up.data) v = rng.uniform(-1, 1);
    Image dc, ds;
    apply_shadow_backward(color, shadow, up, dc, ds);
    auto loss = [&](const Image& c, const Image& s) {
        Image out = apply_shadow(c, s);
        double L = 0;
        for (size_t i = 0; i < out.data.size(); ++i) L += out.data[i] * up.data[i];
        return L;
    };
    const double h = 1e-5;
    for (int probe = 0; probe < 30; ++probe) {
        size_t i = rng.uniform_index(color.data.size());
        Image c = color;
        c.data[i] = color.data[i] + h;
        double hi = loss(c, shadow);
        c.data[i] = color.data[i] - h;
        double lo = loss(c, shadow);
        col.record(dc.data[i], (hi - lo) / (2 * h));

        size_t j = rng.uniform_index(shadow.data.size());
        Image s = shadow;
        s.data[j] = shadow.data[j] + h;
        hi = loss(color, s);
        s.data[j] = shadow.data[j] - h;
        lo = loss(color, s);
        col.record(ds.data[j], (hi - lo) / (2 * h));
    }
    return col.finish();
}

} // namespace

std::vector<GradSuiteResult> run_gradcheck(uint64_t seed, bool corrupt) {
    std::vector<GradSuiteResult> results;
    {
        Rng rng = Rng::stream(seed, 1);
        results.push_back(suite_projection_jacobian(rng));
    }
    {
        Rng rng = Rng::stream(seed, 2);
        results.push_back(suite_splat_covariance(rng));
    }
    {
        Rng rng = Rng::stream(seed, 3);
        results.push_back(suite_rasterizer(rng));
    }
    {
        Rng rng = Rng::stream(seed, 4);
        Rng init = Rng::stream(seed, 40);
        results.push_back(suite_mlp("appearance_mlp", make_phi(kEncodingFreqs, init), rng, corrupt));
    }
    {
        Rng rng = Rng::stream(seed, 5);
        Rng init = Rng::stream(seed, 50);
        Mlp psi = make_psi(kEncodingFreqs, init);
        for (long i = 0; i < psi.weights.back().size(); ++i)
            psi.weights.back().data()[i] = rng.uniform(-0.2, 0.2);
        results.push_back(suite_mlp("shadow_mlp", std::move(psi), rng, false));
    }
    {
        Rng rng = Rng::stream(seed, 6);
        results.push_back(suite_losses(rng));
    }
    {
        Rng rng = Rng::stream(seed, 7);
        results.push_back(suite_shadow_multiply(rng));
    }
    return results;
}

} // namespace sgs
