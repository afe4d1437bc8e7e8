#include "sgs/cloud.hpp"

#include "sgs/parallel.hpp"

#include <algorithm>

namespace sgs {

void GaussianCloud::reserve(size_t n) {
    means.reserve(n);
    log_scales.reserve(n);
    rotations.reserve(n);
    opacity_logits.reserve(n);
    features.reserve(n);
    latents.reserve(n);
    rgb_logits.reserve(n);
}

void GaussianCloud::push_back(const Vec3& mean, const Vec3& log_scale, const Quat& rot,
                              double op_logit, const Feature& f, const Latent& l, const Vec3& rgb) {
    means.push_back(mean);
    log_scales.push_back(log_scale);
    rotations.push_back(rot);
    opacity_logits.push_back(op_logit);
    features.push_back(f);
    latents.push_back(l);
    rgb_logits.push_back(rgb);
}

void GaussianCloud::remove_indices(const std::vector<int>& sorted_unique) {
    if (sorted_unique.empty()) return;
    size_t out = 0, drop = 0;
    for (size_t i = 0; i < size(); ++i) {
        if (drop < sorted_unique.size() && int(i) == sorted_unique[drop]) {
            ++drop;
            continue;
        }
        if (out != i) {
            means[out] = means[i];
            log_scales[out] = log_scales[i];
            rotations[out] = rotations[i];
            opacity_logits[out] = opacity_logits[i];
            features[out] = features[i];
            latents[out] = latents[i];
            rgb_logits[out] = rgb_logits[i];
        }
        ++out;
    }
    means.resize(out);
    log_scales.resize(out);
    rotations.resize(out);
    opacity_logits.resize(out);
    features.resize(out);
    latents.resize(out);
    rgb_logits.resize(out);
}

double GaussianCloud::bounding_radius() const {
    double r2 = 0;
    for (const auto& m : means) r2 = std::max(r2, m.squaredNorm());
    return std::sqrt(r2);
}

GaussianCloud initialize_cloud(const std::vector<Vec3>& points, Rng& rng) {
    const size_t n = points.size();
    if (n == 0) fail("DegenerateMesh", "no surface samples");

    // Mean distance to the 3 nearest neighbors, brute force.
    std::vector<double> nn_scale(n, 0.0);
    parallel_for(int64_t(n), 256, [&](int64_t begin, int64_t end) {
        std::vector<double> best(3);
        for (int64_t i = begin; i < end; ++i) {
            best = {1e30, 1e30, 1e30};
            for (size_t j = 0; j < n; ++j) {
                if (j == size_t(i)) continue;
                double d2 = (points[j] - points[i]).squaredNorm();
                if (d2 < best[2]) {
                    best[2] = d2;
                    if (best[2] < best[1]) std::swap(best[1], best[2]);
                    if (best[1] < best[0]) std::swap(best[0], best[1]);
                }
            }
            double sum = 0;
            int valid = 0;
            for (double d2 : best) {
                if (d2 < 1e30) {
                    sum += std::sqrt(d2);
                    ++valid;
                }
            }
            nn_scale[i] = valid > 0 ? std::max(sum / valid, 1e-9) : 0.1;
        }
    });

    GaussianCloud cloud;
    cloud.reserve(n);
    const double op_logit = logit(0.1);
    for (size_t i = 0; i < n; ++i) {
        Feature f;
        for (int k = 0; k < kFeatureDim; ++k) f[k] = rng.normal(0.0, 0.01);
        Latent l = Latent::Zero();
        double ls = std::log(nn_scale[i]);
        cloud.push_back(points[i], Vec3(ls, ls, ls), Quat{}, op_logit, f, l, Vec3::Zero());
    }
    return cloud;
}

} // namespace sgs
