#pragma once

#include "sgs/geom.hpp"
#include "sgs/rng.hpp"

#include <vector>

namespace sgs {

// Structure-of-arrays Gaussian cloud. Scales live as logs and opacities as
// logits so unconstrained optimizer steps keep the constrained values valid.
// rgb_logits is only trained in the direct-color configuration; features and
// latents feed the appearance and shadow MLPs.
struct GaussianCloud {
    std::vector<Vec3> means;
    std::vector<Vec3> log_scales;
    std::vector<Quat> rotations;
    std::vector<double> opacity_logits;
    std::vector<Feature> features;
    std::vector<Latent> latents;
    std::vector<Vec3> rgb_logits;

    size_t size() const { return means.size(); }

    double opacity(size_t i) const { return sigmoid(opacity_logits[i]); }
    Vec3 scales(size_t i) const { return log_scales[i].array().exp(); }

    void reserve(size_t n);
    void push_back(const Vec3& mean, const Vec3& log_scale, const Quat& rot, double op_logit,
                   const Feature& f, const Latent& l, const Vec3& rgb);
    void remove_indices(const std::vector<int>& sorted_unique);

    /// Bounding radius of the means about the origin.
    double bounding_radius() const;
};

/// Cloud from surface samples: isotropic scales from the mean 3-NN distance,
/// identity rotations, opacity 0.1, features ~ N(0, 0.01^2), zero latents,
/// direct RGB at 0.5.
GaussianCloud initialize_cloud(const std::vector<Vec3>& points, Rng& rng);

} // namespace sgs
