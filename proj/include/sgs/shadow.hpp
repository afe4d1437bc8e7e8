#pragma once

#include "sgs/appearance.hpp"
#include "sgs/rasterizer.hpp"

namespace sgs {

/// Virtual camera at distance d_sun along the sun vector, boresight back at
/// the origin. The up vector is the coordinate axis with the smallest |sun|
/// component (made orthonormal), so the construction is deterministic; the
/// visibility result does not depend on this choice.
RigidTransform make_sun_camera(const Vec3& sun_obj, double d_sun);

struct VisibilityBuffer {
    std::vector<double> raw;     // V, transmittance toward the sun
    std::vector<double> refined; // V' after the shadow MLP
};

// Per-Gaussian transmittance toward the sun: V_i is the product of (1 - alpha_j)
// over splats strictly in front of i in sun-view depth, each evaluated at the
// sun-view projection of mu_i. Same clamp and weight-cutoff rules as the
// rasterizer. Throws EmptyCloud.
std::vector<double> sun_visibility(const GaussianCloud& cloud, const Vec3& sun_obj,
                                   const Pinhole& K, double d_sun);

/// Elementwise color * shadow with shape check.
Image apply_shadow(const Image& color, const Image& shadow);

void apply_shadow_backward(const Image& color, const Image& shadow, const Image& dL_dout,
                           Image& dL_dcolor, Image& dL_dshadow);

} // namespace sgs
