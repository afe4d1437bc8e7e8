#pragma once

#include "sgs/common.hpp"

namespace sgs {

inline constexpr double kZNear = 1e-4;         // meters; points behind are culled
inline constexpr double kCovDilation = 0.3;    // px^2 added to the splat diagonal
inline constexpr double kDegenerateDet = 1e-12;

/// Unit quaternion (w, x, y, z). Renormalize on every write; q and -q are the
/// same rotation.
struct Quat {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

    Quat normalized() const {
        double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    static Quat from_axis_angle(const Vec3& axis, double angle) {
        Vec3 a = axis.normalized();
        double h = 0.5 * angle;
        double s = std::sin(h);
        return {std::cos(h), a.x() * s, a.y() * s, a.z() * s};
    }

    /// Hamilton product.
    Quat operator*(const Quat& r) const {
        return {w * r.w - x * r.x - y * r.y - z * r.z,
                w * r.x + x * r.w + y * r.z - z * r.y,
                w * r.y - x * r.z + y * r.w + z * r.x,
                w * r.z + x * r.y - y * r.x + z * r.w};
    }

    Quat conjugate() const { return {w, -x, -y, -z}; }
};

Mat3 quat_to_rotmat(const Quat& q);

/// Rotation matrix -> unit quaternion (Shepperd's method).
Quat quat_from_rotmat(const Mat3& R);

// d(loss)/dq for loss with rotation-matrix gradient dR, including the
// defensive normalization in quat_to_rotmat (gradient lives in the tangent
// of the unit sphere when ||q|| = 1).
Vec4 quat_to_rotmat_backward(const Quat& q, const Mat3& dR);

/// Covariance factorization R * diag(exp(2*log_scales)) * R^T.
Mat3 build_covariance(const Quat& q, const Vec3& log_scales);

void build_covariance_backward(const Quat& q, const Vec3& log_scales, const Mat3& dSigma,
                               Vec4& dq, Vec3& dlog_scales);

struct Pinhole {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        if (fx <= 0 || fy <= 0) fail("InvalidIntrinsics", "focal lengths must be positive");
        if (cx < 0 || cx >= width || cy < 0 || cy >= height)
            fail("InvalidIntrinsics", "principal point outside image");
    }
};

/// Object-to-camera rigid transform: p_cam = R(q) * p_obj + t.
struct RigidTransform {
    Quat rotation;
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return quat_to_rotmat(rotation) * p + translation; }

    RigidTransform inverse() const {
        Quat qi = rotation.conjugate();
        return {qi, -(quat_to_rotmat(qi) * translation)};
    }

    RigidTransform compose(const RigidTransform& inner) const {
        // this ∘ inner: first apply inner, then this.
        return {(rotation * inner.rotation).normalized(),
                quat_to_rotmat(rotation) * inner.translation + translation};
    }

    /// Camera center expressed in the object frame (-R^T t).
    Vec3 center_in_object() const { return -(quat_to_rotmat(rotation).transpose() * translation); }
};

struct Projection {
    double u, v, depth;
};

/// Pinhole projection of an object-frame point. Throws BehindCamera if the
/// camera-frame depth is <= kZNear.
Projection project_point(const Vec3& p_obj, const RigidTransform& T, const Pinhole& K);

/// 2x3 Jacobian of (u, v) w.r.t. the camera-frame point, evaluated at p_cam.
Mat23 projection_jacobian(const Vec3& p_cam, const Pinhole& K);

/// dp_cam for upstream gradient dJ on the projection Jacobian entries.
Vec3 projection_jacobian_backward(const Vec3& p_cam, const Pinhole& K, const Mat23& dJ);

/// Splatted 2x2 covariance: J * W * Sigma * W^T * J^T plus the diagonal
/// dilation. Throws Degenerate when the dilated determinant is <= kDegenerateDet.
Mat2 splat_covariance(const Mat3& sigma, const Mat3& w_rot, const Mat23& J);

// Upstream dCov2d is the gradient w.r.t. all four entries of the (symmetric)
// output. Returns full-matrix gradients on Sigma and J.
void splat_covariance_backward(const Mat3& sigma, const Mat3& w_rot, const Mat23& J,
                               const Mat2& dCov2d, Mat3& dSigma, Mat23& dJ);

} // namespace sgs
