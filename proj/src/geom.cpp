#include "sgs/geom.hpp"

namespace sgs {

Mat3 quat_to_rotmat(const Quat& q_in) {
    Quat q = q_in.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;
    Mat3 R;
    R << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return R;
}

Quat quat_from_rotmat(const Mat3& R) {
    Quat q;
    double tr = R.trace();
    if (tr > 0) {
        double s = std::sqrt(tr + 1.0) * 2;
        q = {0.25 * s, (R(2, 1) - R(1, 2)) / s, (R(0, 2) - R(2, 0)) / s, (R(1, 0) - R(0, 1)) / s};
    } else if (R(0, 0) > R(1, 1) && R(0, 0) > R(2, 2)) {
        double s = std::sqrt(1.0 + R(0, 0) - R(1, 1) - R(2, 2)) * 2;
        q = {(R(2, 1) - R(1, 2)) / s, 0.25 * s, (R(0, 1) + R(1, 0)) / s, (R(0, 2) + R(2, 0)) / s};
    } else if (R(1, 1) > R(2, 2)) {
        double s = std::sqrt(1.0 + R(1, 1) - R(0, 0) - R(2, 2)) * 2;
        q = {(R(0, 2) - R(2, 0)) / s, (R(0, 1) + R(1, 0)) / s, 0.25 * s, (R(1, 2) + R(2, 1)) / s};
    } else {
        double s = std::sqrt(1.0 + R(2, 2) - R(0, 0) - R(1, 1)) * 2;
        q = {(R(1, 0) - R(0, 1)) / s, (R(0, 2) + R(2, 0)) / s, (R(1, 2) + R(2, 1)) / s, 0.25 * s};
    }
    return q.normalized();
}

Vec4 quat_to_rotmat_backward(const Quat& q_in, const Mat3& dR) {
    Quat q = q_in.normalized();
    const double w = q.w, x = q.x, y = q.y, z = q.z;

    // dR/d(w,x,y,z) of the normalized quaternion, entry by entry.
    auto g = [&](int i, int j) { return dR(i, j); };
    Vec4 dq;
    dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
                 z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                 w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
                 y * g(1, 2) + x * g(2, 0) + y * g(2, 1));

    // Chain through q/||q||: project onto the tangent at the unit sphere and
    // scale by 1/||q_in||.
    Vec4 qv(w, x, y, z);
    Vec4 tangent = dq - qv * qv.dot(dq);
    return tangent / q_in.norm();
}

Mat3 build_covariance(const Quat& q, const Vec3& log_scales) {
    Mat3 R = quat_to_rotmat(q);
    Vec3 s2 = (2.0 * log_scales).array().exp();
    return R * s2.asDiagonal() * R.transpose();
}

void build_covariance_backward(const Quat& q, const Vec3& log_scales, const Mat3& dSigma,
                               Vec4& dq, Vec3& dlog_scales) {
    Mat3 R = quat_to_rotmat(q);
    Vec3 s2 = (2.0 * log_scales).array().exp();

    // Sigma = R A R^T with A = diag(s2); treat dSigma as a full-matrix gradient.
    Mat3 dR = (dSigma + dSigma.transpose()) * R * s2.asDiagonal();
    Mat3 inner = R.transpose() * dSigma * R;
    for (int k = 0; k < 3; ++k) {
        dlog_scales[k] = inner(k, k) * 2.0 * s2[k]; // dA_kk/dls_k = 2 exp(2 ls_k)
    }
    dq = quat_to_rotmat_backward(q, dR);
}

Projection project_point(const Vec3& p_obj, const RigidTransform& T, const Pinhole& K) {
    Vec3 p = T.apply(p_obj);
    if (p.z() <= kZNear) fail("BehindCamera", "point at or behind the near plane");
    return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy, p.z()};
}

Mat23 projection_jacobian(const Vec3& p, const Pinhole& K) {
    if (p.z() <= kZNear) fail("BehindCamera", "point at or behind the near plane");
    const double z = p.z(), z2 = z * z;
    Mat23 J;
    J << K.fx / z, 0, -K.fx * p.x() / z2,
         0, K.fy / z, -K.fy * p.y() / z2;
    return J;
}

Vec3 projection_jacobian_backward(const Vec3& p, const Pinhole& K, const Mat23& dJ) {
    const double z = p.z(), z2 = z * z, z3 = z2 * z;
    Vec3 dp = Vec3::Zero();
    dp.x() += dJ(0, 2) * (-K.fx / z2);
    dp.y() += dJ(1, 2) * (-K.fy / z2);
    dp.z() += dJ(0, 0) * (-K.fx / z2) + dJ(1, 1) * (-K.fy / z2) +
              dJ(0, 2) * (2 * K.fx * p.x() / z3) + dJ(1, 2) * (2 * K.fy * p.y() / z3);
    return dp;
}

Mat2 splat_covariance(const Mat3& sigma, const Mat3& w_rot, const Mat23& J) {
    Mat23 M = J * w_rot;
    Mat2 cov = M * sigma * M.transpose();
    cov(0, 0) += kCovDilation;
    cov(1, 1) += kCovDilation;
    if (cov.determinant() <= kDegenerateDet) fail("Degenerate", "splat covariance not invertible");
    return cov;
}

void splat_covariance_backward(const Mat3& sigma, const Mat3& w_rot, const Mat23& J,
                               const Mat2& dCov2d, Mat3& dSigma, Mat23& dJ) {
    Mat23 M = J * w_rot;
    dSigma = M.transpose() * dCov2d * M;
    Mat23 dM = (dCov2d + dCov2d.transpose()) * M * sigma;
    dJ = dM * w_rot.transpose();
}

} // namespace sgs
