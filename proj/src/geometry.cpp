#include "nfvs/geometry.hpp"

#include <cmath>

namespace nfvs {

void CameraIntrinsics::validate() const {
    if (fx <= 0.0 || fy <= 0.0) throw ConfigError("camera focal lengths must be positive");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height)
        throw ConfigError("camera principal point must lie inside the image");
    if (channels != 1 && channels != 3) throw ConfigError("camera channels must be 1 or 3");
    if (width <= 0 || height <= 0) throw ConfigError("camera resolution must be positive");
}

ProjectedPoint project(const Vec3& point_cam, const CameraIntrinsics& k) {
    (void)k;
    const double z = point_cam.z();
    if (z <= 1e-6) throw NonPositiveDepth("point depth " + std::to_string(z) + " <= 1e-6");
    return {point_cam.x() / z, point_cam.y() / z, z};
}

double quat_distance(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2) {
    const double tol = 1e-6;
    if (std::abs(q1.norm() - 1.0) > tol || std::abs(q2.norm() - 1.0) > tol)
        throw NotUnitQuaternion("quat_distance requires unit quaternions");
    // Equals 2*acos(|<q1,q2>|) but evaluated through the chordal half-angle,
    // which stays exact at 0 where acos loses half the significant digits.
    const double diff = (q1.coeffs() - q2.coeffs()).norm();
    const double sum = (q1.coeffs() + q2.coeffs()).norm();
    return 4.0 * std::atan2(std::min(diff, sum), std::max(diff, sum));
}

Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
    return m;
}

Mat6 twist_transform(const Pose& pose_ec) {
    const Mat3 rt = pose_ec.rotation_matrix().transpose();
    Mat6 v = Mat6::Zero();
    v.topLeftCorner<3, 3>() = rt;
    v.topRightCorner<3, 3>() = rt * skew(-pose_ec.translation);
    v.bottomRightCorner<3, 3>() = rt;
    return v;
}

Pose se3_exp(const Twist& xi) {
    const Vec3 w = xi.angular;
    const Vec3 v = xi.linear;
    const double theta = w.norm();
    Mat3 r;
    Mat3 j;  // left Jacobian of SO(3)
    if (theta < 1e-10) {
        const Mat3 wx = skew(w);
        r = Mat3::Identity() + wx + 0.5 * wx * wx;
        j = Mat3::Identity() + 0.5 * wx;
    } else {
        const Mat3 wx = skew(w / theta);
        const double s = std::sin(theta);
        const double c = std::cos(theta);
        r = Mat3::Identity() + s * wx + (1.0 - c) * wx * wx;
        j = Mat3::Identity() + ((1.0 - c) / theta) * wx + ((theta - s) / theta) * wx * wx;
    }
    return Pose::from_matrix(r, j * v);
}

Twist se3_log(const Pose& pose) {
    const Mat3 r = pose.rotation_matrix();
    const double cos_theta = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    Vec3 w;
    Mat3 j_inv;
    if (theta < 1e-10) {
        w = 0.5 * Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
        j_inv = Mat3::Identity() - 0.5 * skew(w);
    } else {
        w = theta / (2.0 * std::sin(theta)) *
            Vec3(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
        const Mat3 wx = skew(w / theta);
        const double half = 0.5 * theta;
        j_inv = Mat3::Identity() - (theta * 0.5) * wx +
                (1.0 - half * std::cos(half) / std::sin(half)) * wx * wx;
    }
    return {j_inv * pose.translation, w};
}

}  // namespace nfvs
