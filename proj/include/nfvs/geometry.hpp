#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "nfvs/errors.hpp"

namespace nfvs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Linear + angular velocity of a rigid frame, expressed in that frame.
struct Twist {
    Vec3 linear = Vec3::Zero();
    Vec3 angular = Vec3::Zero();

    Vec6 stacked() const {
        Vec6 v;
        v << linear, angular;
        return v;
    }
    static Twist from_stacked(const Vec6& v) { return {v.head<3>(), v.tail<3>()}; }
};

// Rigid transform. Scalar-first Hamilton quaternion; `rotation * p + translation`
// maps points from the local frame of this pose into its parent frame.
struct Pose {
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Vec3 translation = Vec3::Zero();

    Pose() = default;
    Pose(const Eigen::Quaterniond& q, const Vec3& t) : rotation(q.normalized()), translation(t) {}
    static Pose identity() { return {}; }
    static Pose from_matrix(const Mat3& r, const Vec3& t) { return {Eigen::Quaterniond(r), t}; }

    Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }

    Vec3 transform_point(const Vec3& p) const { return rotation * p + translation; }
    Vec3 rotate(const Vec3& v) const { return rotation * v; }

    Pose compose(const Pose& other) const {
        return {rotation * other.rotation, rotation * other.translation + translation};
    }
    Pose inverse() const {
        const Eigen::Quaterniond qi = rotation.conjugate();
        return {qi, qi * (-translation)};
    }
};

/// Pinhole model. fx, fy, cx, cy in pixels; image is h x w x c.
struct CameraIntrinsics {
    double fx = 55.4;
    double fy = 55.4;
    double cx = 32.0;
    double cy = 32.0;
    int width = 64;
    int height = 64;
    int channels = 3;

    void validate() const;
};

/// Image point in normalized coordinates (x = X/Z, y = Y/Z) plus the depth.
struct ProjectedPoint {
    double x = 0.0;
    double y = 0.0;
    double depth = 0.0;
};

/// Project a camera-frame point. Throws NonPositiveDepth if Z <= 1e-6.
ProjectedPoint project(const Vec3& point_cam, const CameraIntrinsics& k);

/// Pixel coordinates of a normalized image point.
inline Eigen::Vector2d to_pixel(double x, double y, const CameraIntrinsics& k) {
    return {k.fx * x + k.cx, k.fy * y + k.cy};
}

inline Eigen::Vector2d to_pixel(const ProjectedPoint& p, const CameraIntrinsics& k) {
    return to_pixel(p.x, p.y, k);
}

/// Geodesic angle between two unit quaternions, in [0, pi].
/// Resolves the double cover, so d(q, -q) = 0.
double quat_distance(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2);

// 6x6 matrix mapping end-effector body twists (v; w) to camera body twists,
// given the fixed pose of the camera frame in the end-effector frame.
// With R = rotation of pose_ec and t = translation of pose_ec:
//   [ R^T  R^T*skew(-t) ]
//   [ 0    R^T          ]
// The convention is pinned by the finite-difference oracle in the test suite.
Mat6 twist_transform(const Pose& pose_ec);

Mat3 skew(const Vec3& v);

/// SE(3) exponential of a body twist integrated for unit time.
Pose se3_exp(const Twist& xi);

/// SE(3) logarithm; inverse of se3_exp for rotation angles < pi.
Twist se3_log(const Pose& pose);

}  // namespace nfvs
