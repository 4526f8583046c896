#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "nfvs/errors.hpp"
#include "nfvs/geometry.hpp"
#include "nfvs/rng.hpp"

using namespace nfvs;

namespace {

Eigen::Quaterniond random_unit_quaternion(Rng& rng) {
    Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    q.normalize();
    return q;
}

Pose random_pose(Rng& rng) {
    Pose p;
    p.rotation = random_unit_quaternion(rng);
    p.translation = Vec3(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
    return p;
}

// Oracle: project through an explicit 3x4 homogeneous pinhole matrix and
// divide by the homogeneous coordinate. Kept deliberately separate from the
// library's normalized-coordinate path.
Eigen::Vector2d pixel_projection_oracle(const Vec3& point, const CameraIntrinsics& k) {
    Eigen::Matrix<double, 3, 4> p;
    p << k.fx, 0.0, k.cx, 0.0,
         0.0, k.fy, k.cy, 0.0,
         0.0, 0.0, 1.0, 0.0;
    Eigen::Vector4d h(point.x(), point.y(), point.z(), 1.0);
    Eigen::Vector3d uvw = p * h;
    return {uvw.x() / uvw.z(), uvw.y() / uvw.z()};
}

// Oracle: geodesic angle between two rotations from the trace of the relative
// rotation matrix.
double rotation_angle_oracle(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2) {
    Mat3 rel = q1.toRotationMatrix().transpose() * q2.toRotationMatrix();
    double c = (rel.trace() - 1.0) / 2.0;
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// Chordal quaternion distance, sign-resolved. Well conditioned near zero,
// unlike the arccos-based geodesic angle, so round-trip identity checks use
// this. For small angles it equals angle/2.
double quat_chordal(const Eigen::Quaterniond& q1, const Eigen::Quaterniond& q2) {
    double dplus = (q1.coeffs() - q2.coeffs()).norm();
    double dminus = (q1.coeffs() + q2.coeffs()).norm();
    return std::min(dplus, dminus);
}

}  // namespace

TEST_CASE("pose: compose and inverse round-trip to identity") {
    Rng rng(11, 0);
    for (int i = 0; i < 1000; ++i) {
        Pose p = random_pose(rng);
        Pose round = p.compose(p.inverse());
        CHECK(round.translation.norm() < 1e-9);
        CHECK(quat_chordal(round.rotation, Eigen::Quaterniond::Identity()) < 1e-9);
    }
}

TEST_CASE("pose: compose matches homogeneous matrix product") {
    Rng rng(12, 0);
    for (int i = 0; i < 100; ++i) {
        Pose a = random_pose(rng);
        Pose b = random_pose(rng);
        Pose c = a.compose(b);
        Mat3 r_ref = a.rotation_matrix() * b.rotation_matrix();
        Vec3 t_ref = a.rotation_matrix() * b.translation + a.translation;
        CHECK((c.rotation_matrix() - r_ref).norm() < 1e-12);
        CHECK((c.translation - t_ref).norm() < 1e-12);
    }
}

TEST_CASE("pose: transform_point applies rotation then translation") {
    Rng rng(13, 0);
    Pose p = random_pose(rng);
    Vec3 x(0.3, -0.1, 0.7);
    Vec3 expect = p.rotation_matrix() * x + p.translation;
    CHECK((p.transform_point(x) - expect).norm() < 1e-12);
    CHECK((p.inverse().transform_point(p.transform_point(x)) - x).norm() < 1e-9);
}

TEST_CASE("camera intrinsics: validation rejects bad fields") {
    CameraIntrinsics k;
    CHECK_NOTHROW(k.validate());
    CameraIntrinsics bad = k;
    bad.fx = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = k;
    bad.cx = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = k;
    bad.cy = double(k.height);
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = k;
    bad.channels = 2;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("project: optical-axis and simple off-axis points") {
    CameraIntrinsics k;
    ProjectedPoint p = project(Vec3(0, 0, 1), k);
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
    CHECK(p.depth == 1.0);

    p = project(Vec3(1, 0, 2), k);
    CHECK(p.x == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.y == 0.0);
    CHECK(p.depth == 2.0);
}

TEST_CASE("project: matches homogeneous projection oracle in pixels") {
    CameraIntrinsics k;
    Vec3 point(0.3, -0.2, 1.5);
    ProjectedPoint p = project(point, k);
    Eigen::Vector2d uv = to_pixel(p, k);
    Eigen::Vector2d uv_ref = pixel_projection_oracle(point, k);
    CHECK((uv - uv_ref).norm() < 1e-12);

    Rng rng(14, 0);
    for (int i = 0; i < 100; ++i) {
        Vec3 x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(0.1, 5.0));
        ProjectedPoint q = project(x, k);
        Eigen::Vector2d ref = pixel_projection_oracle(x, k);
        CHECK((to_pixel(q, k) - ref).norm() < 1e-10);
    }
}

TEST_CASE("project: rejects points at or behind the camera plane") {
    CameraIntrinsics k;
    CHECK_THROWS_AS(project(Vec3(0, 0, 0), k), NonPositiveDepth);
    CHECK_THROWS_AS(project(Vec3(0.1, 0.1, -0.5), k), NonPositiveDepth);
    CHECK_THROWS_AS(project(Vec3(0, 0, 1e-7), k), NonPositiveDepth);
}

TEST_CASE("project: back-projection recovers the input point") {
    CameraIntrinsics k;
    Rng rng(15, 0);
    for (int i = 0; i < 200; ++i) {
        Vec3 x(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(1e-3, 10.0));
        ProjectedPoint p = project(x, k);
        Vec3 back(p.x * p.depth, p.y * p.depth, p.depth);
        CHECK((back - x).norm() < 1e-9);
    }
}

TEST_CASE("quat_distance: identical and antipodal quaternions give zero") {
    Rng rng(16, 0);
    for (int i = 0; i < 50; ++i) {
        Eigen::Quaterniond q = random_unit_quaternion(rng);
        Eigen::Quaterniond neg(-q.w(), -q.x(), -q.y(), -q.z());
        CHECK(quat_distance(q, q) == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(quat_distance(q, neg) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("quat_distance: matches rotation-matrix geodesic oracle") {
    Eigen::Quaterniond id = Eigen::Quaterniond::Identity();
    Eigen::Quaterniond rz90(Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitZ()));
    CHECK(quat_distance(id, rz90) == doctest::Approx(rotation_angle_oracle(id, rz90)).epsilon(1e-10));

    Rng rng(17, 0);
    for (int i = 0; i < 200; ++i) {
        Eigen::Quaterniond a = random_unit_quaternion(rng);
        Eigen::Quaterniond b = random_unit_quaternion(rng);
        CHECK(quat_distance(a, b) == doctest::Approx(rotation_angle_oracle(a, b)).epsilon(1e-8));
    }
}

TEST_CASE("quat_distance: symmetric, non-negative, bounded by pi") {
    Rng rng(18, 0);
    for (int i = 0; i < 200; ++i) {
        Eigen::Quaterniond a = random_unit_quaternion(rng);
        Eigen::Quaterniond b = random_unit_quaternion(rng);
        double dphi = quat_distance(a, b);
        CHECK(dphi >= 0.0);
        CHECK(dphi <= M_PI + 1e-12);
        CHECK(dphi == doctest::Approx(quat_distance(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("quat_distance: rejects non-unit inputs") {
    Eigen::Quaterniond good = Eigen::Quaterniond::Identity();
    Eigen::Quaterniond bad(1.1, 0, 0, 0);
    CHECK_THROWS_AS(quat_distance(good, bad), NotUnitQuaternion);
    CHECK_THROWS_AS(quat_distance(bad, good), NotUnitQuaternion);
}

TEST_CASE("twist_transform: identity pose gives exact identity matrix") {
    Mat6 v = twist_transform(Pose::identity());
    CHECK((v - Mat6::Identity()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("twist_transform: pure rotation is block diagonal") {
    Pose p;
    p.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.8, Vec3(1, 2, -1).normalized()));
    p.translation.setZero();
    Mat6 v = twist_transform(p);
    Mat3 rt = p.rotation_matrix().transpose();
    CHECK((v.topLeftCorner<3, 3>() - rt).norm() < 1e-12);
    CHECK((v.bottomRightCorner<3, 3>() - rt).norm() < 1e-12);
    CHECK(v.topRightCorner<3, 3>().norm() < 1e-12);
    CHECK(v.bottomLeftCorner<3, 3>().norm() < 1e-12);
}

// Oracle: move the end effector along a sampled twist, carry the rigidly
// mounted camera with it, and finite-difference a static point's camera-frame
// coordinates. For camera body twist (v, w) the analytic velocity of a static
// point observed at p is -v - w x p.
TEST_CASE("twist_transform: agrees with finite-difference camera motion") {
    Rng rng(19, 0);
    const double eps = 1e-7;
    for (int i = 0; i < 50; ++i) {
        Pose pose_ec = random_pose(rng);
        Mat6 v = twist_transform(pose_ec);

        Twist xi_e;
        xi_e.linear = Vec3(rng.normal(), rng.normal(), rng.normal());
        xi_e.angular = Vec3(rng.normal(), rng.normal(), rng.normal());

        Pose ee0 = random_pose(rng);
        Twist scaled;
        scaled.linear = xi_e.linear * eps;
        scaled.angular = xi_e.angular * eps;
        Pose ee1 = ee0.compose(se3_exp(scaled));

        Pose cam0 = ee0.compose(pose_ec);
        Pose cam1 = ee1.compose(pose_ec);

        Vec3 p_world(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        Vec3 p0 = cam0.inverse().transform_point(p_world);
        Vec3 p1 = cam1.inverse().transform_point(p_world);
        Vec3 fd_vel = (p1 - p0) / eps;

        Vec6 xi_c = v * xi_e.stacked();
        Vec3 analytic = -xi_c.head<3>() - xi_c.tail<3>().cross(p0);
        CHECK((fd_vel - analytic).norm() < 1e-5 * (1.0 + analytic.norm()));
    }
}

TEST_CASE("twist_transform: matches log-map finite difference of camera pose") {
    Rng rng(20, 0);
    const double eps = 1e-7;
    for (int i = 0; i < 50; ++i) {
        Pose pose_ec = random_pose(rng);
        Mat6 v = twist_transform(pose_ec);

        Vec6 xi_e;
        for (int j = 0; j < 6; ++j) xi_e[j] = rng.normal();

        Pose ee0 = random_pose(rng);
        Pose ee1 = ee0.compose(se3_exp(Twist::from_stacked(xi_e * eps)));
        Pose cam0 = ee0.compose(pose_ec);
        Pose cam1 = ee1.compose(pose_ec);

        Vec6 xi_c_fd = se3_log(cam0.inverse().compose(cam1)).stacked() / eps;
        Vec6 xi_c = v * xi_e;
        CHECK((xi_c_fd - xi_c).norm() < 1e-5 * (1.0 + xi_c.norm()));
    }
}

TEST_CASE("se3 exp/log: round-trip on random twists and poses") {
    Rng rng(21, 0);
    for (int i = 0; i < 200; ++i) {
        Twist xi;
        xi.linear = Vec3(rng.normal(), rng.normal(), rng.normal());
        // The principal log only round-trips rotations below pi.
        xi.angular = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized() *
                     rng.uniform(0.0, 0.95 * M_PI);
        Twist back = se3_log(se3_exp(xi));
        CHECK((back.stacked() - xi.stacked()).norm() < 1e-9 * (1.0 + xi.stacked().norm()));

        Pose p = random_pose(rng);
        Pose p_back = se3_exp(se3_log(p));
        CHECK((p_back.translation - p.translation).norm() < 1e-9);
        CHECK(quat_chordal(p_back.rotation, p.rotation) < 1e-9);
    }
}

TEST_CASE("se3 exp: zero twist gives identity, small angles are stable") {
    Twist zero;
    zero.linear.setZero();
    zero.angular.setZero();
    Pose p = se3_exp(zero);
    CHECK(p.translation.norm() == 0.0);
    CHECK(quat_distance(p.rotation, Eigen::Quaterniond::Identity()) == 0.0);

    Twist tiny;
    tiny.linear = Vec3(1e-13, -2e-13, 3e-13);
    tiny.angular = Vec3(1e-13, 1e-13, -1e-13);
    Pose q = se3_exp(tiny);
    CHECK((q.translation - tiny.linear).norm() < 1e-15);
}
