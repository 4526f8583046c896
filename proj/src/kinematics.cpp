#include "nfvs/kinematics.hpp"

#include <cmath>
#include <string>

namespace nfvs {

namespace {

Eigen::Matrix4d dh_transform(const DhJoint& j, double q) {
    const double ct = std::cos(q + j.theta_offset);
    const double st = std::sin(q + j.theta_offset);
    const double ca = std::cos(j.alpha);
    const double sa = std::sin(j.alpha);
    Eigen::Matrix4d t;
    t << ct, -st * ca, st * sa, j.a * ct,
         st, ct * ca, -ct * sa, j.a * st,
         0.0, sa, ca, j.d,
         0.0, 0.0, 0.0, 1.0;
    return t;
}

void check_dims(const KinematicChain& chain, const VecX& q) {
    if (q.size() != chain.dof())
        throw DimensionMismatch("joint vector has " + std::to_string(q.size()) +
                                " entries, chain has " + std::to_string(chain.dof()));
    if (!q.allFinite()) throw DimensionMismatch("joint vector has non-finite entries");
}

}  // namespace

void KinematicChain::validate() const {
    if (dof() < 2) throw ConfigError("kinematic chain needs at least 2 joints");
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (joints[i].limit_lower >= joints[i].limit_upper)
            throw ConfigError("joint " + std::to_string(i + 1) + " limits must satisfy lower < upper");
        if (joints[i].velocity_limit <= 0.0)
            throw ConfigError("joint " + std::to_string(i + 1) + " velocity limit must be positive");
    }
}

KinematicChain KinematicChain::two_link_planar(double a1, double a2) {
    KinematicChain chain;
    chain.joints.resize(2);
    chain.joints[0].a = a1;
    chain.joints[1].a = a2;
    return chain;
}

Pose forward_kinematics(const KinematicChain& chain, const VecX& q) {
    check_dims(chain, q);
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    for (int i = 0; i < chain.dof(); ++i) t *= dh_transform(chain.joints[i], q[i]);
    return Pose::from_matrix(t.topLeftCorner<3, 3>(), t.topRightCorner<3, 1>());
}

MatX robot_jacobian(const KinematicChain& chain, const VecX& q) {
    check_dims(chain, q);
    const int n = chain.dof();

    // Axis/origin construction in the base frame: for revolute joint i with
    // axis z_i through origin p_i, the column is [z_i x (p_ee - p_i); z_i].
    std::vector<Vec3> axes(n), origins(n);
    Eigen::Matrix4d t = Eigen::Matrix4d::Identity();
    for (int i = 0; i < n; ++i) {
        axes[i] = t.block<3, 1>(0, 2);
        origins[i] = t.block<3, 1>(0, 3);
        t *= dh_transform(chain.joints[i], q[i]);
    }
    const Vec3 p_ee = t.block<3, 1>(0, 3);
    const Mat3 r_base_ee = t.topLeftCorner<3, 3>();

    MatX jac(6, n);
    for (int i = 0; i < n; ++i) {
        jac.block<3, 1>(0, i) = axes[i].cross(p_ee - origins[i]);
        jac.block<3, 1>(3, i) = axes[i];
    }
    // Express both blocks in the end-effector frame.
    jac.topRows<3>() = r_base_ee.transpose() * jac.topRows<3>();
    jac.bottomRows<3>() = r_base_ee.transpose() * jac.bottomRows<3>();
    return jac;
}

}  // namespace nfvs
