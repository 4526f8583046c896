#pragma once

#include <vector>

#include <Eigen/Core>

#include "nfvs/geometry.hpp"

namespace nfvs {

/// One joint of a serial chain, standard (distal) Denavit-Hartenberg:
///   T_i = Rz(q_i + theta_offset) * Tz(d) * Tx(a) * Rx(alpha)
struct DhJoint {
    double a = 0.0;             // link length, m
    double alpha = 0.0;         // link twist, rad
    double d = 0.0;             // link offset, m
    double theta_offset = 0.0;  // joint angle offset, rad
    double limit_lower = -3.0;  // rad
    double limit_upper = 3.0;   // rad
    double velocity_limit = 2.5;  // rad/s
};

struct KinematicChain {
    std::vector<DhJoint> joints;

    int dof() const { return static_cast<int>(joints.size()); }
    void validate() const;

    /// Analytically tractable chain used throughout the unit tests.
    static KinematicChain two_link_planar(double a1 = 1.0, double a2 = 1.0);
};

struct JointState {
    VecX positions;
    VecX velocities;
};

/// Pose of the end-effector frame in the base frame.
Pose forward_kinematics(const KinematicChain& chain, const VecX& q);

// 6 x n geometric Jacobian expressed in the end-effector frame:
// J_r * qdot is the end-effector body twist (v; w).
MatX robot_jacobian(const KinematicChain& chain, const VecX& q);

}  // namespace nfvs
