#pragma once

#include <Eigen/Core>

#include "nfvs/errors.hpp"
#include "nfvs/geometry.hpp"

namespace nfvs {

/// Gains and limits of the velocity-resolved servo loop.
struct ControlConfig {
    double lambda = 1.0;         // proportional gain, 1/s
    // Pseudo-inverse damping. A four-point target this size has two weak
    // interaction-matrix modes near 0.04; damping well below that keeps the
    // servo's exponential decay intact while still bounding the inverse.
    double sigma = 0.02;
    double command_clamp = 1.5;  // per-joint velocity bound, rad/s
    double period = 1.0 / 30.0;  // control period, s

    void validate() const;
};

/// Point-feature interaction matrix. Features are stacked normalized image
/// coordinates (x_1, y_1, ..., x_P, y_P); depths holds one Z per point.
/// Returns the 2P x 6 matrix mapping camera body twists (v; w) to feature
/// velocities.
MatX interaction_matrix(const VecX& features, const VecX& depths);

/// Full feature-to-joint Jacobian L * V * J_r.
MatX compose_jacobian(const MatX& l, const Mat6& v, const MatX& j_r);

/// Damped least-squares inverse (J^T J + sigma^2 I)^-1 J^T. With sigma = 0
/// this is the pseudo-inverse of a full-column-rank J; rank deficiency at
/// sigma = 0 raises SingularMatrix.
MatX damped_pinv(const MatX& j, double sigma);

/// Servo command qdot = -lambda * pinv_damped(jhat) * (s - s_star),
/// entrywise clamped to the configured velocity bound.
VecX vs_command(const VecX& s, const VecX& s_star, const MatX& jhat,
                const ControlConfig& cfg);

/// Servo command restricted to the null space of the camera's angular
/// velocity: the returned qdot satisfies j_ori * qdot = 0, so the camera
/// orientation is held while the feature error is reduced. The velocity
/// bound is applied by uniform scaling to stay inside the null space.
VecX nullspace_command(const VecX& s_pos, const VecX& s_star_pos, const MatX& jhat,
                       const MatX& j_ori, const ControlConfig& cfg);

}  // namespace nfvs
