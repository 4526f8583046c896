#include "nfvs/vs_control.hpp"

#include <Eigen/Dense>
#include <string>

namespace nfvs {

namespace {

// Moore-Penrose pseudo-inverse with a relative singular-value cutoff. Used
// for the orientation-task projector, where an exact projector (not a damped
// one) is required for null-space membership.
MatX moore_penrose(const MatX& m, double rel_tol = 1e-12) {
    Eigen::JacobiSVD<MatX> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const VecX& sv = svd.singularValues();
    const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
    VecX inv = VecX::Zero(sv.size());
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

}  // namespace

void ControlConfig::validate() const {
    if (!(lambda > 0.0)) throw ConfigError("control gain lambda must be positive");
    if (!(sigma >= 0.0)) throw ConfigError("damping sigma must be non-negative");
    if (!(command_clamp > 0.0)) throw ConfigError("command clamp must be positive");
    if (!(period > 0.0)) throw ConfigError("control period must be positive");
}

MatX interaction_matrix(const VecX& features, const VecX& depths) {
    if (features.size() % 2 != 0)
        throw DimensionMismatch("feature vector length must be even, got " +
                                std::to_string(features.size()));
    const long p = features.size() / 2;
    if (depths.size() != p)
        throw DimensionMismatch("expected " + std::to_string(p) + " depths, got " +
                                std::to_string(depths.size()));

    MatX l(2 * p, 6);
    for (long i = 0; i < p; ++i) {
        const double x = features[2 * i];
        const double y = features[2 * i + 1];
        const double z = depths[i];
        if (z <= 1e-6)
            throw NonPositiveDepth("feature depth " + std::to_string(i + 1) +
                                   " is not positive");
        l.row(2 * i) << -1.0 / z, 0.0, x / z, x * y, -(1.0 + x * x), y;
        l.row(2 * i + 1) << 0.0, -1.0 / z, y / z, 1.0 + y * y, -x * y, -x;
    }
    return l;
}

MatX compose_jacobian(const MatX& l, const Mat6& v, const MatX& j_r) {
    if (l.cols() != 6 || j_r.rows() != 6)
        throw DimensionMismatch("jacobian composition expects f x 6, 6 x 6, 6 x n factors");
    return l * v * j_r;
}

MatX damped_pinv(const MatX& j, double sigma) {
    if (sigma < 0.0) throw ConfigError("damping sigma must be non-negative");
    const long n = j.cols();
    MatX jtj = j.transpose() * j;
    if (sigma == 0.0) {
        Eigen::JacobiSVD<MatX> svd(jtj);
        const VecX& sv = svd.singularValues();
        const double smax = sv(0);
        const double smin = sv(sv.size() - 1);
        if (!(smax > 0.0) || smin / smax < 1e-12)
            throw SingularMatrix("J^T J is rank deficient and sigma is zero");
        return jtj.ldlt().solve(j.transpose());
    }
    jtj.diagonal().array() += sigma * sigma;
    return jtj.ldlt().solve(j.transpose());
}

VecX vs_command(const VecX& s, const VecX& s_star, const MatX& jhat,
                const ControlConfig& cfg) {
    cfg.validate();
    if (s.size() != s_star.size() || s.size() != jhat.rows())
        throw DimensionMismatch("feature vectors and jacobian rows disagree");
    VecX qdot = cfg.lambda * (damped_pinv(jhat, cfg.sigma) * (s_star - s));
    return qdot.cwiseMax(-cfg.command_clamp).cwiseMin(cfg.command_clamp);
}

VecX nullspace_command(const VecX& s_pos, const VecX& s_star_pos, const MatX& jhat,
                       const MatX& j_ori, const ControlConfig& cfg) {
    cfg.validate();
    if (s_pos.size() != s_star_pos.size() || s_pos.size() != jhat.rows())
        throw DimensionMismatch("feature vectors and jacobian rows disagree");
    if (j_ori.rows() != 3 || j_ori.cols() != jhat.cols())
        throw DimensionMismatch("orientation jacobian must be 3 x n");

    const long n = jhat.cols();
    MatX projector = MatX::Identity(n, n) - moore_penrose(j_ori) * j_ori;

    Eigen::JacobiSVD<MatX> svd(j_ori);
    const VecX& sv = svd.singularValues();
    long rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) > 1e-12 * sv(0)) ++rank;
    if (rank >= n)
        throw SingularMatrix("orientation task leaves no null space for the servo");

    VecX qdot = cfg.lambda *
                (projector * (damped_pinv(jhat * projector, cfg.sigma) * (s_star_pos - s_pos)));

    // Uniform scaling instead of an entrywise clamp: scaling keeps the
    // command inside the orientation null space, clamping would not.
    const double peak = qdot.cwiseAbs().maxCoeff();
    if (peak > cfg.command_clamp) qdot *= cfg.command_clamp / peak;
    return qdot;
}

}  // namespace nfvs
