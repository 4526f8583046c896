#include "nfvs/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "nfvs/errors.hpp"
#include "nfvs/rng.hpp"

namespace nfvs {

namespace {

// Joint states, Jacobians and commands are captured in 32-bit precision, so
// the simulated state is kept on the 32-bit grid throughout a demo. This
// makes every stored quantity an exact function of the stored joint vector.
double snap32(double v) { return static_cast<double>(static_cast<float>(v)); }

VecX snap32(const VecX& v) {
    VecX out(v.size());
    for (int i = 0; i < v.size(); ++i) out[i] = snap32(v[i]);
    return out;
}

Pose camera_pose_at(const KinematicChain& chain, const Pose& eye_in_hand, const VecX& q) {
    return forward_kinematics(chain, q).compose(eye_in_hand);
}

struct ServoOutcome {
    std::vector<SampleRecord> records;
    VecX q_final;
    std::vector<std::uint8_t> final_frame;
};

// Drives the arm until the ground-truth features reach s_ref, recording
// every control period. Commands use the constant target depths z_ref, the
// same approximation the learned controller applies at run time.
ServoOutcome run_servo(const KinematicChain& chain, const DatagenConfig& cfg,
                       const Scene& scene, const VecX& q_start, const VecX& s_ref,
                       const Eigen::VectorXf& z_ref, int timeout, const char* phase) {
    const Mat6 v = twist_transform(cfg.eye_in_hand);
    const VecX z_used = z_ref.cast<double>();

    ServoOutcome out;
    VecX q = snap32(q_start);
    for (int k = 0;; ++k) {
        const Pose cam = camera_pose_at(chain, cfg.eye_in_hand, q);
        VecX s, z_now;
        try {
            std::tie(s, z_now) = ground_truth_features(scene, cam, cfg.camera);
        } catch (const NonPositiveDepth&) {
            throw OracleDiverged(std::string(phase) + ": feature corner left the front halfspace");
        }

        const MatX j_r = robot_jacobian(chain, q);
        const Eigen::MatrixXf j_stored = j_r.cast<float>();
        const MatX jhat =
            compose_jacobian(interaction_matrix(s, z_used), v, j_stored.cast<double>());
        const VecX qdot = vs_command(s, s_ref, jhat, cfg.control);

        SampleRecord rec;
        rec.k = static_cast<std::uint32_t>(k);
        rec.q = q.cast<float>();
        rec.qdot = qdot.cast<float>();
        rec.jacobian = j_stored;
        rec.image = quantize_image(render(scene, cam, cfg.camera));
        out.records.push_back(std::move(rec));

        if ((s - s_ref).cwiseAbs().maxCoeff() <= cfg.feature_tolerance) {
            out.q_final = q;
            out.final_frame = out.records.back().image;
            return out;
        }
        if (k + 1 > timeout)
            throw OracleDiverged(std::string(phase) + ": servo did not converge");

        // Integrate the command actually stored, then return to the grid.
        const VecX executed = out.records.back().qdot.cast<double>();
        for (int i = 0; i < chain.dof(); ++i) {
            double next = q[i] + cfg.control.period * executed[i];
            const DhJoint& j = chain.joints[i];
            if (next < j.limit_lower || next > j.limit_upper)
                throw OracleDiverged(std::string(phase) + ": joint limit reached");
            q[i] = snap32(next);
        }
    }
}

}  // namespace

void DatagenConfig::validate() const {
    sim.validate();
    camera.validate();
    control.validate();
    if (!(feature_tolerance > 0)) throw ConfigError("feature tolerance must be positive");
    if (phase_a_timeout < 1 || phase_b_timeout < 1)
        throw ConfigError("servo timeouts must be at least one step");
    if (start_offset_xy < 0 || start_offset_z < 0 || start_angle_deg < 0 ||
        start_angle_deg > 90)
        throw ConfigError("start pose offsets must be nonnegative (angle at most 90 deg)");
    if (max_start_tries < 1) throw ConfigError("start pose sampling needs at least one try");
    if (ready_posture.size() == 0) throw ConfigError("ready posture is not set");
}

VecX solve_camera_ik(const KinematicChain& chain, const Pose& eye_in_hand,
                     const Pose& target_camera, const VecX& q_seed) {
    if (q_seed.size() != chain.dof())
        throw DimensionMismatch("ik seed length does not match chain");
    VecX q = q_seed;
    for (int iter = 0; iter < 300; ++iter) {
        const Pose cam = camera_pose_at(chain, eye_in_hand, q);
        const Vec6 err = se3_log(cam.inverse().compose(target_camera)).stacked();
        if (err.norm() < 1e-10) return q;

        const MatX j_cam = twist_transform(eye_in_hand) * robot_jacobian(chain, q);
        VecX dq = damped_pinv(j_cam, 1e-4) * err;
        const double biggest = dq.cwiseAbs().maxCoeff();
        if (biggest > 0.3) dq *= 0.3 / biggest;
        q += dq;
        for (int i = 0; i < chain.dof(); ++i)
            q[i] = std::clamp(q[i], chain.joints[i].limit_lower, chain.joints[i].limit_upper);
    }
    throw OracleDiverged("inverse kinematics did not reach the requested camera pose");
}

Pose sample_start_pose(const Scene& scene, const DatagenConfig& cfg,
                       std::uint64_t scene_seed) {
    Rng rng(scene_seed, Rng::hash("start-pose"));
    const Pose desired = desired_camera_pose(scene, cfg.sim);
    const double a = cfg.start_angle_deg * M_PI / 180.0;

    for (int attempt = 0; attempt < cfg.max_start_tries; ++attempt) {
        Pose p;
        p.translation = desired.translation +
                        Vec3(rng.uniform(-cfg.start_offset_xy, cfg.start_offset_xy),
                             rng.uniform(-cfg.start_offset_xy, cfg.start_offset_xy),
                             rng.uniform(-cfg.start_offset_z, cfg.start_offset_z));
        const double yaw = rng.uniform(-a, a);
        const double pitch = rng.uniform(-a, a);
        const double roll = rng.uniform(-a, a);
        p.rotation = desired.rotation * Eigen::AngleAxisd(yaw, Vec3::UnitZ()) *
                     Eigen::AngleAxisd(pitch, Vec3::UnitY()) *
                     Eigen::AngleAxisd(roll, Vec3::UnitX());
        try {
            ground_truth_features(scene, p, cfg.camera);
            return p;
        } catch (const NonPositiveDepth&) {
            continue;  // a corner fell behind the camera, draw again
        }
    }
    throw OracleDiverged("no admissible start pose after the configured number of tries");
}

std::pair<VecX, VecX> demo_reference(const Scene& scene, const DatagenConfig& cfg,
                                     std::uint64_t scene_seed, int phase) {
    if (phase != 0 && phase != 1) throw ConfigError("demo phase must be 0 or 1");
    const Pose target = phase == 0 ? sample_start_pose(scene, cfg, scene_seed)
                                   : desired_camera_pose(scene, cfg.sim);
    return ground_truth_features(scene, target, cfg.camera);
}

std::vector<Demo> oracle_demo(const KinematicChain& chain, const DatagenConfig& cfg,
                              std::uint64_t scene_seed) {
    cfg.validate();
    const Scene scene = randomize_scene(scene_seed, cfg.sim);
    const Pose desired = desired_camera_pose(scene, cfg.sim);
    const VecX q0 = snap32(
        solve_camera_ik(chain, cfg.eye_in_hand, desired, cfg.ready_posture));

    std::vector<Demo> demos(2);
    VecX q_phase_start = q0;
    for (int phase = 0; phase < 2; ++phase) {
        const auto [s_ref, z_ref] = demo_reference(scene, cfg, scene_seed, phase);
        const Eigen::VectorXf z_stored = z_ref.cast<float>();
        ServoOutcome run = run_servo(chain, cfg, scene, q_phase_start, s_ref, z_stored,
                                     phase == 0 ? cfg.phase_a_timeout : cfg.phase_b_timeout,
                                     phase == 0 ? "start phase" : "task phase");
        Demo& d = demos[phase];
        d.meta.demo_id = static_cast<std::uint32_t>(phase);
        d.meta.scene_seed = scene_seed;
        d.meta.success = true;
        d.meta.target_depths = z_stored;
        d.meta.reference_image = run.final_frame;
        d.records = std::move(run.records);
        q_phase_start = run.q_final;
    }
    return demos;
}

Dataset build_dataset(const KinematicChain& chain, const DatagenConfig& cfg, int n_demos,
                      std::uint64_t master_seed, double split_fraction) {
    cfg.validate();
    if (n_demos < 2) throw ConfigError("dataset needs at least two demos");
    if (!(split_fraction > 0.0 && split_fraction < 1.0))
        throw ConfigError("split fraction must lie strictly between 0 and 1");

    Rng master(master_seed, Rng::hash("datagen"));
    std::vector<std::uint64_t> seeds(n_demos);
    for (auto& s : seeds) s = master.next_u64();

    std::vector<std::vector<Demo>> accepted;
    for (int i = 0; i < n_demos; ++i) {
        try {
            accepted.push_back(oracle_demo(chain, cfg, seeds[i]));
        } catch (const OracleDiverged& e) {
            std::cerr << "demo " << i << " discarded: " << e.what() << "\n";
        }
    }
    if (accepted.size() < 2) throw OracleDiverged("too few demos converged to build a dataset");

    const int train_count =
        static_cast<int>(std::lround(split_fraction * double(accepted.size())));

    Dataset ds;
    ds.header.width = static_cast<std::uint32_t>(cfg.camera.width);
    ds.header.height = static_cast<std::uint32_t>(cfg.camera.height);
    ds.header.channels = static_cast<std::uint32_t>(cfg.camera.channels);
    ds.header.dof = static_cast<std::uint32_t>(chain.dof());
    ds.header.period = cfg.control.period;

    std::size_t records = 0;
    for (std::size_t i = 0; i < accepted.size(); ++i) {
        for (int phase = 0; phase < 2; ++phase) {
            Demo d = std::move(accepted[i][phase]);
            d.meta.demo_id = static_cast<std::uint32_t>(2 * i + phase);
            d.meta.split = i < static_cast<std::size_t>(train_count) ? 0 : 1;
            records += d.records.size();
            ds.demos.push_back(std::move(d));
        }
    }
    ds.header.demo_count = static_cast<std::uint32_t>(ds.demos.size());
    ds.header.record_count = static_cast<std::uint32_t>(records);
    ds.header.feature_size =
        static_cast<std::uint32_t>(2 * ds.demos.front().meta.target_depths.size());
    ds.validate();
    return ds;
}

std::vector<std::vector<PairRef>> pair_batches(const Dataset& ds, std::uint8_t split,
                                               int batch_size, std::uint64_t seed) {
    if (batch_size < 2 || batch_size % 2 != 0)
        throw ConfigError("batch size must be a positive even count");

    std::vector<PairRef> pairs;
    for (std::size_t d = 0; d < ds.demos.size(); ++d) {
        if (ds.demos[d].meta.split != split) continue;
        for (std::size_t k = 0; k + 1 < ds.demos[d].records.size(); ++k)
            pairs.push_back({static_cast<int>(d), static_cast<int>(k)});
    }

    Rng rng(seed, Rng::hash("pairs"));
    for (std::size_t i = pairs.size(); i > 1; --i)
        std::swap(pairs[i - 1], pairs[rng.next_below(i)]);

    const std::size_t per_batch = static_cast<std::size_t>(batch_size) / 2;
    std::vector<std::vector<PairRef>> batches;
    for (std::size_t at = 0; at < pairs.size(); at += per_batch) {
        const std::size_t end = std::min(at + per_batch, pairs.size());
        batches.emplace_back(pairs.begin() + static_cast<std::ptrdiff_t>(at),
                             pairs.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

}  // namespace nfvs
