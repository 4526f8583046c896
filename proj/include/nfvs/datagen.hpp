#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "nfvs/dataset.hpp"
#include "nfvs/kinematics.hpp"
#include "nfvs/sim.hpp"
#include "nfvs/vs_control.hpp"

namespace nfvs {

struct DatagenConfig {
    SimConfig sim;
    CameraIntrinsics camera;
    ControlConfig control;
    Pose eye_in_hand;     // camera frame relative to the end effector
    VecX ready_posture;   // inverse-kinematics seed configuration

    double feature_tolerance = 1e-3;  // convergence, max norm in normalized units
    int phase_a_timeout = 240;        // servo steps before a demo is abandoned
    int phase_b_timeout = 300;

    // Start-pose sampling window around the desired camera pose.
    double start_offset_xy = 0.15;   // m
    double start_offset_z = 0.15;    // m
    double start_angle_deg = 20.0;   // yaw, pitch and roll, each
    int max_start_tries = 100;

    void validate() const;
};

// Damped Newton iteration on the camera pose error. Returns a configuration
// whose camera frame matches target_camera to within 1e-10; throws
// OracleDiverged when the iteration stalls or leaves the joint limits.
VecX solve_camera_ik(const KinematicChain& chain, const Pose& eye_in_hand,
                     const Pose& target_camera, const VecX& q_seed);

// Perturbed start pose for the demo with this scene seed, re-derivable from
// the seed alone. Rejection-sampled so all feature corners stay in front of
// the camera.
Pose sample_start_pose(const Scene& scene, const DatagenConfig& cfg, std::uint64_t scene_seed);

// Reference features and corner depths the oracle servoed toward in the
// given phase (0: toward the sampled start pose, 1: toward the desired
// pose). Exact function of the scene seed.
std::pair<VecX, VecX> demo_reference(const Scene& scene, const DatagenConfig& cfg,
                                     std::uint64_t scene_seed, int phase);

// One scripted demonstration: phase 0 servos from the desired pose out to
// the sampled start pose, phase 1 servos back. Each phase is returned as its
// own demo whose reference image is that phase's converged final frame.
// Throws OracleDiverged when either phase fails to converge.
std::vector<Demo> oracle_demo(const KinematicChain& chain, const DatagenConfig& cfg,
                              std::uint64_t scene_seed);

// Runs n_demos seed-derived demonstrations, skipping diverged ones, and
// assigns whole demonstrations (both phases together) to the training or
// validation partition.
Dataset build_dataset(const KinematicChain& chain, const DatagenConfig& cfg, int n_demos,
                      std::uint64_t master_seed, double split_fraction);

// Identifies the consecutive-frame pair (records k and k+1) of one demo.
struct PairRef {
    int demo = 0;
    int k = 0;
};

// All within-demo consecutive pairs of one partition, shuffled and packed
// into batches of batch_size/2 pairs (the last batch may be short).
std::vector<std::vector<PairRef>> pair_batches(const Dataset& ds, std::uint8_t split,
                                               int batch_size, std::uint64_t seed);

}  // namespace nfvs
