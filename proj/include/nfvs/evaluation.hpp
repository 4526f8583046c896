#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nfvs/datagen.hpp"
#include "nfvs/model.hpp"
#include "nfvs/training.hpp"

namespace nfvs::eval {

/// Episode budget and the success thresholds on the final camera pose.
struct EpisodeConfig {
    double max_duration = 20.0;   // s
    double pe_threshold = 0.10;   // m, position error
    double oe_threshold = 0.26;   // rad, orientation error
    double period = 1.0 / 30.0;   // control period, s
    bool stop_at_convergence = true;

    void validate() const;
};

/// Everything a rollout needs besides the feedback source: the robot, the
/// simulated world, and the episode protocol.
struct RolloutContext {
    KinematicChain chain;
    SimConfig sim;
    CameraIntrinsics camera;
    Pose eye_in_hand;
    VecX initial_posture;  // shared start configuration for every episode
    ControlConfig control;
    EpisodeConfig episode;

    void validate() const;
};

enum class Controller { Vs, Nullspace };

struct StepTrace {
    double t = 0.0;  // seconds since episode start
    VecX qdot;       // command applied over this step
    Pose camera;     // ground-truth camera pose when the command was issued
    double pe = 0.0;
    double oe = 0.0;
    double cam_angular_speed = 0.0;  // |angular block of (V J_r(q)) qdot|, rad/s
};

struct RolloutReport {
    std::uint64_t scene_seed = 0;
    Pose desired;               // camera pose defining PE and OE
    bool success = false;
    int convergence_step = -1;  // first step within both thresholds
    bool failed = false;        // simulator or controller error
    std::string failure;
    std::vector<StepTrace> steps;
};

/// Per-step metric traces and the episode summaries. ce[k] = |qdot_k|,
/// cs[k] = |qdot_k - qdot_{k-1}| / T with cs[0] = 0 by convention; the
/// summaries are the per-episode means (final values for the pose errors).
struct MetricTrace {
    std::vector<double> ce, cs, pe, oe;
    double ce_mean = 0.0;
    double cs_mean = 0.0;
    double pe_final = 0.0;
    double oe_final = 0.0;
};

/// Throws TooShortTrace when fewer than two steps were recorded.
MetricTrace metrics(const RolloutReport& report);

/// Closed-loop episode with the trained model in the loop. Perception
/// weights run the servo law (or its null-space variant) on the predicted
/// features; end-to-end weights emit joint velocities directly and only
/// accept the plain variant. Episode errors are recorded in the report
/// rather than thrown.
RolloutReport rollout_neural(const nn::ModelWeights<float>& w, std::uint64_t scene_seed,
                             const RolloutContext& ctx, Controller variant);

/// Same loop with ground-truth features instead of the model: the upper
/// bound any learned perception can approach.
RolloutReport rollout_oracle(std::uint64_t scene_seed, const RolloutContext& ctx,
                             Controller variant);

struct BenchmarkRow {
    std::string name;
    int episodes = 0;
    int successes = 0;
    // Medians over the successful episodes of the per-episode summaries.
    double ce = 0.0, cs = 0.0, pe = 0.0, oe = 0.0;

    double sr() const { return episodes ? double(successes) / episodes : 0.0; }
};

struct BenchmarkResult {
    std::vector<BenchmarkRow> rows;                    // oracle first
    std::vector<std::vector<RolloutReport>> reports;   // aligned with rows
};

/// Matched-seed comparison: every row sees the same episode seeds, derived
/// from the master seed. Null model pointers drop their row; the oracle row
/// is always present.
BenchmarkResult benchmark(const nn::ModelWeights<float>* ours,
                          const nn::ModelWeights<float>* e2e, int n_episodes,
                          std::uint64_t master_seed, const RolloutContext& ctx,
                          Controller variant, int jobs);

/// One ablation variant: which loss terms train it, and whether the
/// imitation gradient treats the interaction matrix as constant.
struct AblationSpec {
    std::string name;
    train::LossWeights weights;
    bool detach_interaction = false;
};

/// Trains each variant with a shared seed and benchmarks all of them on
/// shared episode seeds. An all-zero weight set skips training and
/// evaluates the freshly initialized model.
BenchmarkResult ablate(const Dataset& ds, const train::TrainConfig& train_cfg,
                       const std::vector<AblationSpec>& variants, int n_episodes,
                       std::uint64_t eval_seed, const RolloutContext& ctx, int jobs);

/// Comma-separated per-step metric trace, one row per control step.
void write_episode_trace(const RolloutReport& report, const std::string& path);

/// Comma-separated summary table, one row per benchmark entry. Formatting
/// is fixed so reruns are byte-identical.
void write_summary(const std::vector<BenchmarkRow>& rows, const std::string& path);

}  // namespace nfvs::eval
