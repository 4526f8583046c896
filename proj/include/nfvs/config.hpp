#pragma once

#include <string>

#include "nfvs/datagen.hpp"
#include "nfvs/evaluation.hpp"
#include "nfvs/model.hpp"
#include "nfvs/training.hpp"

namespace nfvs::cfg {

/// Everything the pipeline reads from one config file. DatagenConfig nests
/// the camera, controller, scene randomization, mount pose, and the demo
/// ready posture; the remaining fields cover training and closed-loop
/// evaluation. Seeds and worker counts are command-line concerns and do not
/// live here.
struct AppConfig {
    KinematicChain chain;
    DatagenConfig datagen;
    int demos = 50;
    double split = 0.8;

    // Optimizer settings; the servo constants inside TrainConfig mirror the
    // control section, so only the optimizer-facing fields have keys.
    int epochs = 100;
    double learning_rate = 1e-4;
    int batch_size = 32;
    double alpha = 1.5;
    nn::AugmentConfig augment;
    train::LossWeights loss_weights;
    double e2e_ae_weight = 0.0;
    int checkpoint_every = 0;
    bool detach_interaction = false;

    eval::EpisodeConfig episode;
    int episodes = 50;
    VecX initial_posture;

    /// Nested validates plus the cross-field checks (postures inside joint
    /// limits, resolution the model can encode, normalized mount rotation).
    void validate() const;

    /// TrainConfig with the controller constants and camera twist filled in
    /// from the control and camera sections. Seed and jobs stay at their
    /// defaults for the caller to assign.
    train::TrainConfig train_config() const;

    /// Architecture matching this camera and chain.
    nn::ModelConfig model_config(nn::Variant variant) const;

    /// Rollout setup for closed-loop evaluation. Jobs and episode count are
    /// passed to the evaluation entry points separately.
    eval::RolloutContext rollout_context() const;
};

/// Shipped defaults: the seven-joint arm over the desk workspace.
AppConfig defaults();

/// Parses config text. `origin` names the source in diagnostics
/// (path or "environment"). Unknown keys, duplicate keys, malformed values,
/// and out-of-range values all throw ConfigError with a line reference.
AppConfig parse(const std::string& text, const std::string& origin);

/// Reads the file, then applies NFVS_<SECTION>_<KEY> environment overrides.
AppConfig load(const std::string& path);

/// Writes the default config with every key present. parse(load(...)) of
/// the result reproduces defaults() exactly.
void write_default(const std::string& path);

/// One line per key: name, default, range, and description. Embedded in the
/// command-line help so every key is discoverable there.
std::string help_text();

}  // namespace nfvs::cfg
