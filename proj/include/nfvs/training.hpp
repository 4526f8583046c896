#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nfvs/datagen.hpp"
#include "nfvs/dataset.hpp"
#include "nfvs/geometry.hpp"
#include "nfvs/model.hpp"

namespace nfvs::train {

/// Weights of the four composite-loss components.
struct LossWeights {
    double ci = 1.0;
    double ae = 1.0;
    double sc = 1.0;
    double r = 1.0;

    void validate() const;
};

/// Per-component loss values. Every component is a per-coordinate mean:
/// control imitation over samples x joint count, state consistency over
/// pairs x feature width, auto-encoding over samples x pixels, and the
/// visibility regularizer over samples x feature width.
struct LossValues {
    double ci = 0.0;
    double ae = 0.0;
    double sc = 0.0;
    double r = 0.0;

    double total(const LossWeights& w) const {
        return w.ci * ci + w.ae * ae + w.sc * sc + w.r * r;
    }
};

struct TrainConfig {
    int epochs = 100;
    double learning_rate = 1e-4;
    int batch_size = 32;       // frames per batch; two frames per pair
    double lambda = 1.0;       // servo gain mirrored from the controller
    double sigma = 0.02;       // damping mirrored from the controller
    double alpha = 1.5;        // perception head scale
    double command_clamp = 1.5;  // end-to-end head scale
    nn::AugmentConfig augment;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // epochs between periodic checkpoint callbacks
    bool detach_interaction = false;  // ablation: stop gradients through L(m)
    int jobs = 1;
    Mat6 velocity_twist = Mat6::Identity();  // camera/effector twist transform V

    void validate() const;
};

/// One row of the loss-curve log. Row 0 holds the untrained model evaluated
/// on both partitions; training rows hold per-epoch means.
struct EpochRow {
    int epoch = 0;
    LossValues train;
    LossValues val;
};

struct TrainResult {
    nn::ModelWeights<float> best;   // weights at the best validation total
    int best_epoch = 0;
    std::vector<EpochRow> curves;
};

/// Invoked after every epoch that produced a new best validation loss and,
/// when checkpoint_every > 0, every that-many epochs.
using CheckpointFn =
    std::function<void(int epoch, const nn::ModelWeights<float>& w, bool is_best)>;

/// Trains the perception model on the dataset's train partition, validating
/// on clean images each epoch. Throws NonFiniteLoss with the offending batch
/// id if a batch stops being finite.
TrainResult train(const Dataset& ds, const TrainConfig& cfg, const LossWeights& lw,
                  const CheckpointFn& checkpoint = {});

/// Behavior-cloning baseline: L1 between predicted and recorded commands,
/// plus an optional auto-encoding term (weight 0 by default).
TrainResult train_e2e(const Dataset& ds, const TrainConfig& cfg, double ae_weight = 0.0,
                      const CheckpointFn& checkpoint = {});

/// Composite loss with gradients over one batch of pairs. Augmentation is
/// not applied here; callers pass the images they want evaluated. With a
/// non-null grads target the weighted total is differentiated into it.
/// Instantiated for float and double; the double form backs the
/// finite-difference gate.
template <typename T>
LossValues pair_batch_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                             const nn::ModelWeights<T>& w, const TrainConfig& cfg,
                             const LossWeights& lw, nn::GradBuffers<T>* grads);

/// End-to-end baseline loss over one batch: per-coordinate L1 cloning mean
/// in .ci, optional auto-encoding mean in .ae.
template <typename T>
LossValues e2e_batch_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                            const nn::ModelWeights<T>& w, const TrainConfig& cfg,
                            double ae_weight, nn::GradBuffers<T>* grads);

// Single-component evaluations on clean images (no gradients).
double loss_control_imitation(const Dataset& ds, const std::vector<PairRef>& pairs,
                              const nn::ModelWeights<float>& w, const TrainConfig& cfg);
double loss_state_consistency(const Dataset& ds, const std::vector<PairRef>& pairs,
                              const nn::ModelWeights<float>& w, const TrainConfig& cfg);
double loss_autoencode(const Dataset& ds, const std::vector<PairRef>& pairs,
                       const nn::ModelWeights<float>& w, const TrainConfig& cfg);
double loss_regularizer(const Dataset& ds, const std::vector<PairRef>& pairs,
                        const nn::ModelWeights<float>& w, const TrainConfig& cfg);

/// Features supplied externally per frame (and per demo reference) instead
/// of a network. Runs the identical residual pipeline in double precision;
/// the oracle-injection floor tests live on top of this.
using FrameFeatureFn = std::function<Eigen::VectorXd(int demo_index, int k)>;
using RefFeatureFn = std::function<Eigen::VectorXd(int demo_index)>;

LossValues injected_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                           const FrameFeatureFn& frame_features,
                           const RefFeatureFn& ref_features, const TrainConfig& cfg);

/// Loss-curve log: one CSV row per epoch with per-component train/val
/// columns. Formatting is fixed so reruns are byte-identical.
void write_loss_curves(const std::vector<EpochRow>& curves, const std::string& path);

}  // namespace nfvs::train
