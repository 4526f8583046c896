#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "nfvs/autodiff.hpp"
#include "nfvs/rng.hpp"
#include "nfvs/tensor.hpp"

namespace nfvs::nn {

enum class Variant { Perception, EndToEnd };

/// Architecture hyperparameters. The layer count, strides, and bottleneck
/// width are fixed; resolution, channel counts, feature width, and output
/// scales are configurable. Both variants share the encoder and decoder
/// shapes; they differ only in what the head consumes and emits.
struct ModelConfig {
    int width = 64;
    int height = 64;
    int channels = 3;
    int bottleneck = 64;
    int head_hidden = 64;
    int feature_size = 8;        // perception head width, two coordinates per point
    int dof = 7;                 // end-to-end only: joints appended to the latent
    double alpha = 1.5;          // perception head output scale
    double command_scale = 1.5;  // end-to-end head output scale (command clamp)
    Variant variant = Variant::Perception;

    /// Throws ConfigError unless the resolution survives four stride-2
    /// halvings that the decoder can mirror exactly (each stage either
    /// halves an even extent or fixes a 1-pixel one).
    void validate() const;

    int head_input() const { return bottleneck + (variant == Variant::EndToEnd ? dof : 0); }
    int head_output() const { return variant == Variant::EndToEnd ? dof : feature_size; }
    double head_scale() const { return variant == Variant::EndToEnd ? command_scale : alpha; }

    /// Activation-map extents after zero, one, ... four encoder stages.
    static std::array<int, 5> stage_sizes(int extent);
};

/// Shape and initialization metadata for one named weight tensor.
struct TensorSpec {
    std::string name;
    std::array<int, 4> dims{1, 1, 1, 1};
    int rank = 1;
    int fan_in = 0;  // 0 for biases, which initialize to zero
};

/// Fixed tensor order shared by initialization, serialization, graph
/// binding, and the optimizer.
enum TensorIndex {
    kEnc1W, kEnc1B, kEnc2W, kEnc2B, kEnc3W, kEnc3B, kEnc4W, kEnc4B,
    kBottleneckW, kBottleneckB,
    kDecFcW, kDecFcB,
    kDec1W, kDec1B, kDec2W, kDec2B, kDec3W, kDec3B, kDec4W, kDec4B,
    kHead1W, kHead1B, kHead2W, kHead2B, kHead3W, kHead3B, kHeadOutW, kHeadOutB,
    kTensorCount
};

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg);

/// Hash of the variant, input dims, and every tensor name and shape. Stored
/// in weights files so a file cannot be loaded into a different architecture.
std::uint64_t architecture_fingerprint(const ModelConfig& cfg);

template <typename T>
struct ModelWeights {
    ModelConfig config;
    std::vector<Tensor<T>> tensors;  // order matches tensor_specs(config)
    std::uint64_t fingerprint = 0;
};

/// Fresh weights with uniform fan-in scaled values, U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)) per layer, biases zero. Deterministic in the seed.
template <typename T>
ModelWeights<T> init_weights(const ModelConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
ModelWeights<To> cast_weights(const ModelWeights<From>& w);

// Graph construction. bind() aliases every weight tensor into the graph;
// the returned node pointers are valid for the lifetime of that graph.

template <typename T>
struct BoundModel {
    const ModelConfig* config = nullptr;
    std::array<autodiff::Var<T>*, kTensorCount> p{};
};

template <typename T>
BoundModel<T> bind(autodiff::Graph<T>& g, const ModelWeights<T>& w, bool trainable);

template <typename T>
autodiff::Var<T>* encode_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                               autodiff::Var<T>* image);
template <typename T>
autodiff::Var<T>* decode_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                               autodiff::Var<T>* latent);
template <typename T>
autodiff::Var<T>* head_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                             autodiff::Var<T>* latent);
template <typename T>
autodiff::Var<T>* e2e_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                            autodiff::Var<T>* image, autodiff::Var<T>* q);

// Convenience single-input forward passes (no gradients).

template <typename T>
Tensor<T> encode(const Tensor<T>& image, const ModelWeights<T>& w);
template <typename T>
Tensor<T> decode(const Tensor<T>& latent, const ModelWeights<T>& w);
template <typename T>
Tensor<T> head(const Tensor<T>& latent, const ModelWeights<T>& w);
template <typename T>
Tensor<T> e2e_forward(const Tensor<T>& image, const Tensor<T>& q, const ModelWeights<T>& w);

/// Training-time input corruption: i' = clamp(c * (i - 0.5) + 0.5 + b
/// + gaussian(0, stddev)) with contrast factor c = 1 + delta and brightness
/// shift b drawn uniformly from the configured ranges. Contrast is stored
/// as a delta so the all-zero config is exactly the identity.
struct AugmentConfig {
    double noise_stddev = 0.02;
    double brightness_min = -0.1;
    double brightness_max = 0.1;
    double contrast_min = -0.1;
    double contrast_max = 0.1;

    void validate() const;
    bool identity() const;
};

template <typename T>
Tensor<T> augment(const Tensor<T>& image, const AugmentConfig& cfg, Rng rng);

// Adam optimizer over the full tensor list. Gradients are kept in flat
// buffers parallel to the weight tensors.

template <typename T>
using GradBuffers = std::vector<std::vector<T>>;

template <typename T>
GradBuffers<T> grad_buffers(const ModelWeights<T>& w);

template <typename T>
void grad_zero(GradBuffers<T>& g);

/// g += bound-model gradients accumulated by a graph backward pass.
template <typename T>
void grad_add(GradBuffers<T>& g, const BoundModel<T>& m);

template <typename T>
struct AdamState {
    GradBuffers<T> m, v;
    long step = 0;
};

template <typename T>
AdamState<T> adam_init(const ModelWeights<T>& w);

template <typename T>
void adam_step(ModelWeights<T>& w, const GradBuffers<T>& grads, AdamState<T>& state,
               T lr, T beta1 = T(0.9), T beta2 = T(0.999), T eps = T(1e-8));

// Weights file: magic "NFVW", version, architecture fingerprint, then per
// tensor the name, shape, and 32-bit little-endian float payload.

void save_weights(const ModelWeights<float>& w, const std::string& path);
ModelWeights<float> load_weights(const std::string& path, const ModelConfig& expected);

}  // namespace nfvs::nn
