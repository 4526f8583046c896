#include "nfvs/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "nfvs/errors.hpp"
#include "nfvs/kernels.hpp"

namespace nfvs::nn {

namespace {

// Encoder channel progression; the decoder mirrors it back down to the
// image channel count.
constexpr int kChannels[4] = {8, 16, 32, 64};

template <typename T>
Tensor<T> make_tensor(const std::array<int, 4>& dims, int rank) {
    Tensor<T> t;
    t.rank = rank;
    t.shape = dims;
    std::size_t n = 1;
    for (int i = 0; i < rank; ++i) n *= static_cast<std::size_t>(dims[static_cast<std::size_t>(i)]);
    t.data.assign(n, T(0));
    return t;
}

bool stage_doubles(const std::array<int, 5>& s, int stage) {
    return s[static_cast<std::size_t>(stage - 1)] == 2 * s[static_cast<std::size_t>(stage)];
}

}  // namespace

std::array<int, 5> ModelConfig::stage_sizes(int extent) {
    std::array<int, 5> s{};
    s[0] = extent;
    for (int i = 1; i <= 4; ++i) s[static_cast<std::size_t>(i)] = (s[static_cast<std::size_t>(i - 1)] - 1) / 2 + 1;
    return s;
}

void ModelConfig::validate() const {
    if (channels < 1) throw ConfigError("model channels must be positive");
    if (bottleneck != 64) throw ConfigError("bottleneck width is fixed at 64");
    if (head_hidden < 1) throw ConfigError("head hidden width must be positive");
    if (feature_size < 2 || feature_size % 2 != 0)
        throw ConfigError("feature size must be a positive even count");
    if (dof < 1) throw ConfigError("model dof must be positive");
    if (!(alpha > 0.0)) throw ConfigError("head scale alpha must be positive");
    if (!(command_scale > 0.0)) throw ConfigError("command scale must be positive");
    if (width < 2 || height < 2) throw ConfigError("image extent must be at least 2");
    const auto sh = stage_sizes(height);
    const auto sw = stage_sizes(width);
    for (int i = 1; i <= 4; ++i) {
        const int ph = sh[static_cast<std::size_t>(i - 1)], pw = sw[static_cast<std::size_t>(i - 1)];
        const int nh = sh[static_cast<std::size_t>(i)], nw = sw[static_cast<std::size_t>(i)];
        const bool ok_h = ph == 2 * nh || (ph == 1 && nh == 1);
        const bool ok_w = pw == 2 * nw || (pw == 1 && nw == 1);
        if (!ok_h || !ok_w)
            throw ConfigError("image extent " + std::to_string(width) + "x" + std::to_string(height)
                              + " cannot be mirrored by the decoder (odd intermediate map)");
        if ((ph == 2 * nh) != (pw == 2 * nw))
            throw ConfigError("height and width must halve at the same encoder stages");
    }
}

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg) {
    const auto sh = ModelConfig::stage_sizes(cfg.height);
    const auto sw = ModelConfig::stage_sizes(cfg.width);
    const int flat = sh[4] * sw[4] * kChannels[3];

    std::vector<TensorSpec> specs(kTensorCount);
    auto conv = [&](TensorIndex wi, const char* base, int ci, int co) {
        specs[wi] = {std::string(base) + "_w", {3, 3, ci, co}, 4, 9 * ci};
        specs[wi + 1] = {std::string(base) + "_b", {co, 1, 1, 1}, 1, 0};
    };
    auto fc = [&](TensorIndex wi, const char* base, int nin, int nout) {
        specs[wi] = {std::string(base) + "_w", {nin, nout, 1, 1}, 2, nin};
        specs[wi + 1] = {std::string(base) + "_b", {nout, 1, 1, 1}, 1, 0};
    };

    conv(kEnc1W, "enc1", cfg.channels, kChannels[0]);
    conv(kEnc2W, "enc2", kChannels[0], kChannels[1]);
    conv(kEnc3W, "enc3", kChannels[1], kChannels[2]);
    conv(kEnc4W, "enc4", kChannels[2], kChannels[3]);
    fc(kBottleneckW, "bottleneck", flat, cfg.bottleneck);
    fc(kDecFcW, "dec_fc", cfg.bottleneck, flat);
    conv(kDec1W, "dec1", kChannels[3], kChannels[2]);
    conv(kDec2W, "dec2", kChannels[2], kChannels[1]);
    conv(kDec3W, "dec3", kChannels[1], kChannels[0]);
    conv(kDec4W, "dec4", kChannels[0], cfg.channels);
    fc(kHead1W, "head1", cfg.head_input(), cfg.head_hidden);
    fc(kHead2W, "head2", cfg.head_hidden, cfg.head_hidden);
    fc(kHead3W, "head3", cfg.head_hidden, cfg.head_hidden);
    fc(kHeadOutW, "head_out", cfg.head_hidden, cfg.head_output());
    return specs;
}

std::uint64_t architecture_fingerprint(const ModelConfig& cfg) {
    std::uint64_t h = Rng::hash("nfvw-architecture");
    h = Rng::mix(h ^ (cfg.variant == Variant::EndToEnd ? 2u : 1u));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(cfg.height));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(cfg.width));
    h = Rng::mix(h ^ static_cast<std::uint64_t>(cfg.channels));
    for (const TensorSpec& s : tensor_specs(cfg)) {
        h = Rng::mix(h ^ Rng::hash(s.name));
        h = Rng::mix(h ^ static_cast<std::uint64_t>(s.rank));
        for (int i = 0; i < s.rank; ++i)
            h = Rng::mix(h ^ static_cast<std::uint64_t>(s.dims[static_cast<std::size_t>(i)]));
    }
    return h;
}

template <typename T>
ModelWeights<T> init_weights(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ModelWeights<T> w;
    w.config = cfg;
    w.fingerprint = architecture_fingerprint(cfg);
    const Rng base(seed, Rng::hash("model-init"));
    for (const TensorSpec& spec : tensor_specs(cfg)) {
        Tensor<T> t = make_tensor<T>(spec.dims, spec.rank);
        if (spec.fan_in > 0) {
            Rng r = base.split(spec.name);
            const double s = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (T& v : t.data) v = static_cast<T>(r.uniform(-s, s));
        }
        w.tensors.push_back(std::move(t));
    }
    return w;
}

template <typename To, typename From>
ModelWeights<To> cast_weights(const ModelWeights<From>& w) {
    ModelWeights<To> out;
    out.config = w.config;
    out.fingerprint = w.fingerprint;
    out.tensors.reserve(w.tensors.size());
    for (const Tensor<From>& t : w.tensors) {
        Tensor<To> c = make_tensor<To>(t.shape, t.rank);
        for (std::size_t i = 0; i < t.data.size(); ++i) c.data[i] = static_cast<To>(t.data[i]);
        out.tensors.push_back(std::move(c));
    }
    return out;
}

template <typename T>
BoundModel<T> bind(autodiff::Graph<T>& g, const ModelWeights<T>& w, bool trainable) {
    if (w.tensors.size() != kTensorCount)
        throw ShapeMismatch("model weights do not hold the expected tensor list");
    BoundModel<T> m;
    m.config = &w.config;
    for (int i = 0; i < kTensorCount; ++i) {
        const Tensor<T>& t = w.tensors[static_cast<std::size_t>(i)];
        m.p[static_cast<std::size_t>(i)] = g.alias(t.data.data(), t.shape, t.rank, trainable);
    }
    return m;
}

template <typename T>
autodiff::Var<T>* encode_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                               autodiff::Var<T>* image) {
    const ModelConfig& cfg = *m.config;
    if (image->rank != 3 || image->dim(0) != cfg.height || image->dim(1) != cfg.width ||
        image->dim(2) != cfg.channels)
        throw ShapeMismatch("image dims do not match the model architecture");
    auto* x = image;
    for (int stage = 0; stage < 4; ++stage) {
        x = g.conv2d(x, m.p[static_cast<std::size_t>(kEnc1W + 2 * stage)],
                     m.p[static_cast<std::size_t>(kEnc1B + 2 * stage)], 2, 1);
        x = g.relu(x);
    }
    return g.linear(x, m.p[kBottleneckW], m.p[kBottleneckB]);
}

template <typename T>
autodiff::Var<T>* decode_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                               autodiff::Var<T>* latent) {
    const ModelConfig& cfg = *m.config;
    if (latent->numel != cfg.bottleneck)
        throw ShapeMismatch("latent width does not match the bottleneck");
    const auto sh = ModelConfig::stage_sizes(cfg.height);
    const auto sw = ModelConfig::stage_sizes(cfg.width);
    auto* x = g.linear(latent, m.p[kDecFcW], m.p[kDecFcB]);
    x = g.reshape(x, {sh[4], sw[4], kChannels[3]});
    for (int stage = 0; stage < 4; ++stage) {
        // Mirror the encoder: upsample exactly where the matching encoder
        // stage halved the map.
        if (stage_doubles(sh, 4 - stage)) x = g.upsample2x(x);
        x = g.conv2d(x, m.p[static_cast<std::size_t>(kDec1W + 2 * stage)],
                     m.p[static_cast<std::size_t>(kDec1B + 2 * stage)], 1, 1);
        if (stage < 3) x = g.relu(x);
    }
    return g.clamp01(x);
}

template <typename T>
autodiff::Var<T>* head_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                             autodiff::Var<T>* latent) {
    const ModelConfig& cfg = *m.config;
    if (latent->numel != cfg.head_input())
        throw ShapeMismatch("head input width does not match the architecture");
    auto* x = g.relu(g.linear(latent, m.p[kHead1W], m.p[kHead1B]));
    x = g.relu(g.linear(x, m.p[kHead2W], m.p[kHead2B]));
    x = g.relu(g.linear(x, m.p[kHead3W], m.p[kHead3B]));
    x = g.linear(x, m.p[kHeadOutW], m.p[kHeadOutB]);
    return g.tanh_scale(x, static_cast<T>(cfg.head_scale()));
}

template <typename T>
autodiff::Var<T>* e2e_graph(autodiff::Graph<T>& g, const BoundModel<T>& m,
                            autodiff::Var<T>* image, autodiff::Var<T>* q) {
    const ModelConfig& cfg = *m.config;
    if (cfg.variant != Variant::EndToEnd)
        throw ShapeMismatch("e2e forward requires an end-to-end architecture");
    if (q->numel != cfg.dof) throw ShapeMismatch("joint vector width does not match dof");
    auto* lat = encode_graph(g, m, image);
    return head_graph(g, m, g.concat(lat, q));
}

namespace {

template <typename T>
Tensor<T> run_single(const ModelWeights<T>& w,
                     autodiff::Var<T>* (*build)(autodiff::Graph<T>&, const BoundModel<T>&,
                                                autodiff::Var<T>*),
                     const Tensor<T>& input) {
    autodiff::Graph<T> g;
    BoundModel<T> m = bind(g, w, false);
    auto* in = g.alias(input.data.data(), input.shape, input.rank, false);
    auto* out = build(g, m, in);
    Tensor<T> result = make_tensor<T>(out->shape, out->rank);
    std::copy(out->x, out->x + out->numel, result.data.begin());
    return result;
}

}  // namespace

template <typename T>
Tensor<T> encode(const Tensor<T>& image, const ModelWeights<T>& w) {
    return run_single(w, &encode_graph<T>, image);
}

template <typename T>
Tensor<T> decode(const Tensor<T>& latent, const ModelWeights<T>& w) {
    return run_single(w, &decode_graph<T>, latent);
}

template <typename T>
Tensor<T> head(const Tensor<T>& latent, const ModelWeights<T>& w) {
    return run_single(w, &head_graph<T>, latent);
}

template <typename T>
Tensor<T> e2e_forward(const Tensor<T>& image, const Tensor<T>& q, const ModelWeights<T>& w) {
    autodiff::Graph<T> g;
    BoundModel<T> m = bind(g, w, false);
    auto* im = g.alias(image.data.data(), image.shape, image.rank, false);
    auto* jq = g.alias(q.data.data(), q.shape, q.rank, false);
    auto* out = e2e_graph(g, m, im, jq);
    Tensor<T> result = make_tensor<T>(out->shape, out->rank);
    std::copy(out->x, out->x + out->numel, result.data.begin());
    return result;
}

void AugmentConfig::validate() const {
    if (!(noise_stddev >= 0.0)) throw ConfigError("augment noise stddev must be >= 0");
    if (brightness_min > brightness_max) throw ConfigError("augment brightness range is reversed");
    if (contrast_min > contrast_max) throw ConfigError("augment contrast range is reversed");
}

bool AugmentConfig::identity() const {
    return noise_stddev == 0.0 && brightness_min == 0.0 && brightness_max == 0.0 &&
           contrast_min == 0.0 && contrast_max == 0.0;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& image, const AugmentConfig& cfg, Rng rng) {
    cfg.validate();
    Tensor<T> out = image;
    if (cfg.identity()) return out;
    // Contrast is drawn as a delta around 1 so an all-zero config is the
    // identity. Draw order: contrast, brightness, then per-pixel noise.
    const T contrast = static_cast<T>(1.0 + rng.uniform(cfg.contrast_min, cfg.contrast_max));
    const T brightness = static_cast<T>(rng.uniform(cfg.brightness_min, cfg.brightness_max));
    for (T& v : out.data) {
        T x = contrast * (v - T(0.5)) + T(0.5) + brightness;
        if (cfg.noise_stddev > 0.0)
            x += static_cast<T>(cfg.noise_stddev * rng.normal());
        v = std::min(T(1), std::max(T(0), x));
    }
    return out;
}

template <typename T>
GradBuffers<T> grad_buffers(const ModelWeights<T>& w) {
    GradBuffers<T> g;
    g.reserve(w.tensors.size());
    for (const Tensor<T>& t : w.tensors) g.emplace_back(t.data.size(), T(0));
    return g;
}

template <typename T>
void grad_zero(GradBuffers<T>& g) {
    for (auto& buf : g) std::fill(buf.begin(), buf.end(), T(0));
}

template <typename T>
void grad_add(GradBuffers<T>& g, const BoundModel<T>& m) {
    const auto& ops = kernels::active<T>();
    for (int i = 0; i < kTensorCount; ++i) {
        const auto* node = m.p[static_cast<std::size_t>(i)];
        ops.axpy(T(1), node->g.data(), node->numel, g[static_cast<std::size_t>(i)].data());
    }
}

template <typename T>
AdamState<T> adam_init(const ModelWeights<T>& w) {
    AdamState<T> st;
    st.m = grad_buffers(w);
    st.v = grad_buffers(w);
    return st;
}

template <typename T>
void adam_step(ModelWeights<T>& w, const GradBuffers<T>& grads, AdamState<T>& state,
               T lr, T beta1, T beta2, T eps) {
    const auto& ops = kernels::active<T>();
    state.step += 1;
    const T bias1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1), state.step));
    const T bias2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2), state.step));
    for (std::size_t i = 0; i < w.tensors.size(); ++i) {
        Tensor<T>& t = w.tensors[i];
        ops.adam_step(t.numel(), t.data.data(), grads[i].data(), state.m[i].data(),
                      state.v[i].data(), lr, beta1, beta2, eps, bias1, bias2);
    }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "weights serialization writes host-order scalars and requires little endian");

constexpr char kWeightsMagic[4] = {'N', 'F', 'V', 'W'};
constexpr std::uint32_t kWeightsVersion = 1;

template <typename T>
void put(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw IoError(std::string("weights file truncated while reading ") + what);
    return value;
}

}  // namespace

void save_weights(const ModelWeights<float>& w, const std::string& path) {
    const auto specs = tensor_specs(w.config);
    if (w.tensors.size() != specs.size())
        throw IoError("model weights do not hold the expected tensor list");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open weights file for writing: " + path);
    out.write(kWeightsMagic, 4);
    put(out, kWeightsVersion);
    put(out, w.fingerprint);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const TensorSpec& spec = specs[i];
        const Tensor<float>& t = w.tensors[i];
        put(out, static_cast<std::uint32_t>(spec.name.size()));
        out.write(spec.name.data(), static_cast<std::streamsize>(spec.name.size()));
        put(out, static_cast<std::uint32_t>(t.rank));
        for (int d = 0; d < t.rank; ++d)
            put(out, static_cast<std::uint32_t>(t.shape[static_cast<std::size_t>(d)]));
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 4));
    }
    if (!out) throw IoError("failed while writing weights file: " + path);
}

ModelWeights<float> load_weights(const std::string& path, const ModelConfig& expected) {
    expected.validate();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open weights file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kWeightsMagic, 4) != 0)
        throw IoError("not a weights file (bad magic): " + path);
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kWeightsVersion)
        throw IoError("unsupported weights file version " + std::to_string(version));
    const auto fingerprint = get<std::uint64_t>(in, "fingerprint");
    const std::uint64_t want = architecture_fingerprint(expected);
    if (fingerprint != want)
        throw IoError("weights fingerprint does not match the expected architecture");

    ModelWeights<float> w;
    w.config = expected;
    w.fingerprint = fingerprint;
    for (const TensorSpec& spec : tensor_specs(expected)) {
        const auto name_len = get<std::uint32_t>(in, "tensor name length");
        std::string name(name_len, '\0');
        in.read(name.data(), static_cast<std::streamsize>(name_len));
        if (!in) throw IoError("weights file truncated while reading tensor name");
        if (name != spec.name)
            throw IoError("weights tensor '" + name + "' does not match expected '" + spec.name + "'");
        const auto rank = get<std::uint32_t>(in, "tensor rank");
        if (rank != static_cast<std::uint32_t>(spec.rank))
            throw IoError("weights tensor '" + name + "' has unexpected rank");
        std::array<int, 4> dims{1, 1, 1, 1};
        for (std::uint32_t d = 0; d < rank; ++d) {
            dims[d] = static_cast<int>(get<std::uint32_t>(in, "tensor dimension"));
            if (dims[d] != spec.dims[d])
                throw IoError("weights tensor '" + name + "' has unexpected shape");
        }
        Tensor<float> t = make_tensor<float>(dims, spec.rank);
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * 4));
        if (!in) throw IoError("weights file truncated while reading tensor payload");
        w.tensors.push_back(std::move(t));
    }
    if (in.peek() != std::ifstream::traits_type::eof())
        throw IoError("weights file has trailing bytes after the tensor list");
    return w;
}

#define NFVS_INSTANTIATE(T)                                                                   \
    template ModelWeights<T> init_weights<T>(const ModelConfig&, std::uint64_t);              \
    template BoundModel<T> bind<T>(autodiff::Graph<T>&, const ModelWeights<T>&, bool);        \
    template autodiff::Var<T>* encode_graph<T>(autodiff::Graph<T>&, const BoundModel<T>&,     \
                                               autodiff::Var<T>*);                            \
    template autodiff::Var<T>* decode_graph<T>(autodiff::Graph<T>&, const BoundModel<T>&,     \
                                               autodiff::Var<T>*);                            \
    template autodiff::Var<T>* head_graph<T>(autodiff::Graph<T>&, const BoundModel<T>&,       \
                                             autodiff::Var<T>*);                              \
    template autodiff::Var<T>* e2e_graph<T>(autodiff::Graph<T>&, const BoundModel<T>&,        \
                                            autodiff::Var<T>*, autodiff::Var<T>*);            \
    template Tensor<T> encode<T>(const Tensor<T>&, const ModelWeights<T>&);                   \
    template Tensor<T> decode<T>(const Tensor<T>&, const ModelWeights<T>&);                   \
    template Tensor<T> head<T>(const Tensor<T>&, const ModelWeights<T>&);                     \
    template Tensor<T> e2e_forward<T>(const Tensor<T>&, const Tensor<T>&,                     \
                                      const ModelWeights<T>&);                                \
    template Tensor<T> augment<T>(const Tensor<T>&, const AugmentConfig&, Rng);               \
    template GradBuffers<T> grad_buffers<T>(const ModelWeights<T>&);                          \
    template void grad_zero<T>(GradBuffers<T>&);                                              \
    template void grad_add<T>(GradBuffers<T>&, const BoundModel<T>&);                         \
    template AdamState<T> adam_init<T>(const ModelWeights<T>&);                               \
    template void adam_step<T>(ModelWeights<T>&, const GradBuffers<T>&, AdamState<T>&, T, T,  \
                               T, T);

NFVS_INSTANTIATE(float)
NFVS_INSTANTIATE(double)
#undef NFVS_INSTANTIATE

template ModelWeights<float> cast_weights<float, double>(const ModelWeights<double>&);
template ModelWeights<double> cast_weights<double, float>(const ModelWeights<float>&);

}  // namespace nfvs::nn
