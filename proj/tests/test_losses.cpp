#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "fixtures.hpp"
#include "nfvs/datagen.hpp"
#include "nfvs/errors.hpp"
#include "nfvs/kinematics.hpp"
#include "nfvs/model.hpp"
#include "nfvs/rng.hpp"
#include "nfvs/training.hpp"
#include "nfvs/vs_control.hpp"

using namespace nfvs;
using train::LossValues;
using train::LossWeights;
using train::TrainConfig;

namespace {

// Hand-built two-demo dataset (one train, one validation) with fixed
// records, constant images and a generic full-rank Jacobian. Small enough
// that every loss term has a pencil-and-paper value.
Dataset toy_dataset(std::uint8_t image_value = 128, double qdot_scale = 1.0) {
    Dataset ds;
    ds.header.width = 8;
    ds.header.height = 8;
    ds.header.channels = 1;
    ds.header.dof = 3;
    ds.header.feature_size = 8;
    ds.header.period = 1.0 / 30.0;

    Eigen::Matrix<float, 6, Eigen::Dynamic> jac(6, 3);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 3; ++c)
            jac(r, c) = static_cast<float>(std::sin(1.0 + r + 2 * c) + (r == c ? 1.0 : 0.0));

    for (int demo = 0; demo < 2; ++demo) {
        Demo d;
        d.meta.demo_id = static_cast<std::uint32_t>(demo);
        d.meta.scene_seed = 7 + static_cast<std::uint64_t>(demo);
        d.meta.success = true;
        d.meta.split = static_cast<std::uint8_t>(demo);
        d.meta.target_depths = Eigen::Vector4f(0.35f, 0.4f, 0.45f, 0.5f);
        d.meta.reference_image.assign(64, image_value);
        for (int k = 0; k < 3; ++k) {
            SampleRecord rec;
            rec.k = static_cast<std::uint32_t>(k);
            rec.q = Eigen::Vector3f(0.1f * float(k), -0.2f, 0.3f);
            rec.qdot =
                Eigen::Vector3f(0.1f, -0.2f, 0.05f * float(k + 1)) * float(qdot_scale);
            rec.jacobian = jac;
            rec.image.assign(64, image_value);
            d.records.push_back(std::move(rec));
        }
        ds.demos.push_back(std::move(d));
    }
    ds.header.demo_count = 2;
    ds.header.record_count = 6;
    ds.validate();
    return ds;
}

nn::ModelConfig toy_model_config(const Dataset& ds, nn::Variant variant) {
    nn::ModelConfig mc;
    mc.width = static_cast<int>(ds.header.width);
    mc.height = static_cast<int>(ds.header.height);
    mc.channels = static_cast<int>(ds.header.channels);
    mc.feature_size = static_cast<int>(ds.header.feature_size);
    mc.dof = static_cast<int>(ds.header.dof);
    mc.variant = variant;
    mc.validate();
    return mc;
}

TrainConfig toy_train_config() {
    TrainConfig cfg;
    cfg.velocity_twist = twist_transform(fixtures::desk_mount());
    return cfg;
}

std::vector<PairRef> split_pairs(const Dataset& ds, std::uint8_t split) {
    std::vector<PairRef> pairs;
    for (std::size_t d = 0; d < ds.demos.size(); ++d) {
        if (ds.demos[d].meta.split != split) continue;
        for (int k = 0; k + 1 < static_cast<int>(ds.demos[d].records.size()); ++k)
            pairs.push_back({static_cast<int>(d), k});
    }
    return pairs;
}

template <typename T>
void zero_all(nn::ModelWeights<T>& w) {
    for (auto& t : w.tensors) std::fill(t.data.begin(), t.data.end(), T(0));
}

// Central-difference check of one weight. The loss is piecewise smooth; a
// probe whose +-eps interval straddles a corner of an L1 or hinge term sees
// a corrupted secant, so on mismatch the step is shrunk (corner influence
// scales with the step) while the tolerance stays fixed. A wrong analytic
// gradient fails at every step size.
template <typename EvalFn>
bool fd_matches(double ad, const EvalFn& eval_at, double base_eps) {
    for (double eps = base_eps; eps >= base_eps / 64.0; eps /= 8.0) {
        const double fd = (eval_at(eps) - eval_at(-eps)) / (2 * eps);
        if (std::abs(ad - fd) <= 1e-3 * std::max({std::abs(ad), std::abs(fd), 1e-6}))
            return true;
    }
    return false;
}

double grad_rel_diff(const nn::GradBuffers<double>& a, const nn::GradBuffers<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < a.size(); ++t)
        for (std::size_t i = 0; i < a[t].size(); ++i) {
            num = std::max(num, std::abs(a[t][i] - b[t][i]));
            den = std::max(den, std::abs(a[t][i]));
        }
    return num / std::max(den, 1e-30);
}

// Quarter-resolution oracle demos, shared across the file. Feature dynamics
// are resolution independent, so these behave like full-size datasets.
DatagenConfig quarter_cfg() {
    DatagenConfig cfg;
    cfg.camera.width = 32;
    cfg.camera.height = 32;
    cfg.camera.fx = 27.7;
    cfg.camera.fy = 27.7;
    cfg.camera.cx = 16.0;
    cfg.camera.cy = 16.0;
    cfg.eye_in_hand = fixtures::desk_mount();
    cfg.ready_posture = fixtures::ready_posture();
    return cfg;
}

const Dataset& oracle_dataset() {
    static const Dataset ds =
        build_dataset(fixtures::seven_joint_chain(), quarter_cfg(), 4, 31, 0.5);
    return ds;
}

// Eighth-resolution variant for the finite-difference checks, where the
// whole pipeline runs in double precision.
DatagenConfig eighth_cfg() {
    DatagenConfig cfg = quarter_cfg();
    cfg.camera.width = 8;
    cfg.camera.height = 8;
    cfg.camera.fx = 6.925;
    cfg.camera.fy = 6.925;
    cfg.camera.cx = 4.0;
    cfg.camera.cy = 4.0;
    return cfg;
}

const Dataset& fd_dataset() {
    static const Dataset ds =
        build_dataset(fixtures::seven_joint_chain(), eighth_cfg(), 2, 55, 0.5);
    return ds;
}

TrainConfig oracle_train_config(const DatagenConfig& dg) {
    TrainConfig cfg;
    cfg.lambda = dg.control.lambda;
    cfg.sigma = dg.control.sigma;
    cfg.command_clamp = dg.control.command_clamp;
    cfg.velocity_twist = twist_transform(dg.eye_in_hand);
    return cfg;
}

// Ground-truth features of the stored frame, recomputed from the scene seed
// and the recorded joint vector.
Eigen::VectorXd stored_frame_features(const Dataset& ds, const DatagenConfig& dg,
                                      int demo, int k) {
    static const KinematicChain chain = fixtures::seven_joint_chain();
    const Demo& d = ds.demos[static_cast<std::size_t>(demo)];
    const Scene scene = randomize_scene(d.meta.scene_seed, dg.sim);
    const VecX q = d.records[static_cast<std::size_t>(k)].q.cast<double>();
    const Pose cam = forward_kinematics(chain, q).compose(dg.eye_in_hand);
    return ground_truth_features(scene, cam, dg.camera).first;
}

Eigen::VectorXd stored_ref_features(const Dataset& ds, const DatagenConfig& dg, int demo) {
    const Demo& d = ds.demos[static_cast<std::size_t>(demo)];
    const Scene scene = randomize_scene(d.meta.scene_seed, dg.sim);
    const int phase = static_cast<int>(d.meta.demo_id % 2);
    return demo_reference(scene, dg, d.meta.scene_seed, phase).first;
}

// Randomized double weights whose biases sit well away from the activation
// kinks, so small finite-difference steps stay on one side of every corner.
nn::ModelWeights<double> fd_weights(const nn::ModelConfig& mc, std::uint64_t seed) {
    auto w = nn::init_weights<double>(mc, seed);
    Rng rng(seed, Rng::hash("fd-bias"));
    const auto specs = nn::tensor_specs(mc);
    for (std::size_t t = 0; t < w.tensors.size(); ++t) {
        if (specs[t].fan_in != 0) continue;
        for (auto& v : w.tensors[t].data) v = rng.uniform(0.05, 0.2);
    }
    // Keep the reconstruction safely inside the intensity clamp.
    for (auto& v : w.tensors[nn::kDec4B].data) v = 0.5;
    return w;
}

}  // namespace

TEST_CASE("zero weights give closed-form loss values") {
    const Dataset ds = toy_dataset(128);
    const TrainConfig cfg = toy_train_config();
    auto w = nn::init_weights<float>(toy_model_config(ds, nn::Variant::Perception), 1);
    zero_all(w);
    const auto pairs = split_pairs(ds, 0);
    const LossValues v = train::pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr);

    // All features and reconstructions are exactly zero, so the imitation
    // residual is the recorded command and the reconstruction error is the
    // image itself.
    double expect_ci = 0.0;
    for (const PairRef& pr : pairs)
        for (int off = 0; off < 2; ++off) {
            const auto& rec =
                ds.demos[std::size_t(pr.demo)].records[std::size_t(pr.k + off)];
            expect_ci += rec.qdot.cast<double>().cwiseAbs().sum();
        }
    expect_ci /= double(2 * pairs.size()) * 3.0;
    CHECK(v.ci == doctest::Approx(expect_ci).epsilon(1e-6));
    CHECK(v.ae == doctest::Approx(128.0 / 255.0).epsilon(1e-6));
    CHECK(v.r == 0.0);

    // Propagation error reduces to |T * Jhat(0) * qdot| per pair; check it
    // against the control-law matrices computed independently.
    const Mat6 vt = twist_transform(fixtures::desk_mount());
    double expect_sc = 0.0;
    for (const PairRef& pr : pairs) {
        const Demo& d = ds.demos[std::size_t(pr.demo)];
        const auto& rec = d.records[std::size_t(pr.k)];
        const MatX l = interaction_matrix(VecX::Zero(8), d.meta.target_depths.cast<double>());
        const MatX jhat = compose_jacobian(l, vt, rec.jacobian.cast<double>());
        expect_sc += (ds.header.period * jhat * rec.qdot.cast<double>()).cwiseAbs().sum();
    }
    expect_sc /= double(pairs.size()) * 8.0;
    CHECK(v.sc == doctest::Approx(expect_sc).epsilon(1e-5));
}

TEST_CASE("component evaluators match the batched values") {
    const Dataset ds = toy_dataset();
    const TrainConfig cfg = toy_train_config();
    const auto w = nn::init_weights<float>(toy_model_config(ds, nn::Variant::Perception), 3);
    const auto pairs = split_pairs(ds, 0);
    const LossValues v = train::pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr);
    CHECK(train::loss_control_imitation(ds, pairs, w, cfg) == v.ci);
    CHECK(train::loss_state_consistency(ds, pairs, w, cfg) == v.sc);
    CHECK(train::loss_autoencode(ds, pairs, w, cfg) == v.ae);
    CHECK(train::loss_regularizer(ds, pairs, w, cfg) == v.r);

    // Component values do not depend on the weighting.
    LossWeights skewed;
    skewed.ci = 0.25;
    skewed.ae = 2.0;
    skewed.sc = 3.0;
    skewed.r = 0.5;
    const LossValues u = train::pair_batch_losses<float>(ds, pairs, w, cfg, skewed, nullptr);
    CHECK(u.ci == v.ci);
    CHECK(u.ae == v.ae);
    CHECK(u.sc == v.sc);
    CHECK(u.r == v.r);
    CHECK(u.total(skewed) ==
          doctest::Approx(0.25 * v.ci + 2.0 * v.ae + 3.0 * v.sc + 0.5 * v.r).epsilon(1e-12));
}

TEST_CASE("gradients are additive across loss components") {
    const Dataset ds = toy_dataset();
    const TrainConfig cfg = toy_train_config();
    const auto w = nn::init_weights<double>(toy_model_config(ds, nn::Variant::Perception), 5);
    const auto pairs = split_pairs(ds, 0);

    auto grads_for = [&](const LossWeights& lw) {
        auto g = nn::grad_buffers(w);
        train::pair_batch_losses<double>(ds, pairs, w, cfg, lw, &g);
        return g;
    };

    LossWeights only;
    only.ci = 1.0;
    only.ae = only.sc = only.r = 0.0;
    const auto g_ci = grads_for(only);
    only = LossWeights{};
    only.ci = only.sc = only.r = 0.0;
    const auto g_ae = grads_for(only);
    only = LossWeights{};
    only.ci = only.ae = only.r = 0.0;
    const auto g_sc = grads_for(only);
    only = LossWeights{};
    only.ci = only.ae = only.sc = 0.0;
    const auto g_r = grads_for(only);
    const auto g_all = grads_for(LossWeights{});

    auto summed = nn::grad_buffers(w);
    for (std::size_t t = 0; t < summed.size(); ++t)
        for (std::size_t i = 0; i < summed[t].size(); ++i)
            summed[t][i] = g_ci[t][i] + g_ae[t][i] + g_sc[t][i] + g_r[t][i];
    CHECK(grad_rel_diff(g_all, summed) < 1e-12);
}

TEST_CASE("a zero weight removes the component from the gradient") {
    const Dataset ds = toy_dataset();
    const TrainConfig cfg = toy_train_config();
    const auto w = nn::init_weights<double>(toy_model_config(ds, nn::Variant::Perception), 5);
    const auto pairs = split_pairs(ds, 0);

    LossWeights ae_only;
    ae_only.ci = ae_only.sc = ae_only.r = 0.0;
    auto g = nn::grad_buffers(w);
    train::pair_batch_losses<double>(ds, pairs, w, cfg, ae_only, &g);
    // Reconstruction never touches the feature head.
    for (int t : {nn::kHead1W, nn::kHead1B, nn::kHead2W, nn::kHead2B,
                  nn::kHead3W, nn::kHead3B, nn::kHeadOutW, nn::kHeadOutB})
        for (double v : g[std::size_t(t)]) CHECK(v == 0.0);

    LossWeights no_ae = LossWeights{};
    no_ae.ae = 0.0;
    auto g2 = nn::grad_buffers(w);
    train::pair_batch_losses<double>(ds, pairs, w, cfg, no_ae, &g2);
    // Without the reconstruction term the decoder gets no gradient.
    for (int t : {nn::kDecFcW, nn::kDecFcB, nn::kDec1W, nn::kDec1B, nn::kDec2W, nn::kDec2B,
                  nn::kDec3W, nn::kDec3B, nn::kDec4W, nn::kDec4B})
        for (double v : g2[std::size_t(t)]) CHECK(v == 0.0);
}

TEST_CASE("injected oracle features sit on the loss floor") {
    const Dataset& ds = oracle_dataset();
    const DatagenConfig dg = quarter_cfg();
    const TrainConfig cfg = oracle_train_config(dg);
    std::vector<PairRef> pairs = split_pairs(ds, 0);
    const auto val = split_pairs(ds, 1);
    pairs.insert(pairs.end(), val.begin(), val.end());
    REQUIRE(pairs.size() > 100);

    const LossValues v = train::injected_losses(
        ds, pairs, [&](int demo, int k) { return stored_frame_features(ds, dg, demo, k); },
        [&](int demo) { return stored_ref_features(ds, dg, demo); }, cfg);

    // The commands were produced by the very servo law the loss penalizes,
    // so with the true features only float quantization remains.
    CHECK(v.ci < 1e-6);
    // One-step propagation uses a frozen Jacobian; the curvature left over
    // is the model's own approximation error.
    CHECK(v.sc < 1e-3);
    CHECK(v.sc > 0.0);
    // Oracle reference corners lie well inside the unit box.
    CHECK(v.r == 0.0);
    CHECK(v.ae == 0.0);
}

TEST_CASE("injected features reproduce hand-computed values") {
    const Dataset ds = toy_dataset(100, 0.0);  // zero commands
    const TrainConfig cfg = toy_train_config();
    const auto pairs = split_pairs(ds, 0);

    // Matching frame and reference features with zero commands null the
    // imitation residual; a feature corner at 1.3 leaves 0.3 of hinge per
    // sample.
    Eigen::VectorXd feats(8);
    feats << 0.1, -0.2, 0.3, 0.4, -0.5, 0.2, 0.0, 0.1;
    Eigen::VectorXd ref = feats;
    ref[3] = 1.3;

    const LossValues same = train::injected_losses(
        ds, pairs, [&](int, int) { return ref; }, [&](int) { return ref; }, cfg);
    CHECK(same.ci == 0.0);
    CHECK(same.sc == 0.0);
    CHECK(same.r == doctest::Approx(0.3 / 8.0).epsilon(1e-12));

    // Features evolving exactly as m + T * Jhat(m) * qdot null the
    // propagation term.
    const Dataset moving = toy_dataset(100, 1.0);
    const Mat6 vt = twist_transform(fixtures::desk_mount());
    auto frame_feats = [&](int demo, int k) {
        const Demo& d = moving.demos[std::size_t(demo)];
        Eigen::VectorXd m = feats;
        for (int step = 0; step < k; ++step) {
            const auto& rec = d.records[std::size_t(step)];
            const MatX l = interaction_matrix(m, d.meta.target_depths.cast<double>());
            const MatX jhat = compose_jacobian(l, vt, rec.jacobian.cast<double>());
            m += moving.header.period * jhat * rec.qdot.cast<double>();
        }
        return m;
    };
    const LossValues prop = train::injected_losses(
        moving, split_pairs(moving, 0), frame_feats, [&](int) { return ref; }, cfg);
    CHECK(prop.sc < 1e-14);
}

TEST_CASE("full loss gradient matches finite differences on oracle data") {
    const Dataset& ds = fd_dataset();
    const DatagenConfig dg = eighth_cfg();
    const TrainConfig cfg = oracle_train_config(dg);
    const auto all = split_pairs(ds, 0);
    REQUIRE(all.size() >= 2);
    const std::vector<PairRef> pairs(all.begin(), all.begin() + 2);
    const LossWeights lw;

    auto w = fd_weights(toy_model_config(ds, nn::Variant::Perception), 11);
    auto g = nn::grad_buffers(w);
    train::pair_batch_losses<double>(ds, pairs, w, cfg, lw, &g);

    Rng pick(77, Rng::hash("probe"));
    int checked = 0;
    for (std::size_t t = 0; t < w.tensors.size(); ++t) {
        auto& vals = w.tensors[t].data;
        for (int rep = 0; rep < 2; ++rep) {
            const std::size_t i = static_cast<std::size_t>(
                pick.next_below(static_cast<std::uint64_t>(vals.size())));
            const double keep = vals[i];
            auto eval_at = [&](double delta) {
                vals[i] = keep + delta;
                const double f =
                    train::pair_batch_losses<double>(ds, pairs, w, cfg, lw, nullptr).total(lw);
                vals[i] = keep;
                return f;
            };
            CHECK(fd_matches(g[t][i], eval_at, 1e-3));
            ++checked;
        }
    }
    CHECK(checked == 2 * int(w.tensors.size()));
}

TEST_CASE("detaching the interaction matrix changes only the gradient") {
    const Dataset& ds = fd_dataset();
    const DatagenConfig dg = eighth_cfg();
    TrainConfig cfg = oracle_train_config(dg);
    const auto pairs = split_pairs(ds, 0);
    const auto w = fd_weights(toy_model_config(ds, nn::Variant::Perception), 13);

    auto g_full = nn::grad_buffers(w);
    const LossValues v_full = train::pair_batch_losses<double>(ds, pairs, w, cfg, LossWeights{}, &g_full);
    cfg.detach_interaction = true;
    auto g_detached = nn::grad_buffers(w);
    const LossValues v_detached =
        train::pair_batch_losses<double>(ds, pairs, w, cfg, LossWeights{}, &g_detached);

    CHECK(v_full.ci == v_detached.ci);
    CHECK(v_full.sc == v_detached.sc);
    CHECK(grad_rel_diff(g_full, g_detached) > 1e-6);
}

TEST_CASE("end-to-end cloning loss and gradient") {
    const Dataset& ds = fd_dataset();
    const DatagenConfig dg = eighth_cfg();
    const TrainConfig cfg = oracle_train_config(dg);
    const auto all = split_pairs(ds, 0);
    const std::vector<PairRef> pairs(all.begin(), all.begin() + 2);

    auto w = fd_weights(toy_model_config(ds, nn::Variant::EndToEnd), 17);
    const double ae_weight = 0.5;
    auto g = nn::grad_buffers(w);
    const LossValues v = train::e2e_batch_losses<double>(ds, pairs, w, cfg, ae_weight, &g);
    CHECK(v.ci > 0.0);
    CHECK(v.ae > 0.0);
    CHECK(v.sc == 0.0);
    CHECK(v.r == 0.0);

    Rng pick(79, Rng::hash("probe"));
    for (std::size_t t = 0; t < w.tensors.size(); ++t) {
        auto& vals = w.tensors[t].data;
        const std::size_t i = static_cast<std::size_t>(
            pick.next_below(static_cast<std::uint64_t>(vals.size())));
        const double keep = vals[i];
        auto eval_at = [&](double delta) {
            vals[i] = keep + delta;
            const LossValues lv =
                train::e2e_batch_losses<double>(ds, pairs, w, cfg, ae_weight, nullptr);
            vals[i] = keep;
            return lv.ci + ae_weight * lv.ae;
        };
        CHECK(fd_matches(g[t][i], eval_at, 1e-3));
    }

    // Without the reconstruction term the decoder gets no gradient.
    auto g2 = nn::grad_buffers(w);
    train::e2e_batch_losses<double>(ds, pairs, w, cfg, 0.0, &g2);
    for (int t : {nn::kDecFcW, nn::kDecFcB, nn::kDec1W, nn::kDec1B, nn::kDec2W, nn::kDec2B,
                  nn::kDec3W, nn::kDec3B, nn::kDec4W, nn::kDec4B})
        for (double v2 : g2[std::size_t(t)]) CHECK(v2 == 0.0);
}

TEST_CASE("loss evaluation rejects bad arguments") {
    const Dataset ds = toy_dataset();
    const TrainConfig cfg = toy_train_config();
    const auto w = nn::init_weights<float>(toy_model_config(ds, nn::Variant::Perception), 1);
    CHECK_THROWS_AS(
        train::pair_batch_losses<float>(ds, {}, w, cfg, LossWeights{}, nullptr), ConfigError);
    LossWeights zero;
    zero.ci = zero.ae = zero.sc = zero.r = 0.0;
    CHECK_THROWS_AS(train::pair_batch_losses<float>(ds, split_pairs(ds, 0), w, cfg, zero,
                                                    nullptr),
                    ConfigError);
    TrainConfig bad = cfg;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(train::pair_batch_losses<float>(ds, split_pairs(ds, 0), w, bad,
                                                    LossWeights{}, nullptr),
                    ConfigError);
}

TEST_CASE("loss curve files are stable byte for byte") {
    std::vector<train::EpochRow> rows(2);
    rows[0].epoch = 0;
    rows[0].train = {0.5, 0.25, 0.125, 0.0};
    rows[0].val = {0.6, 0.3, 0.15, 0.01};
    rows[1].epoch = 1;
    rows[1].train = {0.4, 0.2, 0.1, 0.0};
    rows[1].val = {0.55, 0.28, 0.14, 0.005};

    const std::string path_a = "/tmp/nfvs_curves_a.csv";
    const std::string path_b = "/tmp/nfvs_curves_b.csv";
    train::write_loss_curves(rows, path_a);
    train::write_loss_curves(rows, path_b);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        REQUIRE(in.good());
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    const std::string a = slurp(path_a);
    CHECK(a == slurp(path_b));
    CHECK(a.rfind("epoch,train_ci,train_ae,train_sc,train_r,val_ci,val_ae,val_sc,val_r\n",
                  0) == 0);
    CHECK(a.find("\n0,5.000000000e-01,") != std::string::npos);
    std::remove(path_a.c_str());
    std::remove(path_b.c_str());
}
