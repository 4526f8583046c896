#include "nfvs/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <tuple>

#include "nfvs/autodiff.hpp"
#include "nfvs/errors.hpp"
#include "nfvs/parallel.hpp"
#include "nfvs/rng.hpp"

namespace nfvs::train {

namespace {

using autodiff::Graph;
template <typename T>
using Node = autodiff::Var<T>*;

// Raw per-component sums before normalization: ci and ae summed over
// samples, sc over pairs, r over samples, weighted per the batch graph.
struct PairSums {
    double ci = 0.0, ae = 0.0, sc = 0.0, r = 0.0;
    double weighted = 0.0;

    PairSums& operator+=(const PairSums& o) {
        ci += o.ci;
        ae += o.ae;
        sc += o.sc;
        r += o.r;
        weighted += o.weighted;
        return *this;
    }
};

// Batch-level divisors baked into the loss graph so gradients carry the
// same normalization as the reported values.
struct LossNorms {
    double ci = 1.0, ae = 1.0, sc = 1.0, r = 1.0;
};

template <typename T>
struct FrameData {
    Tensor<T> clean;
    Tensor<T> input;  // augmented during training, clean otherwise
    std::vector<T> qdot, q;
    std::vector<T> vjr;  // V * J_r, 6 x dof row major
};

template <typename T>
struct PairData {
    FrameData<T> a, b;
    Tensor<T> ref_clean;
    Tensor<T> ref_input;
    std::vector<T> depths;
};

template <typename T>
Tensor<T> to_image(const std::vector<std::uint8_t>& bytes, const DatasetHeader& h) {
    Tensor<T> img;
    img.rank = 3;
    img.shape = {static_cast<int>(h.height), static_cast<int>(h.width),
                 static_cast<int>(h.channels), 1};
    img.data.resize(bytes.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.data[i] = static_cast<T>(bytes[i]) / T(255);
    return img;
}

template <typename T>
FrameData<T> frame_data(const Dataset& ds, const Demo& demo, int k, const TrainConfig& cfg) {
    const SampleRecord& r = demo.records[static_cast<std::size_t>(k)];
    const int n = static_cast<int>(ds.header.dof);
    FrameData<T> f;
    f.clean = to_image<T>(r.image, ds.header);
    f.input = f.clean;
    f.qdot.resize(static_cast<std::size_t>(n));
    f.q.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        f.qdot[static_cast<std::size_t>(i)] = static_cast<T>(r.qdot[i]);
        f.q[static_cast<std::size_t>(i)] = static_cast<T>(r.q[i]);
    }
    const Eigen::Matrix<double, 6, Eigen::Dynamic> vjr =
        cfg.velocity_twist * r.jacobian.cast<double>();
    f.vjr.resize(static_cast<std::size_t>(6 * n));
    for (int row = 0; row < 6; ++row)
        for (int col = 0; col < n; ++col)
            f.vjr[static_cast<std::size_t>(row * n + col)] = static_cast<T>(vjr(row, col));
    return f;
}

template <typename T>
PairData<T> pair_data(const Dataset& ds, const PairRef& pr, const TrainConfig& cfg,
                      const Rng* augment_base) {
    const Demo& demo = ds.demos[static_cast<std::size_t>(pr.demo)];
    PairData<T> p;
    p.a = frame_data<T>(ds, demo, pr.k, cfg);
    p.b = frame_data<T>(ds, demo, pr.k + 1, cfg);
    p.ref_clean = to_image<T>(demo.meta.reference_image, ds.header);
    p.ref_input = p.ref_clean;
    p.depths.resize(static_cast<std::size_t>(demo.meta.target_depths.size()));
    for (int i = 0; i < demo.meta.target_depths.size(); ++i)
        p.depths[static_cast<std::size_t>(i)] = static_cast<T>(demo.meta.target_depths[i]);
    if (augment_base) {
        const Rng base = augment_base->split(static_cast<std::uint64_t>(pr.demo))
                             .split(static_cast<std::uint64_t>(pr.k));
        p.a.input = nn::augment(p.a.clean, cfg.augment, base.split(std::uint64_t{0}));
        p.b.input = nn::augment(p.b.clean, cfg.augment, base.split(std::uint64_t{1}));
        p.ref_input = nn::augment(p.ref_clean, cfg.augment, base.split(std::uint64_t{2}));
    }
    return p;
}

// The servo-law residual q_dot + lambda * (Jhat' Jhat + sigma^2 I)^-1 Jhat'
// (m - m_ref), with Jhat = L(m) * V * J_r built inside the graph so the
// gradient flows through the interaction matrix's feature dependence.
template <typename T>
std::pair<Node<T>, Node<T>> servo_nodes(Graph<T>& g, Node<T> m, Node<T> m_ref,
                                        const std::vector<T>& vjr,
                                        const std::vector<T>& depths,
                                        const std::vector<T>& qdot, int n,
                                        const TrainConfig& cfg) {
    Node<T> l = g.interaction(m, depths, !cfg.detach_interaction);
    Node<T> vjr_node = g.leaf(vjr.data(), {6, n}, false);
    Node<T> jhat = g.matmul(l, vjr_node);
    Node<T> jt = g.transpose(jhat);
    Node<T> gram = g.add_diag(g.matmul(jt, jhat), static_cast<T>(cfg.sigma * cfg.sigma));
    Node<T> pinv_err = g.matvec(g.inverse(gram), g.matvec(jt, g.sub(m, m_ref)));
    Node<T> qdot_node = g.leaf(qdot.data(), {n}, false);
    Node<T> resid = g.add(qdot_node, g.scale(pinv_err, static_cast<T>(cfg.lambda)));
    return {resid, jhat};
}

// One-step feature propagation error m_b - m_a - period * Jhat_a * q_dot_a.
template <typename T>
Node<T> propagation_residual(Graph<T>& g, Node<T> m_a, Node<T> m_b, Node<T> jhat_a,
                             const std::vector<T>& qdot_a, int n, double period) {
    Node<T> qdot_node = g.leaf(qdot_a.data(), {n}, false);
    Node<T> step = g.scale(g.matvec(jhat_a, qdot_node), static_cast<T>(period));
    return g.sub(g.sub(m_b, m_a), step);
}

struct RunSettings {
    const TrainConfig* cfg = nullptr;
    LossWeights lw;
    LossNorms norms;
    double period = 0.0;
    int dof = 0;
    int feature_size = 0;
    bool training = false;  // training builds only components with nonzero weight
    double e2e_ae_weight = 0.0;
};

template <typename T>
PairSums run_pair(const PairData<T>& p, const nn::ModelWeights<T>& w, const RunSettings& rs,
                  nn::GradBuffers<T>* grads) {
    const TrainConfig& cfg = *rs.cfg;
    const int n = rs.dof;
    Graph<T> g;
    nn::BoundModel<T> bm = nn::bind(g, w, grads != nullptr);

    auto encode_frame = [&](const Tensor<T>& input) {
        Node<T> img = g.alias(input.data.data(), input.shape, input.rank, false);
        return nn::encode_graph(g, bm, img);
    };

    const bool want_ci = !rs.training || rs.lw.ci != 0.0;
    const bool want_sc = !rs.training || rs.lw.sc != 0.0;
    const bool want_ae = !rs.training || rs.lw.ae != 0.0;
    const bool want_r = !rs.training || rs.lw.r != 0.0;

    Node<T> lat_a = encode_frame(p.a.input);
    Node<T> lat_b = encode_frame(p.b.input);
    Node<T> m_a = nn::head_graph(g, bm, lat_a);
    Node<T> m_b = nn::head_graph(g, bm, lat_b);

    std::vector<std::pair<autodiff::Var<T>*, T>> terms;
    PairSums sums;

    Node<T> m_ref = nullptr;
    if (want_ci || want_r) {
        m_ref = nn::head_graph(g, bm, encode_frame(p.ref_input));
    }

    Node<T> jhat_a = nullptr;
    if (want_ci) {
        auto [resid_a, ja] = servo_nodes(g, m_a, m_ref, p.a.vjr, p.depths, p.a.qdot, n, cfg);
        jhat_a = ja;
        auto [resid_b, jb] = servo_nodes(g, m_b, m_ref, p.b.vjr, p.depths, p.b.qdot, n, cfg);
        Node<T> ci_a = g.l1_sum(resid_a);
        Node<T> ci_b = g.l1_sum(resid_b);
        sums.ci = static_cast<double>(ci_a->value()) + static_cast<double>(ci_b->value());
        const T coeff = static_cast<T>(rs.lw.ci / rs.norms.ci);
        terms.push_back({ci_a, coeff});
        terms.push_back({ci_b, coeff});
    }
    if (want_sc) {
        if (!jhat_a) {
            // The propagation term reuses the composed Jacobian; build it
            // without the imitation residual when ci is switched off.
            Node<T> l = g.interaction(m_a, p.depths, !cfg.detach_interaction);
            jhat_a = g.matmul(l, g.leaf(p.a.vjr.data(), {6, n}, false));
        }
        Node<T> sc = g.l1_sum(propagation_residual(g, m_a, m_b, jhat_a, p.a.qdot, n, rs.period));
        sums.sc = static_cast<double>(sc->value());
        terms.push_back({sc, static_cast<T>(rs.lw.sc / rs.norms.sc)});
    }
    if (want_ae) {
        auto reconstruction = [&](Node<T> lat, const Tensor<T>& clean) {
            Node<T> rec = nn::decode_graph(g, bm, lat);
            Node<T> target = g.alias(clean.data.data(), clean.shape, clean.rank, false);
            return g.l1_sum(g.sub(rec, target));
        };
        Node<T> ae_a = reconstruction(lat_a, p.a.clean);
        Node<T> ae_b = reconstruction(lat_b, p.b.clean);
        sums.ae = static_cast<double>(ae_a->value()) + static_cast<double>(ae_b->value());
        const T coeff = static_cast<T>(rs.lw.ae / rs.norms.ae);
        terms.push_back({ae_a, coeff});
        terms.push_back({ae_b, coeff});
    }
    if (want_r) {
        Node<T> r = g.hinge_sum(m_ref, T(1));
        // Both frames of the pair count the demo reference once each.
        sums.r = 2.0 * static_cast<double>(r->value());
        terms.push_back({r, static_cast<T>(2.0 * rs.lw.r / rs.norms.r)});
    }

    Node<T> total = g.weighted_sum(terms);
    sums.weighted = static_cast<double>(total->value());
    if (grads) {
        g.backward(total);
        nn::grad_add(*grads, bm);
    }
    return sums;
}

template <typename T>
PairSums run_pair_e2e(const PairData<T>& p, const nn::ModelWeights<T>& w,
                      const RunSettings& rs, nn::GradBuffers<T>* grads) {
    const int n = rs.dof;
    Graph<T> g;
    nn::BoundModel<T> bm = nn::bind(g, w, grads != nullptr);
    const bool want_ae = !rs.training || rs.e2e_ae_weight != 0.0;

    std::vector<std::pair<autodiff::Var<T>*, T>> terms;
    PairSums sums;
    auto frame = [&](const FrameData<T>& fd) {
        Node<T> img = g.alias(fd.input.data.data(), fd.input.shape, fd.input.rank, false);
        Node<T> lat = nn::encode_graph(g, bm, img);
        Node<T> q = g.leaf(fd.q.data(), {n}, false);
        Node<T> cmd = nn::head_graph(g, bm, g.concat(lat, q));
        Node<T> qdot = g.leaf(fd.qdot.data(), {n}, false);
        Node<T> bc = g.l1_sum(g.sub(cmd, qdot));
        sums.ci += static_cast<double>(bc->value());
        terms.push_back({bc, static_cast<T>(1.0 / rs.norms.ci)});
        if (want_ae) {
            Node<T> rec = nn::decode_graph(g, bm, lat);
            Node<T> target = g.alias(fd.clean.data.data(), fd.clean.shape, fd.clean.rank, false);
            Node<T> ae = g.l1_sum(g.sub(rec, target));
            sums.ae += static_cast<double>(ae->value());
            terms.push_back({ae, static_cast<T>(rs.e2e_ae_weight / rs.norms.ae)});
        }
    };
    frame(p.a);
    frame(p.b);

    Node<T> total = g.weighted_sum(terms);
    sums.weighted = static_cast<double>(total->value());
    if (grads) {
        g.backward(total);
        nn::grad_add(*grads, bm);
    }
    return sums;
}

LossNorms batch_norms(std::size_t pair_count, const Dataset& ds) {
    const double pairs = static_cast<double>(pair_count);
    const double samples = 2.0 * pairs;
    const double px = static_cast<double>(ds.header.width) *
                      static_cast<double>(ds.header.height) *
                      static_cast<double>(ds.header.channels);
    LossNorms norms;
    norms.ci = samples * static_cast<double>(ds.header.dof);
    norms.ae = samples * px;
    norms.sc = pairs * static_cast<double>(ds.header.feature_size);
    norms.r = samples * static_cast<double>(ds.header.feature_size);
    return norms;
}

LossValues normalized(const PairSums& sums, const LossNorms& norms) {
    LossValues v;
    v.ci = sums.ci / norms.ci;
    v.ae = sums.ae / norms.ae;
    v.sc = sums.sc / norms.sc;
    v.r = sums.r / norms.r;
    return v;
}

std::vector<PairRef> all_pairs(const Dataset& ds, std::uint8_t split) {
    std::vector<PairRef> pairs;
    for (std::size_t d = 0; d < ds.demos.size(); ++d) {
        if (ds.demos[d].meta.split != split) continue;
        const int records = static_cast<int>(ds.demos[d].records.size());
        for (int k = 0; k + 1 < records; ++k)
            pairs.push_back({static_cast<int>(d), k});
    }
    return pairs;
}

nn::ModelConfig model_config_for(const Dataset& ds, const TrainConfig& cfg,
                                 nn::Variant variant) {
    nn::ModelConfig mc;
    mc.width = static_cast<int>(ds.header.width);
    mc.height = static_cast<int>(ds.header.height);
    mc.channels = static_cast<int>(ds.header.channels);
    mc.feature_size = static_cast<int>(ds.header.feature_size);
    mc.dof = static_cast<int>(ds.header.dof);
    mc.alpha = cfg.alpha;
    mc.command_scale = cfg.command_clamp;
    mc.variant = variant;
    mc.validate();
    return mc;
}

// Shared epoch loop for both variants. run_one evaluates a single pair and
// optionally accumulates gradients.
template <typename RunOne>
TrainResult train_loop(const Dataset& ds, const TrainConfig& cfg, const LossWeights& lw,
                       const nn::ModelConfig& mc, const CheckpointFn& checkpoint,
                       const RunOne& run_one) {
    cfg.validate();
    ds.validate();
    auto weights = nn::init_weights<float>(mc, cfg.seed);
    auto adam = nn::adam_init(weights);

    const std::vector<PairRef> train_pairs = all_pairs(ds, 0);
    const std::vector<PairRef> val_pairs = all_pairs(ds, 1);
    if (train_pairs.empty()) throw ConfigError("dataset has no training pairs");
    if (val_pairs.empty()) throw ConfigError("dataset has no validation pairs");

    const int max_pairs = cfg.batch_size / 2;
    std::vector<nn::GradBuffers<float>> grad_slots(static_cast<std::size_t>(max_pairs));
    for (auto& slot : grad_slots) slot = nn::grad_buffers(weights);
    std::vector<PairSums> sum_slots(
        std::max(static_cast<std::size_t>(max_pairs),
                 std::max(train_pairs.size(), val_pairs.size())));
    auto acc = nn::grad_buffers(weights);

    // Whole-partition evaluation on clean images, one global normalization.
    auto evaluate = [&](const std::vector<PairRef>& pairs) {
        RunSettings rs;
        rs.cfg = &cfg;
        rs.lw = lw;
        rs.period = ds.header.period;
        rs.dof = static_cast<int>(ds.header.dof);
        rs.feature_size = static_cast<int>(ds.header.feature_size);
        rs.training = false;
        run_indexed(static_cast<int>(pairs.size()), cfg.jobs, [&](int i) {
            const PairData<float> p =
                pair_data<float>(ds, pairs[static_cast<std::size_t>(i)], cfg, nullptr);
            sum_slots[static_cast<std::size_t>(i)] = run_one(p, weights, rs, nullptr);
        });
        PairSums total;
        for (std::size_t i = 0; i < pairs.size(); ++i) total += sum_slots[i];
        return normalized(total, batch_norms(pairs.size(), ds));
    };

    TrainResult result;
    result.curves.push_back({0, evaluate(train_pairs), evaluate(val_pairs)});
    result.best = weights;
    result.best_epoch = 0;
    double best_total = result.curves[0].val.total(lw);

    long batch_id = 0;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::uint64_t shuffle_seed =
            Rng(cfg.seed, Rng::hash("batch-shuffle")).split(static_cast<std::uint64_t>(epoch)).next_u64();
        const auto batches = pair_batches(ds, 0, cfg.batch_size, shuffle_seed);
        const Rng aug_base =
            Rng(cfg.seed, Rng::hash("augment")).split(static_cast<std::uint64_t>(epoch));

        PairSums epoch_sums;
        std::size_t epoch_pairs = 0;
        for (const auto& batch : batches) {
            RunSettings rs;
            rs.cfg = &cfg;
            rs.lw = lw;
            rs.norms = batch_norms(batch.size(), ds);
            rs.period = ds.header.period;
            rs.dof = static_cast<int>(ds.header.dof);
            rs.feature_size = static_cast<int>(ds.header.feature_size);
            rs.training = true;

            try {
                run_indexed(static_cast<int>(batch.size()), cfg.jobs, [&](int i) {
                    auto& slot = grad_slots[static_cast<std::size_t>(i)];
                    nn::grad_zero(slot);
                    const PairData<float> p =
                        pair_data<float>(ds, batch[static_cast<std::size_t>(i)], cfg, &aug_base);
                    sum_slots[static_cast<std::size_t>(i)] = run_one(p, weights, rs, &slot);
                });
            } catch (const SingularMatrix&) {
                // With sigma > 0 the damped system is positive definite for
                // any finite features, so a singular solve means the
                // forward pass already produced non-finite values.
                throw NonFiniteLoss("training batch " + std::to_string(batch_id) +
                                    " (epoch " + std::to_string(epoch) +
                                    ") produced a non-finite loss");
            }

            // Deterministic reduction: always pair order, whatever the
            // thread count was.
            nn::grad_zero(acc);
            PairSums batch_sums;
            const auto& ops = kernels::active<float>();
            for (std::size_t i = 0; i < batch.size(); ++i) {
                batch_sums += sum_slots[i];
                for (std::size_t t = 0; t < acc.size(); ++t)
                    ops.axpy(1.0f, grad_slots[i][t].data(),
                             static_cast<int>(acc[t].size()), acc[t].data());
            }
            if (!std::isfinite(batch_sums.weighted))
                throw NonFiniteLoss("training batch " + std::to_string(batch_id) +
                                    " (epoch " + std::to_string(epoch) +
                                    ") produced a non-finite loss");
            nn::adam_step(weights, acc, adam, static_cast<float>(cfg.learning_rate));
            epoch_sums += batch_sums;
            epoch_pairs += batch.size();
            ++batch_id;
        }

        EpochRow row;
        row.epoch = epoch;
        row.train = normalized(epoch_sums, batch_norms(epoch_pairs, ds));
        row.val = evaluate(val_pairs);
        result.curves.push_back(row);

        const double val_total = row.val.total(lw);
        if (val_total < best_total) {
            best_total = val_total;
            result.best = weights;
            result.best_epoch = epoch;
            if (checkpoint) checkpoint(epoch, weights, true);
        }
        if (checkpoint && cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0)
            checkpoint(epoch, weights, false);
    }
    return result;
}

}  // namespace

void LossWeights::validate() const {
    if (ci < 0.0 || ae < 0.0 || sc < 0.0 || r < 0.0)
        throw ConfigError("loss weights must be non-negative");
    if (ci == 0.0 && ae == 0.0 && sc == 0.0 && r == 0.0)
        throw ConfigError("at least one loss weight must be positive");
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch_size < 2 || batch_size % 2 != 0)
        throw ConfigError("batch size must be even and at least 2");
    if (!(lambda > 0.0)) throw ConfigError("servo gain must be positive");
    if (!(sigma > 0.0)) throw ConfigError("damping sigma must be positive during training");
    if (!(alpha > 0.0)) throw ConfigError("head scale must be positive");
    if (!(command_clamp > 0.0)) throw ConfigError("command clamp must be positive");
    if (checkpoint_every < 0) throw ConfigError("checkpoint cadence must be non-negative");
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    if (!velocity_twist.allFinite()) throw ConfigError("velocity twist must be finite");
    augment.validate();
}

TrainResult train(const Dataset& ds, const TrainConfig& cfg, const LossWeights& lw,
                  const CheckpointFn& checkpoint) {
    lw.validate();
    const nn::ModelConfig mc = model_config_for(ds, cfg, nn::Variant::Perception);
    return train_loop(ds, cfg, lw, mc, checkpoint,
                      [](const PairData<float>& p, const nn::ModelWeights<float>& w,
                         const RunSettings& rs, nn::GradBuffers<float>* grads) {
                          return run_pair(p, w, rs, grads);
                      });
}

TrainResult train_e2e(const Dataset& ds, const TrainConfig& cfg, double ae_weight,
                      const CheckpointFn& checkpoint) {
    if (ae_weight < 0.0) throw ConfigError("auto-encoding weight must be non-negative");
    const nn::ModelConfig mc = model_config_for(ds, cfg, nn::Variant::EndToEnd);
    // The cloning term rides in the ci slot; only it and the optional
    // auto-encoding term exist for this variant.
    LossWeights lw;
    lw.ci = 1.0;
    lw.ae = ae_weight;
    lw.sc = 0.0;
    lw.r = 0.0;
    return train_loop(ds, cfg, lw, mc, checkpoint,
                      [ae_weight](const PairData<float>& p, const nn::ModelWeights<float>& w,
                                  const RunSettings& rs, nn::GradBuffers<float>* grads) {
                          RunSettings e2e = rs;
                          e2e.e2e_ae_weight = ae_weight;
                          return run_pair_e2e(p, w, e2e, grads);
                      });
}

template <typename T>
LossValues pair_batch_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                             const nn::ModelWeights<T>& w, const TrainConfig& cfg,
                             const LossWeights& lw, nn::GradBuffers<T>* grads) {
    cfg.validate();
    lw.validate();
    if (pairs.empty()) throw ConfigError("loss evaluation needs at least one pair");
    RunSettings rs;
    rs.cfg = &cfg;
    rs.lw = lw;
    rs.norms = batch_norms(pairs.size(), ds);
    rs.period = ds.header.period;
    rs.dof = static_cast<int>(ds.header.dof);
    rs.feature_size = static_cast<int>(ds.header.feature_size);
    rs.training = grads != nullptr;
    PairSums total;
    for (const PairRef& pr : pairs) {
        const PairData<T> p = pair_data<T>(ds, pr, cfg, nullptr);
        total += run_pair(p, w, rs, grads);
    }
    return normalized(total, rs.norms);
}

template <typename T>
LossValues e2e_batch_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                            const nn::ModelWeights<T>& w, const TrainConfig& cfg,
                            double ae_weight, nn::GradBuffers<T>* grads) {
    cfg.validate();
    if (pairs.empty()) throw ConfigError("loss evaluation needs at least one pair");
    RunSettings rs;
    rs.cfg = &cfg;
    rs.norms = batch_norms(pairs.size(), ds);
    rs.period = ds.header.period;
    rs.dof = static_cast<int>(ds.header.dof);
    rs.feature_size = static_cast<int>(ds.header.feature_size);
    rs.training = grads != nullptr;
    rs.e2e_ae_weight = ae_weight;
    PairSums total;
    for (const PairRef& pr : pairs) {
        const PairData<T> p = pair_data<T>(ds, pr, cfg, nullptr);
        total += run_pair_e2e(p, w, rs, grads);
    }
    return normalized(total, rs.norms);
}

double loss_control_imitation(const Dataset& ds, const std::vector<PairRef>& pairs,
                              const nn::ModelWeights<float>& w, const TrainConfig& cfg) {
    return pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr).ci;
}

double loss_state_consistency(const Dataset& ds, const std::vector<PairRef>& pairs,
                              const nn::ModelWeights<float>& w, const TrainConfig& cfg) {
    return pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr).sc;
}

double loss_autoencode(const Dataset& ds, const std::vector<PairRef>& pairs,
                       const nn::ModelWeights<float>& w, const TrainConfig& cfg) {
    return pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr).ae;
}

double loss_regularizer(const Dataset& ds, const std::vector<PairRef>& pairs,
                        const nn::ModelWeights<float>& w, const TrainConfig& cfg) {
    return pair_batch_losses<float>(ds, pairs, w, cfg, LossWeights{}, nullptr).r;
}

LossValues injected_losses(const Dataset& ds, const std::vector<PairRef>& pairs,
                           const FrameFeatureFn& frame_features,
                           const RefFeatureFn& ref_features, const TrainConfig& cfg) {
    cfg.validate();
    if (pairs.empty()) throw ConfigError("loss evaluation needs at least one pair");
    const int n = static_cast<int>(ds.header.dof);
    const int f = static_cast<int>(ds.header.feature_size);
    PairSums total;
    for (const PairRef& pr : pairs) {
        const PairData<double> p = pair_data<double>(ds, pr, cfg, nullptr);
        auto to_vec = [](const Eigen::VectorXd& v) {
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        const auto feats_a = to_vec(frame_features(pr.demo, pr.k));
        const auto feats_b = to_vec(frame_features(pr.demo, pr.k + 1));
        const auto feats_ref = to_vec(ref_features(pr.demo));

        Graph<double> g;
        Node<double> m_a = g.leaf(feats_a.data(), {f}, false);
        Node<double> m_b = g.leaf(feats_b.data(), {f}, false);
        Node<double> m_ref = g.leaf(feats_ref.data(), {f}, false);
        auto [resid_a, jhat_a] = servo_nodes(g, m_a, m_ref, p.a.vjr, p.depths, p.a.qdot, n, cfg);
        auto [resid_b, jhat_b] = servo_nodes(g, m_b, m_ref, p.b.vjr, p.depths, p.b.qdot, n, cfg);
        total.ci += g.l1_sum(resid_a)->value() + g.l1_sum(resid_b)->value();
        total.sc += g.l1_sum(
            propagation_residual(g, m_a, m_b, jhat_a, p.a.qdot, n, ds.header.period))->value();
        total.r += 2.0 * g.hinge_sum(m_ref, 1.0)->value();
    }
    LossValues v = normalized(total, batch_norms(pairs.size(), ds));
    v.ae = 0.0;
    return v;
}

void write_loss_curves(const std::vector<EpochRow>& curves, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open loss-curve file for writing: " + path);
    out << "epoch,train_ci,train_ae,train_sc,train_r,val_ci,val_ae,val_sc,val_r\n";
    char line[256];
    for (const EpochRow& row : curves) {
        std::snprintf(line, sizeof line, "%d,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e,%.9e\n",
                      row.epoch, row.train.ci, row.train.ae, row.train.sc, row.train.r,
                      row.val.ci, row.val.ae, row.val.sc, row.val.r);
        out << line;
    }
    if (!out) throw IoError("failed while writing loss curves: " + path);
}

template LossValues pair_batch_losses<float>(const Dataset&, const std::vector<PairRef>&,
                                             const nn::ModelWeights<float>&,
                                             const TrainConfig&, const LossWeights&,
                                             nn::GradBuffers<float>*);
template LossValues pair_batch_losses<double>(const Dataset&, const std::vector<PairRef>&,
                                              const nn::ModelWeights<double>&,
                                              const TrainConfig&, const LossWeights&,
                                              nn::GradBuffers<double>*);
template LossValues e2e_batch_losses<float>(const Dataset&, const std::vector<PairRef>&,
                                            const nn::ModelWeights<float>&, const TrainConfig&,
                                            double, nn::GradBuffers<float>*);
template LossValues e2e_batch_losses<double>(const Dataset&, const std::vector<PairRef>&,
                                             const nn::ModelWeights<double>&,
                                             const TrainConfig&, double,
                                             nn::GradBuffers<double>*);

}  // namespace nfvs::train
