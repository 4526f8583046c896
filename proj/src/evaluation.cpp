#include "nfvs/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

#include "nfvs/errors.hpp"
#include "nfvs/parallel.hpp"
#include "nfvs/rng.hpp"
#include "nfvs/vs_control.hpp"

namespace nfvs::eval {

namespace {

// Scene-derived episode fixtures: the goal pose, and the reference data
// captured there before the run starts.
struct Episode {
    Scene scene;
    Pose desired;
    VecX ref_features;  // ground truth at the desired pose
    VecX depths;        // target depths, the constant Z the servo assumes
    Tensor<float> ref_input;  // captured reference image in network form
};

// The captured-image form the models were trained on: rendered, quantized
// to 8 bits, mapped back to [0, 1].
Tensor<float> captured(const Scene& scene, const Pose& cam, const CameraIntrinsics& k) {
    return dequantize_image(quantize_image(render(scene, cam, k)), k);
}

Episode make_episode(std::uint64_t seed, const RolloutContext& ctx) {
    Episode ep;
    ep.scene = randomize_scene(seed, ctx.sim);
    ep.desired = desired_camera_pose(ep.scene, ctx.sim);
    std::tie(ep.ref_features, ep.depths) =
        ground_truth_features(ep.scene, ep.desired, ctx.camera);
    ep.ref_input = captured(ep.scene, ep.desired, ctx.camera);
    return ep;
}

VecX to_vecx(const Tensor<float>& t) {
    VecX v(static_cast<int>(t.data.size()));
    for (int i = 0; i < v.size(); ++i) v[i] = static_cast<double>(t.data[std::size_t(i)]);
    return v;
}

VecX model_features(const nn::ModelWeights<float>& w, const Tensor<float>& image) {
    return to_vecx(nn::head(nn::encode(image, w), w));
}

// One closed-loop episode; command(cam, image, q) supplies the feedback.
// Simulator and controller failures become a failed-episode record.
RolloutReport run_episode(
    std::uint64_t seed, const RolloutContext& ctx,
    const std::function<void(const Episode&)>& prepare,
    const std::function<VecX(const Episode&, const Pose&, const Tensor<float>&,
                             const VecX&)>& command) {
    RolloutReport rep;
    rep.scene_seed = seed;
    try {
        const Episode ep = make_episode(seed, ctx);
        rep.desired = ep.desired;
        prepare(ep);

        SimState st;
        st.scene = ep.scene;
        st.joints.positions = ctx.initial_posture;
        st.joints.velocities = VecX::Zero(ctx.chain.dof());
        const double period = ctx.episode.period;
        const int max_steps =
            static_cast<int>(std::floor(ctx.episode.max_duration / period + 1e-9));

        for (int k = 0; k < max_steps; ++k) {
            const Pose cam =
                forward_kinematics(ctx.chain, st.joints.positions).compose(ctx.eye_in_hand);
            const Tensor<float> img = captured(ep.scene, cam, ctx.camera);
            StepTrace tr;
            tr.t = k * period;
            tr.camera = cam;
            tr.pe = (cam.translation - ep.desired.translation).norm();
            tr.oe = quat_distance(cam.rotation, ep.desired.rotation);
            tr.qdot = command(ep, cam, img, st.joints.positions);
            tr.cam_angular_speed =
                ((twist_transform(ctx.eye_in_hand) * robot_jacobian(ctx.chain, st.joints.positions))
                     .bottomRows(3) *
                 tr.qdot)
                    .norm();
            rep.steps.push_back(tr);

            const bool converged =
                tr.pe < ctx.episode.pe_threshold && tr.oe < ctx.episode.oe_threshold;
            if (converged && !rep.success) {
                rep.success = true;
                rep.convergence_step = k;
            }
            if (converged && ctx.episode.stop_at_convergence) break;
            st = step(st, ctx.chain, rep.steps.back().qdot, period);
        }
    } catch (const std::exception& e) {
        rep.success = false;
        rep.failed = true;
        rep.failure = e.what();
    }
    return rep;
}

VecX servo_step(const VecX& m, const VecX& m_ref, const VecX& depths, const Pose& mount,
                const KinematicChain& chain, const VecX& q, const ControlConfig& control,
                Controller variant) {
    const Mat6 vt = twist_transform(mount);
    const MatX j_r = robot_jacobian(chain, q);
    const MatX l = interaction_matrix(m, depths);
    const MatX jhat = compose_jacobian(l, vt, j_r);
    if (variant == Controller::Nullspace) {
        const MatX j_cam = vt * j_r;
        return nullspace_command(m, m_ref, jhat, j_cam.bottomRows(3), control);
    }
    return vs_command(m, m_ref, jhat, control);
}

// Tolerant per-episode summary; unlike metrics() it accepts one-step
// episodes (a start pose already inside the thresholds) by reporting zero
// command smoothness.
struct Summary {
    double ce = 0.0, cs = 0.0, pe = 0.0, oe = 0.0;
};

Summary summarize(const RolloutReport& r) {
    Summary s;
    if (r.steps.empty()) return s;
    double ce_sum = 0.0, cs_sum = 0.0;
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
        ce_sum += r.steps[k].qdot.norm();
        if (k > 0)
            cs_sum += (r.steps[k].qdot - r.steps[k - 1].qdot).norm() /
                      (r.steps[k].t - r.steps[k - 1].t);
    }
    s.ce = ce_sum / double(r.steps.size());
    s.cs = r.steps.size() > 1 ? cs_sum / double(r.steps.size() - 1) : 0.0;
    s.pe = r.steps.back().pe;
    s.oe = r.steps.back().oe;
    return s;
}

double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

BenchmarkRow aggregate(const std::string& name, const std::vector<RolloutReport>& reports) {
    BenchmarkRow row;
    row.name = name;
    row.episodes = static_cast<int>(reports.size());
    std::vector<double> ce, cs, pe, oe;
    for (const RolloutReport& r : reports) {
        if (!r.success) continue;
        ++row.successes;
        const Summary s = summarize(r);
        ce.push_back(s.ce);
        cs.push_back(s.cs);
        pe.push_back(s.pe);
        oe.push_back(s.oe);
    }
    row.ce = median(std::move(ce));
    row.cs = median(std::move(cs));
    row.pe = median(std::move(pe));
    row.oe = median(std::move(oe));
    return row;
}

using EpisodeFn = std::function<RolloutReport(std::uint64_t seed)>;

BenchmarkResult run_rows(const std::vector<std::pair<std::string, EpisodeFn>>& entries,
                         int n_episodes, std::uint64_t master_seed, int jobs) {
    if (n_episodes < 1) throw ConfigError("benchmark needs at least one episode");
    std::vector<std::uint64_t> seeds;
    seeds.reserve(static_cast<std::size_t>(n_episodes));
    Rng seeder(master_seed, Rng::hash("episode-seeds"));
    for (int i = 0; i < n_episodes; ++i)
        seeds.push_back(seeder.split(static_cast<std::uint64_t>(i)).next_u64());

    BenchmarkResult result;
    for (const auto& [name, fn] : entries) {
        std::vector<RolloutReport> reports(static_cast<std::size_t>(n_episodes));
        run_indexed(n_episodes, jobs,
                    [&](int i) { reports[std::size_t(i)] = fn(seeds[std::size_t(i)]); });
        result.rows.push_back(aggregate(name, reports));
        result.reports.push_back(std::move(reports));
    }
    return result;
}

}  // namespace

void EpisodeConfig::validate() const {
    if (!(max_duration > 0)) throw ConfigError("episode duration must be positive");
    if (!(pe_threshold > 0) || !(oe_threshold > 0))
        throw ConfigError("success thresholds must be positive");
    if (!(period > 0) || period > max_duration)
        throw ConfigError("control period must be positive and fit the episode");
}

void RolloutContext::validate() const {
    chain.validate();
    sim.validate();
    camera.validate();
    control.validate();
    episode.validate();
    if (initial_posture.size() != chain.dof())
        throw ConfigError("initial posture length does not match the chain");
    if (!initial_posture.allFinite()) throw ConfigError("initial posture must be finite");
}

MetricTrace metrics(const RolloutReport& report) {
    if (report.steps.size() < 2)
        throw TooShortTrace("metric traces need at least two control steps");
    MetricTrace m;
    const std::size_t n = report.steps.size();
    m.ce.resize(n);
    m.cs.resize(n);
    m.pe.resize(n);
    m.oe.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const StepTrace& s = report.steps[k];
        m.ce[k] = s.qdot.norm();
        m.cs[k] = k == 0 ? 0.0
                         : (s.qdot - report.steps[k - 1].qdot).norm() /
                               (s.t - report.steps[k - 1].t);
        // Pose errors are a pure function of the recorded poses.
        m.pe[k] = (s.camera.translation - report.desired.translation).norm();
        m.oe[k] = quat_distance(s.camera.rotation, report.desired.rotation);
        m.ce_mean += m.ce[k];
        if (k > 0) m.cs_mean += m.cs[k];
    }
    m.ce_mean /= double(n);
    m.cs_mean /= double(n - 1);
    m.pe_final = m.pe.back();
    m.oe_final = m.oe.back();
    return m;
}

RolloutReport rollout_neural(const nn::ModelWeights<float>& w, std::uint64_t scene_seed,
                             const RolloutContext& ctx, Controller variant) {
    ctx.validate();
    if (w.config.variant == nn::Variant::EndToEnd) {
        if (variant == Controller::Nullspace)
            throw ConfigError("the end-to-end model emits commands directly and cannot "
                              "run inside the null-space controller");
        return run_episode(
            scene_seed, ctx, [](const Episode&) {},
            [&](const Episode&, const Pose&, const Tensor<float>& img, const VecX& q) {
                Tensor<float> qt;
                qt.rank = 1;
                qt.shape = {static_cast<int>(q.size()), 1, 1, 1};
                qt.data.resize(static_cast<std::size_t>(q.size()));
                for (int i = 0; i < q.size(); ++i)
                    qt.data[std::size_t(i)] = static_cast<float>(q[i]);
                return to_vecx(nn::e2e_forward(img, qt, w));
            });
    }

    // The reference prediction is captured once per episode, exactly like
    // the reference image it comes from.
    VecX m_ref;
    return run_episode(
        scene_seed, ctx,
        [&](const Episode& ep) { m_ref = model_features(w, ep.ref_input); },
        [&](const Episode& ep, const Pose&, const Tensor<float>& img, const VecX& q) {
            const VecX m = model_features(w, img);
            return servo_step(m, m_ref, ep.depths, ctx.eye_in_hand, ctx.chain, q,
                              ctx.control, variant);
        });
}

RolloutReport rollout_oracle(std::uint64_t scene_seed, const RolloutContext& ctx,
                             Controller variant) {
    ctx.validate();
    return run_episode(
        scene_seed, ctx, [](const Episode&) {},
        [&](const Episode& ep, const Pose& cam, const Tensor<float>&, const VecX& q) {
            const VecX m = ground_truth_features(ep.scene, cam, ctx.camera).first;
            return servo_step(m, ep.ref_features, ep.depths, ctx.eye_in_hand, ctx.chain, q,
                              ctx.control, variant);
        });
}

BenchmarkResult benchmark(const nn::ModelWeights<float>* ours,
                          const nn::ModelWeights<float>* e2e, int n_episodes,
                          std::uint64_t master_seed, const RolloutContext& ctx,
                          Controller variant, int jobs) {
    ctx.validate();
    std::vector<std::pair<std::string, EpisodeFn>> entries;
    entries.push_back({"oracle", [&](std::uint64_t s) { return rollout_oracle(s, ctx, variant); }});
    if (ours)
        entries.push_back(
            {"ours", [&, ours](std::uint64_t s) { return rollout_neural(*ours, s, ctx, variant); }});
    if (e2e)
        entries.push_back(
            {"e2e", [&, e2e](std::uint64_t s) { return rollout_neural(*e2e, s, ctx, variant); }});
    return run_rows(entries, n_episodes, master_seed, jobs);
}

BenchmarkResult ablate(const Dataset& ds, const train::TrainConfig& train_cfg,
                       const std::vector<AblationSpec>& variants, int n_episodes,
                       std::uint64_t eval_seed, const RolloutContext& ctx, int jobs) {
    ctx.validate();
    if (variants.empty()) throw ConfigError("ablation needs at least one variant");

    std::vector<nn::ModelWeights<float>> models;
    models.reserve(variants.size());
    for (const AblationSpec& spec : variants) {
        train::TrainConfig cfg = train_cfg;
        cfg.detach_interaction = spec.detach_interaction;
        const auto& lw = spec.weights;
        if (lw.ci == 0.0 && lw.ae == 0.0 && lw.sc == 0.0 && lw.r == 0.0) {
            // Nothing to optimize; the row measures the untrained network.
            nn::ModelConfig mc;
            mc.width = static_cast<int>(ds.header.width);
            mc.height = static_cast<int>(ds.header.height);
            mc.channels = static_cast<int>(ds.header.channels);
            mc.feature_size = static_cast<int>(ds.header.feature_size);
            mc.dof = static_cast<int>(ds.header.dof);
            mc.alpha = cfg.alpha;
            mc.command_scale = cfg.command_clamp;
            models.push_back(nn::init_weights<float>(mc, cfg.seed));
        } else {
            models.push_back(train::train(ds, cfg, lw).best);
        }
    }

    std::vector<std::pair<std::string, EpisodeFn>> entries;
    entries.push_back(
        {"oracle", [&](std::uint64_t s) { return rollout_oracle(s, ctx, Controller::Vs); }});
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const nn::ModelWeights<float>* w = &models[i];
        entries.push_back({variants[i].name, [&, w](std::uint64_t s) {
                               return rollout_neural(*w, s, ctx, Controller::Vs);
                           }});
    }
    return run_rows(entries, n_episodes, eval_seed, jobs);
}

void write_episode_trace(const RolloutReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace file for writing: " + path);
    const int dof = report.steps.empty() ? 0 : static_cast<int>(report.steps[0].qdot.size());
    out << "step,t,pe,oe,ce,cs,cam_angular_speed";
    for (int i = 0; i < dof; ++i) out << ",qdot" << i;
    out << "\n";
    char buf[64];
    for (std::size_t k = 0; k < report.steps.size(); ++k) {
        const StepTrace& s = report.steps[k];
        const double ce = s.qdot.norm();
        const double cs = k == 0 ? 0.0
                                 : (s.qdot - report.steps[k - 1].qdot).norm() /
                                       (s.t - report.steps[k - 1].t);
        out << k;
        for (double v : {s.t, s.pe, s.oe, ce, cs, s.cam_angular_speed}) {
            std::snprintf(buf, sizeof buf, ",%.9e", v);
            out << buf;
        }
        for (int i = 0; i < dof; ++i) {
            std::snprintf(buf, sizeof buf, ",%.9e", s.qdot[i]);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing trace: " + path);
}

void write_summary(const std::vector<BenchmarkRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open summary file for writing: " + path);
    out << "name,episodes,successes,sr,ce,cs,pe,oe\n";
    char buf[64];
    for (const BenchmarkRow& r : rows) {
        out << r.name << "," << r.episodes << "," << r.successes;
        for (double v : {r.sr(), r.ce, r.cs, r.pe, r.oe}) {
            std::snprintf(buf, sizeof buf, ",%.9e", v);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw IoError("failed while writing summary: " + path);
}

}  // namespace nfvs::eval
