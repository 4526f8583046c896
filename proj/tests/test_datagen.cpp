#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <vector>

#include "fixtures.hpp"
#include "nfvs/datagen.hpp"
#include "nfvs/errors.hpp"
#include "nfvs/rng.hpp"

using namespace nfvs;

namespace {

// Quarter-resolution camera with the same field of view as the default.
// Normalized-feature dynamics are resolution independent, so demos behave
// exactly like full-resolution ones while rendering four times faster.
DatagenConfig test_cfg() {
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

const Dataset& small_dataset() {
    static const Dataset ds =
        build_dataset(fixtures::seven_joint_chain(), test_cfg(), 6, 99, 0.835);
    return ds;
}

std::vector<char> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("camera ik reaches the desired pose across the workspace") {
    const DatagenConfig cfg = test_cfg();
    const KinematicChain chain = fixtures::seven_joint_chain();
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Scene sc = randomize_scene(seed, cfg.sim);
        const Pose target = desired_camera_pose(sc, cfg.sim);
        const VecX q = solve_camera_ik(chain, cfg.eye_in_hand, target, cfg.ready_posture);
        const Pose cam = forward_kinematics(chain, q).compose(cfg.eye_in_hand);
        REQUIRE((cam.translation - target.translation).norm() < 1e-9);
        REQUIRE(quat_distance(cam.rotation, target.rotation) < 1e-8);
        for (int i = 0; i < chain.dof(); ++i) {
            REQUIRE(q[i] >= chain.joints[i].limit_lower);
            REQUIRE(q[i] <= chain.joints[i].limit_upper);
        }
    }
}

TEST_CASE("a demonstration produces two converged phases with final-frame references") {
    const DatagenConfig cfg = test_cfg();
    const KinematicChain chain = fixtures::seven_joint_chain();
    for (std::uint64_t seed = 2; seed < 5; ++seed) {
        const std::vector<Demo> demos = oracle_demo(chain, cfg, seed);
        REQUIRE(demos.size() == 2);
        const Scene sc = randomize_scene(seed, cfg.sim);

        for (int phase = 0; phase < 2; ++phase) {
            const Demo& d = demos[phase];
            CHECK(d.meta.demo_id == static_cast<std::uint32_t>(phase));
            CHECK(d.meta.scene_seed == seed);
            CHECK(d.meta.success);
            REQUIRE(!d.records.empty());
            CHECK(d.meta.reference_image == d.records.back().image);

            const auto [s_ref, z_ref] = demo_reference(sc, cfg, seed, phase);
            CHECK((d.meta.target_depths - z_ref.cast<float>()).cwiseAbs().maxCoeff() == 0.0f);

            // The final recorded state has converged onto the reference.
            const VecX q_final = d.records.back().q.cast<double>();
            const Pose cam = forward_kinematics(chain, q_final).compose(cfg.eye_in_hand);
            const auto [s_final, z_final] = ground_truth_features(sc, cam, cfg.camera);
            CHECK((s_final - s_ref).cwiseAbs().maxCoeff() <= cfg.feature_tolerance);
        }
    }
}

TEST_CASE("stored jacobians and commands reproduce bitwise from stored state") {
    const DatagenConfig cfg = test_cfg();
    const KinematicChain chain = fixtures::seven_joint_chain();
    const Mat6 v = twist_transform(cfg.eye_in_hand);
    const std::uint64_t seed = 7;
    const std::vector<Demo> demos = oracle_demo(chain, cfg, seed);
    const Scene sc = randomize_scene(seed, cfg.sim);

    for (int phase = 0; phase < 2; ++phase) {
        const Demo& d = demos[phase];
        const auto [s_ref, z_ref] = demo_reference(sc, cfg, seed, phase);
        const VecX z_used = d.meta.target_depths.cast<double>();

        for (const SampleRecord& rec : d.records) {
            const VecX q = rec.q.cast<double>();
            const MatX j_recomputed = robot_jacobian(chain, q);
            REQUIRE((j_recomputed.cast<float>() - rec.jacobian).cwiseAbs().maxCoeff() <=
                    1e-12f);

            const Pose cam = forward_kinematics(chain, q).compose(cfg.eye_in_hand);
            const auto [s, z_now] = ground_truth_features(sc, cam, cfg.camera);
            const MatX jhat = compose_jacobian(interaction_matrix(s, z_used), v,
                                               rec.jacobian.cast<double>());
            const VecX qdot = vs_command(s, s_ref, jhat, cfg.control);
            REQUIRE((qdot.cast<float>() - rec.qdot).cwiseAbs().maxCoeff() <= 1e-12f);
        }
    }
}

TEST_CASE("an unperturbed start pose converges immediately with near-zero commands") {
    DatagenConfig cfg = test_cfg();
    cfg.start_offset_xy = 0.0;
    cfg.start_offset_z = 0.0;
    cfg.start_angle_deg = 0.0;
    const std::vector<Demo> demos = oracle_demo(fixtures::seven_joint_chain(), cfg, 11);

    // Phase 0's target is the pose the arm already occupies.
    REQUIRE(demos[0].records.size() == 1);
    CHECK(demos[0].records[0].qdot.cast<double>().cwiseAbs().maxCoeff() < 1e-3);
    REQUIRE(demos[1].records.size() == 1);
}

TEST_CASE("dataset assembly splits whole demonstrations and is reproducible") {
    const Dataset& ds = small_dataset();

    // Six demonstrations of two phases each, none diverged.
    REQUIRE(ds.header.demo_count == 12);
    CHECK(ds.header.dof == 7);
    CHECK(ds.header.feature_size == 8);
    CHECK(ds.header.width == 32);
    CHECK(ds.header.period == doctest::Approx(1.0 / 30.0));

    std::size_t records = 0;
    for (std::size_t i = 0; i < ds.demos.size(); ++i) {
        const Demo& d = ds.demos[i];
        CHECK(d.meta.demo_id == i);
        CHECK(d.meta.success);
        records += d.records.size();
        // Phases of one demonstration share the scene and the partition.
        if (i % 2 == 1) {
            CHECK(d.meta.scene_seed == ds.demos[i - 1].meta.scene_seed);
            CHECK(d.meta.split == ds.demos[i - 1].meta.split);
        }
    }
    CHECK(records == ds.header.record_count);

    // round(0.835 * 6) = 5 demonstrations (10 demos) train, 1 (2 demos) val.
    int train = 0, val = 0;
    for (const Demo& d : ds.demos) (d.meta.split == 0 ? train : val)++;
    CHECK(train == 10);
    CHECK(val == 2);

    save_dataset(ds, "dg_a.nfvs");
    const Dataset again =
        build_dataset(fixtures::seven_joint_chain(), test_cfg(), 6, 99, 0.835);
    save_dataset(again, "dg_b.nfvs");
    CHECK(file_bytes("dg_a.nfvs") == file_bytes("dg_b.nfvs"));

    // Loading and re-saving preserves every byte.
    save_dataset(load_dataset("dg_a.nfvs"), "dg_c.nfvs");
    CHECK(file_bytes("dg_a.nfvs") == file_bytes("dg_c.nfvs"));
    std::remove("dg_a.nfvs");
    std::remove("dg_b.nfvs");
    std::remove("dg_c.nfvs");
}

TEST_CASE("dataset io rejects corrupt inputs") {
    const Dataset& ds = small_dataset();
    save_dataset(ds, "dg_err.nfvs");

    std::vector<char> bytes = file_bytes("dg_err.nfvs");
    {
        std::ofstream out("dg_err_magic.nfvs", std::ios::binary);
        std::vector<char> bad = bytes;
        bad[0] = 'X';
        out.write(bad.data(), static_cast<std::streamsize>(bad.size()));
    }
    CHECK_THROWS_AS(load_dataset("dg_err_magic.nfvs"), IoError);
    {
        std::ofstream out("dg_err_trunc.nfvs", std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    }
    CHECK_THROWS_AS(load_dataset("dg_err_trunc.nfvs"), IoError);
    CHECK_THROWS_AS(load_dataset("dg_err_missing.nfvs"), IoError);
    CHECK_THROWS_AS(save_dataset(ds, "/nonexistent_dir/x.nfvs"), IoError);

    Dataset tampered = ds;
    tampered.demos[0].records[3].k = 77;
    CHECK_THROWS_AS(tampered.validate(), IoError);
    tampered = ds;
    tampered.header.record_count += 1;
    CHECK_THROWS_AS(tampered.validate(), IoError);

    std::remove("dg_err.nfvs");
    std::remove("dg_err_magic.nfvs");
    std::remove("dg_err_trunc.nfvs");
}

TEST_CASE("pair batches cover every within-demo pair exactly once") {
    const Dataset& ds = small_dataset();

    std::size_t expected_train_pairs = 0;
    for (const Demo& d : ds.demos)
        if (d.meta.split == 0) expected_train_pairs += d.records.size() - 1;

    const auto batches = pair_batches(ds, 0, 8, 1234);
    std::vector<std::pair<int, int>> seen;
    for (std::size_t b = 0; b < batches.size(); ++b) {
        // Full batches carry batch_size/2 pairs; only the last may be short.
        if (b + 1 < batches.size()) CHECK(batches[b].size() == 4);
        for (const PairRef& p : batches[b]) {
            REQUIRE(p.demo >= 0);
            REQUIRE(p.demo < static_cast<int>(ds.demos.size()));
            CHECK(ds.demos[p.demo].meta.split == 0);
            REQUIRE(p.k + 1 < static_cast<int>(ds.demos[p.demo].records.size()));
            seen.emplace_back(p.demo, p.k);
        }
    }
    CHECK(seen.size() == expected_train_pairs);

    // Another shuffle seed permutes the same multiset.
    const auto batches2 = pair_batches(ds, 0, 8, 777);
    std::vector<std::pair<int, int>> seen2;
    for (const auto& b : batches2)
        for (const PairRef& p : b) seen2.emplace_back(p.demo, p.k);
    CHECK(seen != seen2);
    std::sort(seen.begin(), seen.end());
    std::sort(seen2.begin(), seen2.end());
    CHECK(seen == seen2);
    CHECK(std::unique(seen.begin(), seen.end()) == seen.end());

    CHECK_THROWS_AS(pair_batches(ds, 0, 7, 1), ConfigError);
    CHECK_THROWS_AS(pair_batches(ds, 0, 0, 1), ConfigError);
}

TEST_CASE("demo generation rejects invalid configuration") {
    DatagenConfig cfg = test_cfg();
    cfg.feature_tolerance = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = test_cfg();
    cfg.ready_posture = VecX();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = test_cfg();
    cfg.phase_a_timeout = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    CHECK_THROWS_AS(build_dataset(fixtures::seven_joint_chain(), test_cfg(), 1, 1, 0.8),
                    ConfigError);
    CHECK_THROWS_AS(build_dataset(fixtures::seven_joint_chain(), test_cfg(), 4, 1, 1.0),
                    ConfigError);
}
