#include <CLI11.hpp>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "nfvs/config.hpp"
#include "nfvs/datagen.hpp"
#include "nfvs/dataset.hpp"
#include "nfvs/errors.hpp"
#include "nfvs/evaluation.hpp"
#include "nfvs/model.hpp"
#include "nfvs/report.hpp"
#include "nfvs/training.hpp"

namespace {

using namespace nfvs;

struct CommonArgs {
    std::string config;
    std::uint64_t seed = 1;
    int jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool with_jobs) {
    cmd->add_option("--config", args.config, "config file (see --help for keys)")
        ->required();
    cmd->add_option("--seed", args.seed, "master seed for every random draw")
        ->capture_default_str();
    if (with_jobs)
        cmd->add_option("--jobs", args.jobs, "worker thread cap")
            ->check(CLI::Range(1, 512))
            ->capture_default_str();
}

int cmd_collect(const CommonArgs& common, const std::string& out, int demos_flag) {
    const cfg::AppConfig conf = cfg::load(common.config);
    const int requested = demos_flag > 0 ? demos_flag : conf.demos;
    const Dataset ds =
        build_dataset(conf.chain, conf.datagen, requested, common.seed, conf.split);
    save_dataset(ds, out);
    const int accepted = int(ds.demos.size()) / 2;
    std::printf("collected %d of %d demonstrations (%u records, %ux%u) -> %s\n", accepted,
                requested, ds.header.record_count, ds.header.width, ds.header.height,
                out.c_str());
    return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data, const std::string& out,
              const std::string& variant, const std::vector<double>& weight_flags,
              int epochs_flag) {
    const cfg::AppConfig conf = cfg::load(common.config);
    const Dataset ds = load_dataset(data);

    train::TrainConfig tc = conf.train_config();
    tc.seed = common.seed;
    tc.jobs = common.jobs;
    if (epochs_flag > 0) tc.epochs = epochs_flag;

    train::LossWeights lw = conf.loss_weights;
    if (!weight_flags.empty()) {
        if (weight_flags.size() != 4)
            throw ConfigError("--loss-weights expects four comma-separated values");
        lw = {weight_flags[0], weight_flags[1], weight_flags[2], weight_flags[3]};
    }

    const auto checkpoint = [&](int epoch, const nn::ModelWeights<float>& w, bool is_best) {
        if (is_best) {
            nn::save_weights(w, out);
        } else {
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, ".epoch%04d", epoch);
            nn::save_weights(w, out + suffix);
        }
        std::printf("epoch %4d%s\n", epoch, is_best ? "  (new best, saved)" : "  (checkpoint)");
        std::fflush(stdout);
    };

    const train::TrainResult res = variant == "e2e"
                                       ? train::train_e2e(ds, tc, conf.e2e_ae_weight, checkpoint)
                                       : train::train(ds, tc, lw, checkpoint);
    nn::save_weights(res.best, out);
    train::write_loss_curves(res.curves, out + ".curves.csv");
    const train::EpochRow& best = res.curves[std::size_t(res.best_epoch)];
    std::printf("best epoch %d: val ci %.6e ae %.6e sc %.6e r %.6e -> %s\n", res.best_epoch,
                best.val.ci, best.val.ae, best.val.sc, best.val.r, out.c_str());
    return 0;
}

int cmd_eval(const CommonArgs& common, const std::string& weights_path,
             const std::string& e2e_path, const std::string& out_dir, int episodes_flag,
             const std::string& controller) {
    const cfg::AppConfig conf = cfg::load(common.config);
    const eval::RolloutContext ctx = conf.rollout_context();
    const int episodes = episodes_flag > 0 ? episodes_flag : conf.episodes;
    const eval::Controller variant =
        controller == "nullspace" ? eval::Controller::Nullspace : eval::Controller::Vs;

    nn::ModelWeights<float> ours, e2e;
    const bool have_ours = !weights_path.empty();
    const bool have_e2e = !e2e_path.empty();
    if (have_ours)
        ours = nn::load_weights(weights_path, conf.model_config(nn::Variant::Perception));
    if (have_e2e) e2e = nn::load_weights(e2e_path, conf.model_config(nn::Variant::EndToEnd));

    const eval::BenchmarkResult res =
        eval::benchmark(have_ours ? &ours : nullptr, have_e2e ? &e2e : nullptr, episodes,
                        common.seed, ctx, variant, common.jobs);

    std::filesystem::create_directories(out_dir);
    eval::write_summary(res.rows, out_dir + "/summary.csv");
    for (std::size_t r = 0; r < res.rows.size(); ++r)
        for (std::size_t i = 0; i < res.reports[r].size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "/%s_ep%03zu.csv", res.rows[r].name.c_str(), i);
            eval::write_episode_trace(res.reports[r][i], out_dir + name);
        }

    std::printf("%-12s %9s %9s %9s %9s %9s\n", "entry", "sr", "ce", "cs", "pe", "oe");
    for (const eval::BenchmarkRow& row : res.rows)
        std::printf("%-12s %9.3f %9.4f %9.3f %9.4f %9.4f\n", row.name.c_str(), row.sr(),
                    row.ce, row.cs, row.pe, row.oe);
    std::printf("wrote %s/summary.csv and per-episode traces\n", out_dir.c_str());
    return 0;
}

int cmd_report(const std::string& trace_dir, const std::string& out) {
    const report::Bands bands = report::collect_bands(trace_dir);
    const std::string path = out.empty() ? trace_dir + "/bands.csv" : out;
    report::write_bands(bands, path);
    std::printf("aggregated %d episode(s), %zu steps -> %s\n",
                bands.count.empty() ? 0 : bands.count[0], bands.t.size(), path.c_str());
    return 0;
}

// Weights files are self-describing; walk the container without an expected
// architecture so any model variant can be inspected.
int describe_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    in.seekg(4);
    std::uint32_t version = 0;
    std::uint64_t fingerprint = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&fingerprint), sizeof fingerprint);
    if (!in) throw IoError("weights file truncated: " + path);
    std::printf("weights file %s\n  version %u\n  architecture fingerprint %016llx\n",
                path.c_str(), version, static_cast<unsigned long long>(fingerprint));

    std::size_t total = 0;
    int tensors = 0;
    while (in.peek() != std::ifstream::traits_type::eof()) {
        std::uint32_t name_len = 0;
        in.read(reinterpret_cast<char*>(&name_len), sizeof name_len);
        if (!in || name_len > 256) throw IoError("weights file corrupt: " + path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        std::uint32_t rank = 0;
        in.read(reinterpret_cast<char*>(&rank), sizeof rank);
        if (!in || rank > 4) throw IoError("weights file corrupt: " + path);
        std::size_t count = 1;
        std::string shape;
        for (std::uint32_t d = 0; d < rank; ++d) {
            std::uint32_t dim = 0;
            in.read(reinterpret_cast<char*>(&dim), sizeof dim);
            count *= dim;
            if (!shape.empty()) shape += "x";
            shape += std::to_string(dim);
        }
        in.seekg(std::streamoff(count * 4), std::ios::cur);
        if (!in) throw IoError("weights file truncated: " + path);
        std::printf("  %-24s %s\n", name.c_str(), shape.c_str());
        total += count;
        ++tensors;
    }
    std::printf("  %d tensors, %zu parameters\n", tensors, total);
    return 0;
}

int cmd_inspect(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    in.close();

    if (std::memcmp(magic, "NFVW", 4) == 0) return describe_weights(path);
    if (std::memcmp(magic, "NFVS", 4) != 0)
        throw ConfigError(path + " is neither a dataset nor a weights file");

    const Dataset ds = load_dataset(path);
    int train_demos = 0, val_demos = 0;
    for (const Demo& d : ds.demos) (d.meta.split == 0 ? train_demos : val_demos) += 1;
    std::printf("dataset %s\n", path.c_str());
    std::printf("  records        %u\n", ds.header.record_count);
    std::printf("  demos          %u (%d train, %d val)\n", ds.header.demo_count,
                train_demos, val_demos);
    std::printf("  image          %ux%ux%u\n", ds.header.width, ds.header.height,
                ds.header.channels);
    std::printf("  dof            %u\n", ds.header.dof);
    std::printf("  feature size   %u\n", ds.header.feature_size);
    std::printf("  period         %.6f s\n", ds.header.period);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"neural-feedback visual servoing: data collection, training, evaluation"};
    app.require_subcommand(1);
    app.footer(cfg::help_text());

    CommonArgs collect_args, train_args, eval_args;
    std::string out, data, variant = "ours", controller = "vs";
    std::string weights_path, e2e_path, trace_dir, report_out, inspect_path;
    std::vector<double> weight_flags;
    int demos_flag = 0, epochs_flag = 0, episodes_flag = 0;

    CLI::App* collect = app.add_subcommand("collect", "run oracle demos into a dataset file");
    add_common(collect, collect_args, false);
    collect->add_option("--out", out, "dataset file to write")->required();
    collect->add_option("--demos", demos_flag, "demo count (default: config data.demos)");

    CLI::App* train = app.add_subcommand("train", "fit a model on a collected dataset");
    add_common(train, train_args, true);
    train->add_option("--data", data, "dataset file")->required();
    train->add_option("--out", out, "weights file to write")->required();
    train->add_option("--variant", variant, "model variant")
        ->check(CLI::IsMember({"ours", "e2e"}))
        ->capture_default_str();
    train->add_option("--loss-weights", weight_flags, "ci,ae,sc,r override")->delimiter(',');
    train->add_option("--epochs", epochs_flag, "epoch count (default: config train.epochs)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "closed-loop benchmark with traces");
    add_common(eval_cmd, eval_args, true);
    eval_cmd->add_option("--weights", weights_path, "perception weights (ours row)");
    eval_cmd->add_option("--e2e", e2e_path, "end-to-end weights (baseline row)");
    eval_cmd->add_option("--out", out, "directory for traces and the summary")->required();
    eval_cmd->add_option("--episodes", epochs_flag, "episode count (default: config eval.episodes)");
    eval_cmd->add_option("--controller", controller, "servo variant")
        ->check(CLI::IsMember({"vs", "nullspace"}))
        ->capture_default_str();

    CLI::App* report_cmd = app.add_subcommand("report", "quantile bands from episode traces");
    report_cmd->add_option("--traces", trace_dir, "directory of episode trace files")
        ->required();
    report_cmd->add_option("--out", report_out, "band file (default: <traces>/bands.csv)");

    CLI::App* inspect = app.add_subcommand("inspect", "dump a dataset or weights header");
    inspect->add_option("path", inspect_path, "dataset or weights file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (collect->parsed()) return cmd_collect(collect_args, out, demos_flag);
        if (train->parsed())
            return cmd_train(train_args, data, out, variant, weight_flags, epochs_flag);
        if (eval_cmd->parsed())
            return cmd_eval(eval_args, weights_path, e2e_path, out, epochs_flag, controller);
        if (report_cmd->parsed()) return cmd_report(trace_dir, report_out);
        if (inspect->parsed()) return cmd_inspect(inspect_path);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const DimensionMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
