#include "nfvs/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "nfvs/errors.hpp"

extern char** environ;

namespace nfvs::cfg {
namespace {

constexpr const char* kMagic = "nfvs-config 1";

using Values = std::vector<double>;

enum class Kind { Real, Integer, Boolean };

struct Entry {
    std::string section, key, desc;
    Kind kind = Kind::Real;
    int count = 1;     // numbers the value must hold
    double lo = 0.0;   // inclusive per-element range (Real and Integer)
    double hi = 0.0;
    std::function<void(AppConfig&, const Values&)> set;
    std::function<Values(const AppConfig&)> get;
};

// One flat table drives parsing, environment overrides, help, and the
// default-file writer, so no key can exist without a default, a range, and
// a help line.
const std::vector<Entry>& registry() {
    static const std::vector<Entry> table = [] {
        std::vector<Entry> r;
        using Ref = std::function<double&(AppConfig&)>;
        const auto real = [&r](const char* sec, const char* key, double lo, double hi,
                               const char* desc, const Ref& f) {
            Entry e{sec, key, desc, Kind::Real, 1, lo, hi};
            e.set = [f](AppConfig& c, const Values& v) { f(c) = v[0]; };
            e.get = [f](const AppConfig& c) { return Values{f(const_cast<AppConfig&>(c))}; };
            r.push_back(std::move(e));
        };
        using IntRef = std::function<int&(AppConfig&)>;
        const auto integer = [&r](const char* sec, const char* key, int lo, int hi,
                                  const char* desc, const IntRef& f) {
            Entry e{sec, key, desc, Kind::Integer, 1, double(lo), double(hi)};
            e.set = [f](AppConfig& c, const Values& v) { f(c) = int(v[0]); };
            e.get = [f](const AppConfig& c) {
                return Values{double(f(const_cast<AppConfig&>(c)))};
            };
            r.push_back(std::move(e));
        };
        using BoolRef = std::function<bool&(AppConfig&)>;
        const auto boolean = [&r](const char* sec, const char* key, const char* desc,
                                  const BoolRef& f) {
            Entry e{sec, key, desc, Kind::Boolean, 1, 0.0, 1.0};
            e.set = [f](AppConfig& c, const Values& v) { f(c) = v[0] != 0.0; };
            e.get = [f](const AppConfig& c) {
                return Values{f(const_cast<AppConfig&>(c)) ? 1.0 : 0.0};
            };
            r.push_back(std::move(e));
        };

        for (int j = 0; j < 7; ++j) {
            Entry e{"chain", "joint" + std::to_string(j),
                    "DH row: a alpha d limit_lower limit_upper velocity_limit",
                    Kind::Real, 6, -100.0, 100.0};
            e.set = [j](AppConfig& c, const Values& v) {
                DhJoint& jt = c.chain.joints[std::size_t(j)];
                jt.a = v[0];
                jt.alpha = v[1];
                jt.d = v[2];
                jt.limit_lower = v[3];
                jt.limit_upper = v[4];
                jt.velocity_limit = v[5];
            };
            e.get = [j](const AppConfig& c) {
                const DhJoint& jt = c.chain.joints[std::size_t(j)];
                return Values{jt.a, jt.alpha, jt.d, jt.limit_lower, jt.limit_upper,
                              jt.velocity_limit};
            };
            r.push_back(std::move(e));
        }

        integer("camera", "width", 16, 1024, "image width, pixels",
                [](AppConfig& c) -> int& { return c.datagen.camera.width; });
        integer("camera", "height", 16, 1024, "image height, pixels",
                [](AppConfig& c) -> int& { return c.datagen.camera.height; });
        real("camera", "fx", 1.0, 1e5, "focal length x, pixels",
             [](AppConfig& c) -> double& { return c.datagen.camera.fx; });
        real("camera", "fy", 1.0, 1e5, "focal length y, pixels",
             [](AppConfig& c) -> double& { return c.datagen.camera.fy; });
        real("camera", "cx", 0.0, 1e4, "principal point x, pixels",
             [](AppConfig& c) -> double& { return c.datagen.camera.cx; });
        real("camera", "cy", 0.0, 1e4, "principal point y, pixels",
             [](AppConfig& c) -> double& { return c.datagen.camera.cy; });
        {
            Entry e{"camera", "mount",
                    "camera pose on the flange: tx ty tz qw qx qy qz (unit quaternion)",
                    Kind::Real, 7, -10.0, 10.0};
            e.set = [](AppConfig& c, const Values& v) {
                Eigen::Quaterniond q(v[3], v[4], v[5], v[6]);
                if (std::abs(q.norm() - 1.0) > 0.01)
                    throw ConfigError("camera.mount rotation is not a unit quaternion");
                c.datagen.eye_in_hand.translation = Vec3(v[0], v[1], v[2]);
                c.datagen.eye_in_hand.rotation = q.normalized();
            };
            e.get = [](const AppConfig& c) {
                const Pose& p = c.datagen.eye_in_hand;
                return Values{p.translation.x(), p.translation.y(), p.translation.z(),
                              p.rotation.w(),    p.rotation.x(),    p.rotation.y(),
                              p.rotation.z()};
            };
            r.push_back(std::move(e));
        }

        real("sim", "workspace_x_min", -2.0, 2.0, "object center window, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.workspace_x_min; });
        real("sim", "workspace_x_max", -2.0, 2.0, "object center window, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.workspace_x_max; });
        real("sim", "workspace_y_min", -2.0, 2.0, "object center window, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.workspace_y_min; });
        real("sim", "workspace_y_max", -2.0, 2.0, "object center window, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.workspace_y_max; });
        real("sim", "box_side_min", 0.01, 1.0, "object footprint range, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.box_side_min; });
        real("sim", "box_side_max", 0.01, 1.0, "object footprint range, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.box_side_max; });
        real("sim", "box_height_min", 0.01, 1.0, "object height range, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.box_height_min; });
        real("sim", "box_height_max", 0.01, 1.0, "object height range, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.box_height_max; });
        real("sim", "brightness_min", 0.1, 10.0, "scene brightness range",
             [](AppConfig& c) -> double& { return c.datagen.sim.brightness_min; });
        real("sim", "brightness_max", 0.1, 10.0, "scene brightness range",
             [](AppConfig& c) -> double& { return c.datagen.sim.brightness_max; });
        real("sim", "standoff", 0.05, 2.0, "desired camera height above the object, m",
             [](AppConfig& c) -> double& { return c.datagen.sim.standoff; });

        real("control", "lambda", 1e-6, 100.0, "servo gain, 1/s",
             [](AppConfig& c) -> double& { return c.datagen.control.lambda; });
        real("control", "sigma", 0.0, 10.0, "pseudo-inverse damping",
             [](AppConfig& c) -> double& { return c.datagen.control.sigma; });
        real("control", "command_clamp", 1e-3, 100.0, "per-joint velocity bound, rad/s",
             [](AppConfig& c) -> double& { return c.datagen.control.command_clamp; });
        real("control", "period", 1e-4, 1.0, "control period, s",
             [](AppConfig& c) -> double& { return c.datagen.control.period; });

        integer("data", "demos", 1, 100000, "demonstrations to collect",
                [](AppConfig& c) -> int& { return c.demos; });
        real("data", "split", 0.0, 1.0, "fraction of demos in the train partition",
             [](AppConfig& c) -> double& { return c.split; });
        real("data", "start_offset_xy", 0.0, 1.0, "demo start window around desired, m",
             [](AppConfig& c) -> double& { return c.datagen.start_offset_xy; });
        real("data", "start_offset_z", 0.0, 1.0, "demo start window around desired, m",
             [](AppConfig& c) -> double& { return c.datagen.start_offset_z; });
        real("data", "start_angle_deg", 0.0, 90.0, "demo start orientation window, deg",
             [](AppConfig& c) -> double& { return c.datagen.start_angle_deg; });
        integer("data", "max_start_tries", 1, 1000000, "start pose rejection budget",
                [](AppConfig& c) -> int& { return c.datagen.max_start_tries; });
        real("data", "feature_tolerance", 1e-9, 1.0, "demo convergence tolerance",
             [](AppConfig& c) -> double& { return c.datagen.feature_tolerance; });
        integer("data", "phase_a_timeout", 1, 1000000, "steps before a demo is abandoned",
                [](AppConfig& c) -> int& { return c.datagen.phase_a_timeout; });
        integer("data", "phase_b_timeout", 1, 1000000, "steps before a demo is abandoned",
                [](AppConfig& c) -> int& { return c.datagen.phase_b_timeout; });
        {
            Entry e{"data", "ready_posture", "joint configuration seeding the demo IK",
                    Kind::Real, 7, -7.0, 7.0};
            e.set = [](AppConfig& c, const Values& v) {
                c.datagen.ready_posture = Eigen::Map<const VecX>(v.data(), 7);
            };
            e.get = [](const AppConfig& c) {
                const VecX& q = c.datagen.ready_posture;
                return Values(q.data(), q.data() + q.size());
            };
            r.push_back(std::move(e));
        }

        integer("train", "epochs", 1, 1000000, "training epochs",
                [](AppConfig& c) -> int& { return c.epochs; });
        real("train", "learning_rate", 1e-12, 1.0, "Adam step size",
             [](AppConfig& c) -> double& { return c.learning_rate; });
        integer("train", "batch_size", 2, 65536, "frames per batch (even; two per pair)",
                [](AppConfig& c) -> int& { return c.batch_size; });
        real("train", "alpha", 1e-6, 100.0, "feature head output scale",
             [](AppConfig& c) -> double& { return c.alpha; });
        real("train", "loss_ci", 0.0, 1e6, "control-imitation weight",
             [](AppConfig& c) -> double& { return c.loss_weights.ci; });
        real("train", "loss_ae", 0.0, 1e6, "auto-encoding weight",
             [](AppConfig& c) -> double& { return c.loss_weights.ae; });
        real("train", "loss_sc", 0.0, 1e6, "state-consistency weight",
             [](AppConfig& c) -> double& { return c.loss_weights.sc; });
        real("train", "loss_r", 0.0, 1e6, "feature-regularizer weight",
             [](AppConfig& c) -> double& { return c.loss_weights.r; });
        real("train", "e2e_ae_weight", 0.0, 1e6, "auto-encoding weight for the baseline",
             [](AppConfig& c) -> double& { return c.e2e_ae_weight; });
        real("train", "noise_stddev", 0.0, 1.0, "augmentation noise level",
             [](AppConfig& c) -> double& { return c.augment.noise_stddev; });
        real("train", "brightness_min", -1.0, 1.0, "augmentation brightness shift range",
             [](AppConfig& c) -> double& { return c.augment.brightness_min; });
        real("train", "brightness_max", -1.0, 1.0, "augmentation brightness shift range",
             [](AppConfig& c) -> double& { return c.augment.brightness_max; });
        real("train", "contrast_min", -1.0, 1.0, "augmentation contrast shift range",
             [](AppConfig& c) -> double& { return c.augment.contrast_min; });
        real("train", "contrast_max", -1.0, 1.0, "augmentation contrast shift range",
             [](AppConfig& c) -> double& { return c.augment.contrast_max; });
        integer("train", "checkpoint_every", 0, 1000000, "epochs between checkpoints (0: off)",
                [](AppConfig& c) -> int& { return c.checkpoint_every; });
        boolean("train", "detach_interaction", "treat the interaction matrix as constant",
                [](AppConfig& c) -> bool& { return c.detach_interaction; });

        integer("eval", "episodes", 1, 1000000, "closed-loop episodes per entry",
                [](AppConfig& c) -> int& { return c.episodes; });
        real("eval", "max_duration", 0.1, 10000.0, "episode time budget, s",
             [](AppConfig& c) -> double& { return c.episode.max_duration; });
        real("eval", "pe_threshold", 1e-4, 10.0, "success position error bound, m",
             [](AppConfig& c) -> double& { return c.episode.pe_threshold; });
        real("eval", "oe_threshold", 1e-4, 3.2, "success orientation error bound, rad",
             [](AppConfig& c) -> double& { return c.episode.oe_threshold; });
        boolean("eval", "stop_at_convergence", "freeze the episode at first convergence",
                [](AppConfig& c) -> bool& { return c.episode.stop_at_convergence; });
        {
            Entry e{"eval", "initial_posture", "fixed joint start for every episode",
                    Kind::Real, 7, -7.0, 7.0};
            e.set = [](AppConfig& c, const Values& v) {
                c.initial_posture = Eigen::Map<const VecX>(v.data(), 7);
            };
            e.get = [](const AppConfig& c) {
                const VecX& q = c.initial_posture;
                return Values(q.data(), q.data() + q.size());
            };
            r.push_back(std::move(e));
        }
        return r;
    }();
    return table;
}

const Entry* find_entry(const std::string& section, const std::string& key) {
    for (const Entry& e : registry())
        if (e.section == section && e.key == key) return &e;
    return nullptr;
}

std::string trimmed(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// Parses and range-checks one value string against the entry.
Values parse_value(const Entry& e, const std::string& text, const std::string& where) {
    std::istringstream in(text);
    Values out;
    std::string tok;
    while (in >> tok) {
        double v = 0.0;
        if (e.kind == Kind::Boolean) {
            if (tok == "true" || tok == "1") v = 1.0;
            else if (tok == "false" || tok == "0") v = 0.0;
            else
                throw ConfigError(where + ": " + e.section + "." + e.key +
                                  " expects true or false, got '" + tok + "'");
        } else {
            std::size_t used = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != tok.size() || !std::isfinite(v))
                throw ConfigError(where + ": " + e.section + "." + e.key +
                                  " has a malformed number '" + tok + "'");
            if (e.kind == Kind::Integer && v != std::floor(v))
                throw ConfigError(where + ": " + e.section + "." + e.key +
                                  " expects an integer, got '" + tok + "'");
            if (v < e.lo || v > e.hi) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "%s: %s.%s value %s outside [%g, %g]",
                              where.c_str(), e.section.c_str(), e.key.c_str(), tok.c_str(),
                              e.lo, e.hi);
                throw ConfigError(buf);
            }
        }
        out.push_back(v);
    }
    if (static_cast<int>(out.size()) != e.count)
        throw ConfigError(where + ": " + e.section + "." + e.key + " expects " +
                          std::to_string(e.count) + " value(s), got " +
                          std::to_string(out.size()));
    return out;
}

void parse_into(AppConfig& out, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    bool saw_magic = false;
    std::set<std::string> seen;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trimmed(line);
        if (s.empty() || s[0] == '#') continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (!saw_magic) {
            if (s != kMagic)
                throw ConfigError(where + ": expected '" + kMagic + "' as the first entry");
            saw_magic = true;
            continue;
        }
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError(where + ": malformed section header '" + s + "'");
            section = trimmed(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + ": expected 'key = value', got '" + s + "'");
        const std::string key = trimmed(s.substr(0, eq));
        const std::string value = trimmed(s.substr(eq + 1));
        if (section.empty())
            throw ConfigError(where + ": key '" + key + "' appears before any [section]");
        const Entry* e = find_entry(section, key);
        if (!e)
            throw ConfigError(where + ": unknown key '" + section + "." + key + "'");
        const std::string id = section + "." + key;
        if (!seen.insert(id).second)
            throw ConfigError(where + ": duplicate key '" + id + "'");
        e->set(out, parse_value(*e, value, where));
    }
    if (!saw_magic)
        throw ConfigError(origin + ": empty config (expected '" + std::string(kMagic) + "')");
}

std::string env_name(const Entry& e) {
    std::string name = "NFVS_" + e.section + "_" + e.key;
    for (char& c : name) c = char(std::toupper(static_cast<unsigned char>(c)));
    return name;
}

void apply_env(AppConfig& out) {
    // Reject unknown NFVS_ variables so an override typo cannot pass silently.
    for (char** p = environ; *p; ++p) {
        const std::string var = *p;
        if (var.rfind("NFVS_", 0) != 0) continue;
        const std::string name = var.substr(0, var.find('='));
        bool known = false;
        for (const Entry& e : registry())
            if (env_name(e) == name) known = true;
        if (!known)
            throw ConfigError("environment: unknown override variable " + name);
    }
    for (const Entry& e : registry()) {
        const char* v = std::getenv(env_name(e).c_str());
        if (!v) continue;
        e.set(out, parse_value(e, v, "environment (" + env_name(e) + ")"));
    }
}

void format_values(std::string& out, const Entry& e, const Values& vals) {
    char buf[64];
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (i) out += ' ';
        if (e.kind == Kind::Boolean) {
            out += vals[i] != 0.0 ? "true" : "false";
        } else if (e.kind == Kind::Integer) {
            std::snprintf(buf, sizeof buf, "%d", int(vals[i]));
            out += buf;
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", vals[i]);
            out += buf;
        }
    }
}

void check_posture(const KinematicChain& chain, const VecX& q, const char* name) {
    if (q.size() != chain.dof())
        throw ConfigError(std::string(name) + " length does not match the chain");
    for (int i = 0; i < chain.dof(); ++i)
        if (q[i] < chain.joints[std::size_t(i)].limit_lower ||
            q[i] > chain.joints[std::size_t(i)].limit_upper)
            throw ConfigError(std::string(name) + " joint " + std::to_string(i) +
                              " is outside its limits");
}

}  // namespace

AppConfig defaults() {
    AppConfig c;
    auto add = [&](double a, double alpha, double d, double lo, double hi, double vmax) {
        DhJoint j;
        j.a = a;
        j.alpha = alpha;
        j.d = d;
        j.limit_lower = lo;
        j.limit_upper = hi;
        j.velocity_limit = vmax;
        c.chain.joints.push_back(j);
    };
    add(0.0, -M_PI / 2, 0.333, -2.8973, 2.8973, 2.1750);
    add(0.0, M_PI / 2, 0.0, -1.7628, 1.7628, 2.1750);
    add(0.0825, M_PI / 2, 0.316, -2.8973, 2.8973, 2.1750);
    add(-0.0825, -M_PI / 2, 0.0, -3.0718, -0.0698, 2.1750);
    add(0.0, M_PI / 2, 0.384, -2.8973, 2.8973, 2.6100);
    add(0.088, M_PI / 2, 0.0, -0.0175, 3.7525, 2.6100);
    add(0.0, 0.0, 0.107, -2.8973, 2.8973, 2.6100);

    c.datagen.eye_in_hand.rotation =
        Eigen::Quaterniond(Eigen::AngleAxisd(0.1, Vec3(1, 0, 0)));
    c.datagen.eye_in_hand.translation = Vec3(0.03, -0.02, 0.05);

    c.datagen.ready_posture = VecX(7);
    c.datagen.ready_posture << 0.0, -M_PI / 4, 0.0, -3 * M_PI / 4, 0.0, M_PI / 2, M_PI / 4;

    // Camera straight down at (0.45, 0, 0.54): the desired orientation a bit
    // above the workspace, so episodes start 0.11 to 0.21 m from the goal and
    // the orientation-locked controller can hit the position exactly.
    c.initial_posture = VecX(7);
    c.initial_posture << 0.1824, -0.4407, -0.1532, -2.1031, -0.1657, 1.6613, 0.0592;
    return c;
}

void AppConfig::validate() const {
    chain.validate();
    if (chain.dof() != 7) throw ConfigError("the chain section defines exactly 7 joints");
    datagen.validate();
    check_posture(chain, datagen.ready_posture, "data.ready_posture");
    check_posture(chain, initial_posture, "eval.initial_posture");
    if (!(split >= 0.0 && split <= 1.0))
        throw ConfigError("data.split must lie in [0, 1]");
    loss_weights.validate();
    train_config().validate();
    model_config(nn::Variant::Perception).validate();
    episode.validate();
    rollout_context().validate();
}

train::TrainConfig AppConfig::train_config() const {
    train::TrainConfig t;
    t.epochs = epochs;
    t.learning_rate = learning_rate;
    t.batch_size = batch_size;
    t.alpha = alpha;
    t.augment = augment;
    t.checkpoint_every = checkpoint_every;
    t.detach_interaction = detach_interaction;
    t.lambda = datagen.control.lambda;
    t.sigma = datagen.control.sigma;
    t.command_clamp = datagen.control.command_clamp;
    t.velocity_twist = twist_transform(datagen.eye_in_hand);
    return t;
}

nn::ModelConfig AppConfig::model_config(nn::Variant variant) const {
    nn::ModelConfig m;
    m.width = datagen.camera.width;
    m.height = datagen.camera.height;
    m.channels = datagen.camera.channels;
    m.feature_size = 8;  // four tracked points, two coordinates each
    m.dof = chain.dof();
    m.alpha = alpha;
    m.command_scale = datagen.control.command_clamp;
    m.variant = variant;
    return m;
}

eval::RolloutContext AppConfig::rollout_context() const {
    eval::RolloutContext ctx;
    ctx.chain = chain;
    ctx.sim = datagen.sim;
    ctx.camera = datagen.camera;
    ctx.eye_in_hand = datagen.eye_in_hand;
    ctx.initial_posture = initial_posture;
    ctx.control = datagen.control;
    ctx.episode = episode;
    ctx.episode.period = datagen.control.period;  // one clock for servo and episode
    return ctx;
}

AppConfig parse(const std::string& text, const std::string& origin) {
    AppConfig out = defaults();
    parse_into(out, text, origin);
    out.validate();
    return out;
}

AppConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    AppConfig out = defaults();
    parse_into(out, ss.str(), path);
    apply_env(out);
    out.validate();
    return out;
}

void write_default(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config: " + path);
    const AppConfig c = defaults();
    out << kMagic << "\n";
    std::string section;
    for (const Entry& e : registry()) {
        if (e.section != section) {
            section = e.section;
            out << "\n[" << section << "]\n";
        }
        std::string line = e.key + " = ";
        format_values(line, e, e.get(c));
        out << line << "\n";
    }
    if (!out) throw IoError("failed while writing config: " + path);
}

std::string help_text() {
    const AppConfig c = defaults();
    std::string out =
        "Config keys (file format: '" + std::string(kMagic) +
        "' then [section] blocks of key = value;\n"
        "override any key with NFVS_<SECTION>_<KEY> in the environment):\n";
    std::string section;
    char buf[96];
    for (const Entry& e : registry()) {
        if (e.section != section) {
            section = e.section;
            out += "\n[" + section + "]\n";
        }
        std::string line = "  " + e.key + " = ";
        format_values(line, e, e.get(c));
        if (e.kind != Kind::Boolean && !(e.lo == -100.0 && e.hi == 100.0)) {
            std::snprintf(buf, sizeof buf, "  (range %g to %g)", e.lo, e.hi);
            line += buf;
        }
        out += line + "\n      " + e.desc + "\n";
    }
    return out;
}

}  // namespace nfvs::cfg
