#include "nfvs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "nfvs/errors.hpp"
#include "nfvs/rng.hpp"

namespace nfvs {

namespace {

// Smooth value noise on a 0.05 m lattice, in [0, 1].
double value_noise(double x, double y, std::uint64_t seed) {
    const double cell = 0.05;
    const double fx = x / cell, fy = y / cell;
    const double ix = std::floor(fx), iy = std::floor(fy);
    auto corner = [&](double cx, double cy) {
        const std::uint64_t hx = static_cast<std::uint64_t>(static_cast<std::int64_t>(cx)) *
                                 0x9e3779b97f4a7c15ull;
        const std::uint64_t hy = static_cast<std::uint64_t>(static_cast<std::int64_t>(cy)) *
                                 0xc2b2ae3d27d4eb4full;
        return double(Rng::mix(seed ^ hx ^ hy) >> 11) * 0x1.0p-53;
    };
    auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
    const double tx = smooth(fx - ix), ty = smooth(fy - iy);
    const double a = corner(ix, iy), b = corner(ix + 1, iy);
    const double c = corner(ix, iy + 1), d = corner(ix + 1, iy + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
}

double ground_shade(const Scene& sc, double x, double y) {
    const double cell = 0.05;
    switch (sc.texture) {
        case GroundTexture::Solid:
            return 1.0;
        case GroundTexture::Checker: {
            const long px = static_cast<long>(std::floor(x / cell));
            const long py = static_cast<long>(std::floor(y / cell));
            return ((px + py) & 1) ? 0.35 : 1.0;
        }
        case GroundTexture::Stripes: {
            const long px = static_cast<long>(std::floor(x / cell));
            return (px & 1) ? 0.45 : 1.0;
        }
        case GroundTexture::Noise:
            return 0.3 + 0.7 * value_noise(x, y, sc.texture_seed);
    }
    return 1.0;
}

struct BoxHit {
    double t = std::numeric_limits<double>::infinity();
    int face = -1;  // 0..5: +x, -x, +y, -y, +z, -z
};

// Slab intersection with the axis-aligned box x,y in [-sx/2, sx/2] etc.,
// z in [0, h], in the object frame.
BoxHit intersect_box(const Vec3& o, const Vec3& d, const Vec3& dims) {
    const double lo[3] = {-dims.x() / 2, -dims.y() / 2, 0.0};
    const double hi[3] = {dims.x() / 2, dims.y() / 2, dims.z()};
    double t_enter = -std::numeric_limits<double>::infinity();
    double t_exit = std::numeric_limits<double>::infinity();
    int enter_face = -1;
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            if (o[a] < lo[a] || o[a] > hi[a]) return {};
            continue;
        }
        double t0 = (lo[a] - o[a]) / d[a];
        double t1 = (hi[a] - o[a]) / d[a];
        int face0 = 2 * a + 1, face1 = 2 * a;  // lo side = negative face
        if (t0 > t1) {
            std::swap(t0, t1);
            std::swap(face0, face1);
        }
        if (t0 > t_enter) {
            t_enter = t0;
            enter_face = face0;
        }
        t_exit = std::min(t_exit, t1);
        if (t_enter > t_exit) return {};
    }
    if (t_enter <= 0.0) return {};  // origin inside or box behind
    return {t_enter, enter_face};
}

Vec3 face_normal(int face) {
    switch (face) {
        case 0: return {1, 0, 0};
        case 1: return {-1, 0, 0};
        case 2: return {0, 1, 0};
        case 3: return {0, -1, 0};
        case 4: return {0, 0, 1};
        default: return {0, 0, -1};
    }
}

}  // namespace

void Scene::validate() const {
    if (!(box_dims.x() > 0 && box_dims.y() > 0 && box_dims.z() > 0))
        throw ConfigError("box dimensions must be positive");
    if (brightness < 0.3 || brightness > 1.7)
        throw ConfigError("brightness gain must lie in [0.3, 1.7]");
    if (std::abs(light_dir.norm() - 1.0) > 1e-6)
        throw ConfigError("light direction must be a unit vector");
}

void SimConfig::validate() const {
    if (workspace_x_min > workspace_x_max || workspace_y_min > workspace_y_max)
        throw ConfigError("workspace window bounds must be ordered");
    if (!(box_side_min > 0) || box_side_min > box_side_max)
        throw ConfigError("box side range must be positive and ordered");
    if (!(box_height_min > 0) || box_height_min > box_height_max)
        throw ConfigError("box height range must be positive and ordered");
    if (brightness_min < 0.3 || brightness_max > 1.7 || brightness_min > brightness_max)
        throw ConfigError("brightness range must lie inside [0.3, 1.7] and be ordered");
    if (!(standoff > 0)) throw ConfigError("camera standoff must be positive");
}

Scene randomize_scene(std::uint64_t seed, const SimConfig& cfg) {
    cfg.validate();
    Rng rng(seed, Rng::hash("scene"));
    Scene sc;

    const double x = rng.uniform(cfg.workspace_x_min, cfg.workspace_x_max);
    const double y = rng.uniform(cfg.workspace_y_min, cfg.workspace_y_max);
    const double yaw = rng.uniform(-M_PI, M_PI);
    sc.object_pose.translation = Vec3(x, y, 0.0);
    sc.object_pose.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));

    sc.box_dims = Vec3(rng.uniform(cfg.box_side_min, cfg.box_side_max),
                       rng.uniform(cfg.box_side_min, cfg.box_side_max),
                       rng.uniform(cfg.box_height_min, cfg.box_height_max));

    for (auto& c : sc.face_colors)
        c = Vec3(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));

    sc.texture = static_cast<GroundTexture>(rng.next_below(4));
    sc.background_color =
        Vec3(rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85));
    sc.texture_seed = rng.next_u64();

    // Light from the upper hemisphere, at most ~70 degrees off zenith.
    const double az = rng.uniform(-M_PI, M_PI);
    const double zc = rng.uniform(0.35, 1.0);
    const double zs = std::sqrt(1.0 - zc * zc);
    sc.light_dir = Vec3(zs * std::cos(az), zs * std::sin(az), zc);

    sc.brightness = rng.uniform(cfg.brightness_min, cfg.brightness_max);
    sc.validate();
    return sc;
}

Pose desired_camera_pose(const Scene& scene, const SimConfig& cfg) {
    Pose p;
    p.translation = scene.object_pose.translation +
                    Vec3(0.0, 0.0, scene.box_dims.z() + cfg.standoff);
    Mat3 r;
    // Optical axis (camera z) straight down, image x along world x; image y
    // (down in the image) along world -y keeps the frame right-handed.
    r << 1, 0, 0,
         0, -1, 0,
         0, 0, -1;
    p.rotation = Eigen::Quaterniond(r);
    return p;
}

Image render(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& k,
             std::vector<std::int8_t>* face_ids) {
    scene.validate();
    k.validate();

    const Mat3 r_wc = camera_pose.rotation_matrix();
    const Vec3 origin = camera_pose.translation;

    // Camera origin inside the box is a contract violation.
    const Pose obj_inv = scene.object_pose.inverse();
    const Vec3 o_obj = obj_inv.transform_point(origin);
    if (o_obj.x() > -scene.box_dims.x() / 2 && o_obj.x() < scene.box_dims.x() / 2 &&
        o_obj.y() > -scene.box_dims.y() / 2 && o_obj.y() < scene.box_dims.y() / 2 &&
        o_obj.z() > 0.0 && o_obj.z() < scene.box_dims.z())
        throw CameraInsideObject("camera origin lies inside the object box");

    const Mat3 r_obj = obj_inv.rotation_matrix();
    Image img = Image::zeros({k.height, k.width, k.channels});
    if (face_ids) face_ids->assign(static_cast<std::size_t>(k.height) * k.width, -1);

    for (int v = 0; v < k.height; ++v) {
        for (int u = 0; u < k.width; ++u) {
            // Ray through the pixel center; t equals camera-frame depth,
            // because the direction has unit z in the camera frame.
            const Vec3 d_cam((u + 0.5 - k.cx) / k.fx, (v + 0.5 - k.cy) / k.fy, 1.0);
            const Vec3 d = r_wc * d_cam;

            double t_ground = std::numeric_limits<double>::infinity();
            if (d.z() < -1e-12) t_ground = -origin.z() / d.z();

            const Vec3 d_obj = r_obj * d;
            const BoxHit hit = intersect_box(o_obj, d_obj, scene.box_dims);

            Vec3 color;
            if (hit.face >= 0 && hit.t < t_ground) {
                const Vec3 n_world = scene.object_pose.rotate(face_normal(hit.face));
                const double lambert =
                    0.35 + 0.65 * std::max(0.0, n_world.dot(scene.light_dir));
                color = scene.face_colors[hit.face] * lambert;
                if (face_ids)
                    (*face_ids)[static_cast<std::size_t>(v) * k.width + u] =
                        static_cast<std::int8_t>(hit.face);
            } else if (std::isfinite(t_ground)) {
                const Vec3 p = origin + t_ground * d;
                const double lambert = 0.35 + 0.65 * std::max(0.0, scene.light_dir.z());
                color = scene.background_color * (ground_shade(scene, p.x(), p.y()) * lambert);
            } else {
                color = scene.background_color;
            }

            color *= scene.brightness;
            for (int c = 0; c < k.channels; ++c) {
                const double ch = k.channels == 3 ? color[c] : color.mean();
                img.at(v, u, c) = static_cast<float>(std::clamp(ch, 0.0, 1.0));
            }
        }
    }
    return img;
}

std::vector<std::uint8_t> quantize_image(const Image& img) {
    std::vector<std::uint8_t> bytes(img.data.size());
    for (std::size_t i = 0; i < bytes.size(); ++i)
        bytes[i] = static_cast<std::uint8_t>(
            std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
    return bytes;
}

Image dequantize_image(const std::vector<std::uint8_t>& bytes, const CameraIntrinsics& k) {
    if (bytes.size() != static_cast<std::size_t>(k.height) * k.width * k.channels)
        throw ShapeMismatch("image byte count does not match camera dimensions");
    Image img = Image::zeros({k.height, k.width, k.channels});
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.data[i] = static_cast<float>(bytes[i]) / 255.0f;
    return img;
}

std::pair<VecX, VecX> ground_truth_features(const Scene& scene, const Pose& camera_pose,
                                            const CameraIntrinsics& k) {
    const double sx = scene.box_dims.x() / 2, sy = scene.box_dims.y() / 2;
    const double h = scene.box_dims.z();
    const Vec3 corners_obj[4] = {
        {sx, sy, h}, {-sx, sy, h}, {-sx, -sy, h}, {sx, -sy, h}};

    const Pose cam_inv = camera_pose.inverse();
    VecX s(8), z(4);
    for (int i = 0; i < 4; ++i) {
        const Vec3 p_world = scene.object_pose.transform_point(corners_obj[i]);
        const ProjectedPoint pr = project(cam_inv.transform_point(p_world), k);
        s[2 * i] = pr.x;
        s[2 * i + 1] = pr.y;
        z[i] = pr.depth;
    }
    return {s, z};
}

SimState step(const SimState& state, const KinematicChain& chain, const VecX& qdot,
              double period) {
    if (!(period > 0.0)) throw ConfigError("integration period must be positive");
    if (qdot.size() != chain.dof())
        throw DimensionMismatch("command length does not match chain");
    if (!qdot.allFinite()) throw DimensionMismatch("command has non-finite entries");

    SimState next = state;
    for (int i = 0; i < chain.dof(); ++i) {
        double q = state.joints.positions[i] + period * qdot[i];
        const DhJoint& j = chain.joints[i];
        if (q < j.limit_lower || q > j.limit_upper) {
            q = std::clamp(q, j.limit_lower, j.limit_upper);
            next.limit_hit = true;
        }
        next.joints.positions[i] = q;
    }
    next.joints.velocities = qdot;
    next.step_count = state.step_count + 1;
    return next;
}

void write_pnm(const Image& img, const std::string& path) {
    const int h = img.shape[0], w = img.shape[1], c = img.shape[2];
    if (c != 1 && c != 3) throw IoError("pnm output supports 1 or 3 channels");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << (c == 3 ? "P6" : "P5") << "\n" << w << " " << h << "\n255\n";
    const std::vector<std::uint8_t> bytes = quantize_image(img);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path);
}

}  // namespace nfvs
