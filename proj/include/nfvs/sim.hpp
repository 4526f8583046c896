#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "nfvs/geometry.hpp"
#include "nfvs/kinematics.hpp"
#include "nfvs/tensor.hpp"

namespace nfvs {

/// Floating-point image, height x width x channels, values in [0, 1].
using Image = Tensor<float>;

enum class GroundTexture : int { Solid = 0, Checker = 1, Stripes = 2, Noise = 3 };

/// One randomized tabletop: a colored box resting on a textured ground
/// plane, lit by a single directional light.
struct Scene {
    Pose object_pose;                     // planar pose: x, y and yaw about z
    Vec3 box_dims = {0.1, 0.1, 0.06};     // full extents, m
    std::array<Vec3, 6> face_colors{};    // +x, -x, +y, -y, +z, -z
    GroundTexture texture = GroundTexture::Solid;
    Vec3 background_color = {0.5, 0.5, 0.5};
    std::uint64_t texture_seed = 0;       // lattice seed for the noise texture
    Vec3 light_dir = {0.0, 0.0, 1.0};     // unit vector toward the light
    double brightness = 1.0;

    void validate() const;
};

/// Randomization ranges and workspace geometry for scene sampling.
struct SimConfig {
    double workspace_x_min = 0.35, workspace_x_max = 0.55;  // object center, m
    double workspace_y_min = -0.12, workspace_y_max = 0.12;
    double box_side_min = 0.10, box_side_max = 0.16;
    double box_height_min = 0.04, box_height_max = 0.08;
    double brightness_min = 0.7, brightness_max = 1.3;
    double standoff = 0.35;  // desired camera height above the box top, m

    void validate() const;
};

struct SimState {
    JointState joints;
    Scene scene;
    int step_count = 0;
    bool limit_hit = false;  // any joint clamped at its bound so far
};

Scene randomize_scene(std::uint64_t seed, const SimConfig& cfg);

/// Desired camera pose for a scene: straight above the box top center at the
/// configured standoff, optical axis pointing down, image x along world x.
Pose desired_camera_pose(const Scene& scene, const SimConfig& cfg);

/// Rasterize the scene from a camera pose. Optionally fills a per-pixel face
/// index buffer: -1 ground or background, 0..5 box faces (+x, -x, +y, -y,
/// +z, -z). Throws CameraInsideObject.
Image render(const Scene& scene, const Pose& camera_pose, const CameraIntrinsics& k,
             std::vector<std::int8_t>* face_ids = nullptr);

/// Quantize a rendered image to 8-bit intensities (the stored/captured form).
std::vector<std::uint8_t> quantize_image(const Image& img);
Image dequantize_image(const std::vector<std::uint8_t>& bytes, const CameraIntrinsics& k);

/// Normalized image coordinates and depths of the four top-face corners, in
/// fixed object-frame order (+x+y, -x+y, -x-y, +x-y).
std::pair<VecX, VecX> ground_truth_features(const Scene& scene, const Pose& camera_pose,
                                            const CameraIntrinsics& k);

/// Explicit Euler joint integration with limit clamping.
SimState step(const SimState& state, const KinematicChain& chain, const VecX& qdot,
              double period);

/// Write an image as a binary portable pixmap (P6) or graymap (P5).
void write_pnm(const Image& img, const std::string& path);

}  // namespace nfvs
