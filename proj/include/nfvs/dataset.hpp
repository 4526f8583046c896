#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nfvs {

// One frame of a demonstration: the joint state, the commanded velocity, the
// robot Jacobian at that state and the camera image, all as captured.
struct SampleRecord {
    std::uint32_t k = 0;
    Eigen::VectorXf q;
    Eigen::VectorXf qdot;
    Eigen::Matrix<float, 6, Eigen::Dynamic> jacobian;
    std::vector<std::uint8_t> image;
};

struct DemoMeta {
    std::uint32_t demo_id = 0;
    std::uint64_t scene_seed = 0;
    bool success = false;
    std::uint8_t split = 0;  // 0 train, 1 validation
    Eigen::VectorXf target_depths;
    std::vector<std::uint8_t> reference_image;
};

struct Demo {
    DemoMeta meta;
    std::vector<SampleRecord> records;
};

struct DatasetHeader {
    std::uint32_t record_count = 0;
    std::uint32_t demo_count = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t channels = 0;
    std::uint32_t dof = 0;
    std::uint32_t feature_size = 0;
    double period = 0.0;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Demo> demos;

    std::size_t image_bytes() const {
        return std::size_t(header.width) * header.height * header.channels;
    }
    void validate() const;
};

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace nfvs
