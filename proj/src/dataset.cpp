#include "nfvs/dataset.hpp"

#include <bit>
#include <fstream>

#include "nfvs/errors.hpp"

namespace nfvs {

namespace {

static_assert(std::endian::native == std::endian::little,
              "dataset serialization writes host-order scalars and requires little endian");

constexpr char kMagic[4] = {'N', 'F', 'V', 'S'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const char* what) {
    T value;
    in.read(reinterpret_cast<char*>(&value), sizeof value);
    if (!in) throw IoError(std::string("dataset file truncated while reading ") + what);
    return value;
}

void put_floats(std::ostream& out, const float* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * 4));
}

void get_floats(std::istream& in, float* data, std::size_t n, const char* what) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * 4));
    if (!in) throw IoError(std::string("dataset file truncated while reading ") + what);
}

void put_bytes(std::ostream& out, const std::vector<std::uint8_t>& bytes) {
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void get_bytes(std::istream& in, std::vector<std::uint8_t>& bytes, std::size_t n,
               const char* what) {
    bytes.resize(n);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError(std::string("dataset file truncated while reading ") + what);
}

}  // namespace

void Dataset::validate() const {
    const DatasetHeader& h = header;
    if (h.width == 0 || h.height == 0 || (h.channels != 1 && h.channels != 3))
        throw IoError("dataset header has invalid image dimensions");
    if (h.dof == 0) throw IoError("dataset header has zero degrees of freedom");
    if (h.feature_size < 2 || h.feature_size % 2 != 0)
        throw IoError("dataset header feature size must be a positive even count");
    if (!(h.period > 0.0)) throw IoError("dataset header period must be positive");
    if (demos.size() != h.demo_count)
        throw IoError("dataset demo count does not match its header");

    std::size_t records = 0;
    for (const Demo& d : demos) {
        if (d.meta.split > 1) throw IoError("demo split flag must be 0 or 1");
        if (d.meta.target_depths.size() != static_cast<int>(h.feature_size / 2))
            throw IoError("demo target depth count does not match the feature size");
        if (!d.meta.target_depths.allFinite())
            throw IoError("demo target depths must be finite");
        if (d.meta.reference_image.size() != image_bytes())
            throw IoError("demo reference image size does not match the header");
        for (std::size_t i = 0; i < d.records.size(); ++i) {
            const SampleRecord& r = d.records[i];
            if (r.k != i) throw IoError("demo records must be consecutively indexed");
            if (r.q.size() != static_cast<int>(h.dof) ||
                r.qdot.size() != static_cast<int>(h.dof))
                throw IoError("record joint vectors do not match the header dof");
            if (r.jacobian.rows() != 6 || r.jacobian.cols() != static_cast<int>(h.dof))
                throw IoError("record Jacobian shape does not match the header dof");
            if (!r.q.allFinite() || !r.qdot.allFinite() || !r.jacobian.allFinite())
                throw IoError("record contains non-finite values");
            if (r.image.size() != image_bytes())
                throw IoError("record image size does not match the header");
        }
        records += d.records.size();
    }
    if (records != h.record_count)
        throw IoError("dataset record count does not match its header");
}

void save_dataset(const Dataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");

    out.write(kMagic, 4);
    put(out, kVersion);
    put(out, ds.header.record_count);
    put(out, ds.header.demo_count);
    put(out, ds.header.width);
    put(out, ds.header.height);
    put(out, ds.header.channels);
    put(out, ds.header.dof);
    put(out, ds.header.feature_size);
    put(out, ds.header.period);

    for (const Demo& d : ds.demos) {
        put(out, d.meta.demo_id);
        put(out, d.meta.scene_seed);
        put(out, static_cast<std::uint8_t>(d.meta.success ? 1 : 0));
        put(out, d.meta.split);
        put(out, static_cast<std::uint32_t>(d.records.size()));
        put_floats(out, d.meta.target_depths.data(),
                   static_cast<std::size_t>(d.meta.target_depths.size()));
        put_bytes(out, d.meta.reference_image);
        for (const SampleRecord& r : d.records) {
            put(out, r.k);
            put_floats(out, r.q.data(), static_cast<std::size_t>(r.q.size()));
            put_floats(out, r.qdot.data(), static_cast<std::size_t>(r.qdot.size()));
            // Jacobian rows are stored contiguously.
            for (int row = 0; row < 6; ++row)
                for (int col = 0; col < r.jacobian.cols(); ++col) {
                    const float v = r.jacobian(row, col);
                    put(out, v);
                }
            put_bytes(out, r.image);
        }
    }
    if (!out) throw IoError("failed writing " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4))
        throw IoError(path + " is not a dataset file");
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kVersion)
        throw IoError("unsupported dataset version " + std::to_string(version));

    Dataset ds;
    ds.header.record_count = get<std::uint32_t>(in, "record count");
    ds.header.demo_count = get<std::uint32_t>(in, "demo count");
    ds.header.width = get<std::uint32_t>(in, "width");
    ds.header.height = get<std::uint32_t>(in, "height");
    ds.header.channels = get<std::uint32_t>(in, "channels");
    ds.header.dof = get<std::uint32_t>(in, "dof");
    ds.header.feature_size = get<std::uint32_t>(in, "feature size");
    ds.header.period = get<double>(in, "period");

    ds.demos.resize(ds.header.demo_count);
    for (Demo& d : ds.demos) {
        d.meta.demo_id = get<std::uint32_t>(in, "demo id");
        d.meta.scene_seed = get<std::uint64_t>(in, "scene seed");
        d.meta.success = get<std::uint8_t>(in, "success flag") != 0;
        d.meta.split = get<std::uint8_t>(in, "split flag");
        const auto n_records = get<std::uint32_t>(in, "demo record count");
        d.meta.target_depths.resize(ds.header.feature_size / 2);
        get_floats(in, d.meta.target_depths.data(),
                   static_cast<std::size_t>(d.meta.target_depths.size()), "target depths");
        get_bytes(in, d.meta.reference_image, ds.image_bytes(), "reference image");
        d.records.resize(n_records);
        for (SampleRecord& r : d.records) {
            r.k = get<std::uint32_t>(in, "record index");
            r.q.resize(ds.header.dof);
            r.qdot.resize(ds.header.dof);
            get_floats(in, r.q.data(), ds.header.dof, "joint positions");
            get_floats(in, r.qdot.data(), ds.header.dof, "joint velocities");
            r.jacobian.resize(6, ds.header.dof);
            for (int row = 0; row < 6; ++row)
                for (std::uint32_t col = 0; col < ds.header.dof; ++col)
                    r.jacobian(row, static_cast<int>(col)) = get<float>(in, "Jacobian");
            get_bytes(in, r.image, ds.image_bytes(), "record image");
        }
    }
    ds.validate();
    return ds;
}

}  // namespace nfvs
