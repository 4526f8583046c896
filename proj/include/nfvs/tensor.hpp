#pragma once

#include <array>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "nfvs/errors.hpp"

namespace nfvs {

/// Dense row-major tensor of rank 1 to 4 with an optional gradient buffer.
/// Images are stored height x width x channels.
template <typename T>
struct Tensor {
    std::array<int, 4> shape{1, 1, 1, 1};
    int rank = 0;
    std::vector<T> data;
    std::vector<T> grad;  // empty until ensure_grad()

    Tensor() = default;

    static Tensor zeros(std::initializer_list<int> dims) {
        Tensor t;
        if (dims.size() < 1 || dims.size() > 4)
            throw ShapeMismatch("tensor rank must be 1 to 4");
        t.rank = static_cast<int>(dims.size());
        int i = 0;
        std::size_t n = 1;
        for (int d : dims) {
            if (d <= 0) throw ShapeMismatch("tensor dimensions must be positive");
            t.shape[i++] = d;
            n *= static_cast<std::size_t>(d);
        }
        t.data.assign(n, T(0));
        return t;
    }

    int numel() const { return static_cast<int>(data.size()); }

    bool same_shape(const Tensor& other) const {
        return rank == other.rank && shape == other.shape;
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    }

    void zero_grad() {
        if (!grad.empty()) std::fill(grad.begin(), grad.end(), T(0));
    }

    T& at(int a) { return data[static_cast<std::size_t>(a)]; }
    T& at(int a, int b) { return data[static_cast<std::size_t>(a) * shape[1] + b]; }
    T& at(int a, int b, int c) {
        return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    T& at(int a, int b, int c, int d) {
        return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }
    const T& at(int a) const { return data[static_cast<std::size_t>(a)]; }
    const T& at(int a, int b) const {
        return data[static_cast<std::size_t>(a) * shape[1] + b];
    }
    const T& at(int a, int b, int c) const {
        return data[(static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c];
    }
    const T& at(int a, int b, int c, int d) const {
        return data[((static_cast<std::size_t>(a) * shape[1] + b) * shape[2] + c) * shape[3] + d];
    }

    std::string shape_string() const {
        std::string s = "(";
        for (int i = 0; i < rank; ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + ")";
    }
};

}  // namespace nfvs
