#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "nfvs/errors.hpp"
#include "nfvs/kernels.hpp"
#include "nfvs/tensor.hpp"

namespace nfvs::autodiff {

/// One value in a recorded computation. Nodes either own their storage or
/// alias a caller buffer that must outlive the graph (weights, batch images).
template <typename T>
struct Var {
    std::array<int, 4> shape{1, 1, 1, 1};
    int rank = 1;
    int numel = 0;
    const T* x = nullptr;   // value view; points into storage unless aliased
    std::vector<T> storage;
    std::vector<T> g;       // gradient, same length as the value
    bool requires_grad = false;
    void* owner = nullptr;  // graph that created the node

    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    T value() const { return x[0]; }
    T* mut() { return storage.data(); }
};

/// Reverse-mode tape over a fixed op vocabulary: the convolutional stack on
/// one side and the small dense visual-servoing algebra (interaction matrix,
/// damped inverse) on the other. One Graph instance records one forward pass;
/// backward() replays the tape once and accumulates into every node's gradient.
///
/// Conventions shared with the finite-difference tests:
///   - L1 and hinge terms use subgradient 0 exactly at their kinks.
///   - clamp passes gradient only strictly inside the clamped interval.
/// Heavy array ops run through the active kernel backend; the dense matrix
/// algebra (at most feature_size x dof) runs in plain loops.
template <typename T>
class Graph {
public:
    using V = Var<T>;

    Graph() : ops_(kernels::active<T>()) {}
    explicit Graph(const kernels::Ops<T>& ops) : ops_(ops) {}

    Graph(const Graph&) = delete;
    Graph& operator=(const Graph&) = delete;

    /// Wraps an external buffer without copying. The buffer must stay alive
    /// and unchanged until backward() finishes.
    V* alias(const T* data, std::initializer_list<int> dims, bool requires_grad = false) {
        V* v = make(dims);
        v->x = data;
        v->requires_grad = requires_grad;
        v->g.assign(static_cast<std::size_t>(v->numel), T(0));
        return v;
    }

    V* alias(const T* data, const std::array<int, 4>& dims, int rank,
             bool requires_grad = false) {
        V* v = blank(dims, rank);
        v->x = data;
        v->requires_grad = requires_grad;
        v->g.assign(static_cast<std::size_t>(v->numel), T(0));
        return v;
    }

    /// Copies a tensor into the graph as a differentiable leaf.
    V* leaf(const Tensor<T>& t, bool requires_grad = true) {
        V* v = own({t.shape[0], t.shape[1], t.shape[2], t.shape[3]}, t.rank);
        std::copy(t.data.begin(), t.data.end(), v->storage.begin());
        v->requires_grad = requires_grad;
        return v;
    }

    /// Copies raw values in as a constant (or differentiable) leaf.
    V* leaf(const T* data, std::initializer_list<int> dims, bool requires_grad = false) {
        V* v = make(dims);
        v->storage.assign(data, data + v->numel);
        v->x = v->storage.data();
        v->g.assign(static_cast<std::size_t>(v->numel), T(0));
        v->requires_grad = requires_grad;
        return v;
    }

    // Convolutional stack. Activations are height x width x channels, conv
    // kernels (ky, kx, ci, co), linear weights (in, out) row major.

    V* conv2d(V* x, V* w, V* b, int stride, int pad) {
        check_rank(x, 3, "conv2d input");
        check_rank(w, 4, "conv2d weights");
        if (w->dim(0) != w->dim(1)) throw ShapeMismatch("conv2d kernels must be square");
        if (w->dim(2) != x->dim(2))
            throw ShapeMismatch("conv2d weight input channels do not match activation");
        if (b && (b->rank != 1 || b->dim(0) != w->dim(3)))
            throw ShapeMismatch("conv2d bias width does not match output channels");
        kernels::ConvShape s;
        s.ih = x->dim(0);
        s.iw = x->dim(1);
        s.ci = x->dim(2);
        s.co = w->dim(3);
        s.k = w->dim(0);
        s.stride = stride;
        s.pad = pad;
        if (s.oh() <= 0 || s.ow() <= 0) throw ShapeMismatch("conv2d output would be empty");
        V* out = own({s.oh(), s.ow(), s.co, 1}, 3);
        ops_.conv2d_forward(s, x->x, w->x, b ? b->x : nullptr, out->mut());
        record(out, {x, w, b}, [this, s, x, w, b, out] {
            if (x->requires_grad) ops_.conv2d_backward_data(s, w->x, out->g.data(), x->g.data());
            if (w->requires_grad || (b && b->requires_grad))
                ops_.conv2d_backward_weights(s, x->x, out->g.data(),
                                             w->requires_grad ? w->g.data() : scratch(w),
                                             b && b->requires_grad ? b->g.data() : nullptr);
        });
        return out;
    }

    V* linear(V* x, V* w, V* b) {
        check_rank(w, 2, "linear weights");
        const int nin = w->dim(0), nout = w->dim(1);
        if (x->numel != nin) throw ShapeMismatch("linear input width does not match weights");
        if (b && (b->rank != 1 || b->dim(0) != nout))
            throw ShapeMismatch("linear bias width does not match output");
        V* out = own({nout, 1, 1, 1}, 1);
        ops_.linear_forward(nin, nout, x->x, w->x, b ? b->x : nullptr, out->mut());
        record(out, {x, w, b}, [this, nin, nout, x, w, b, out] {
            if (x->requires_grad)
                ops_.linear_backward_data(nin, nout, w->x, out->g.data(), x->g.data());
            if (w->requires_grad || (b && b->requires_grad))
                ops_.linear_backward_weights(nin, nout, x->x, out->g.data(),
                                             w->requires_grad ? w->g.data() : scratch(w),
                                             b && b->requires_grad ? b->g.data() : nullptr);
        });
        return out;
    }

    V* relu(V* x) {
        V* out = like(x);
        ops_.relu_forward(x->x, x->numel, out->mut());
        record(out, {x}, [this, x, out] {
            if (x->requires_grad) ops_.relu_backward(x->x, out->g.data(), x->numel, x->g.data());
        });
        return out;
    }

    /// out = alpha * tanh(x), elementwise.
    V* tanh_scale(V* x, T alpha) {
        V* out = like(x);
        for (int i = 0; i < x->numel; ++i) out->storage[i] = alpha * std::tanh(x->x[i]);
        record(out, {x}, [x, out, alpha] {
            if (!x->requires_grad) return;
            for (int i = 0; i < x->numel; ++i) {
                const T t = out->x[i] / alpha;  // tanh(x_i)
                x->g[i] += out->g[i] * alpha * (T(1) - t * t);
            }
        });
        return out;
    }

    /// Nearest-neighbor doubling of a height x width x channels map.
    V* upsample2x(V* x) {
        check_rank(x, 3, "upsample input");
        const int h = x->dim(0), w = x->dim(1), c = x->dim(2);
        V* out = own({2 * h, 2 * w, c, 1}, 3);
        ops_.upsample2x_forward(h, w, c, x->x, out->mut());
        record(out, {x}, [this, h, w, c, x, out] {
            if (x->requires_grad) ops_.upsample2x_backward(h, w, c, out->g.data(), x->g.data());
        });
        return out;
    }

    /// Clamp to [0, 1]; gradient passes only strictly inside the interval.
    V* clamp01(V* x) {
        V* out = like(x);
        for (int i = 0; i < x->numel; ++i)
            out->storage[i] = std::min(T(1), std::max(T(0), x->x[i]));
        record(out, {x}, [x, out] {
            if (!x->requires_grad) return;
            for (int i = 0; i < x->numel; ++i)
                if (x->x[i] > T(0) && x->x[i] < T(1)) x->g[i] += out->g[i];
        });
        return out;
    }

    /// Flat concatenation of two vectors.
    V* concat(V* a, V* b) {
        V* out = own({a->numel + b->numel, 1, 1, 1}, 1);
        std::copy(a->x, a->x + a->numel, out->storage.begin());
        std::copy(b->x, b->x + b->numel, out->storage.begin() + a->numel);
        record(out, {a, b}, [a, b, out] {
            if (a->requires_grad)
                for (int i = 0; i < a->numel; ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (int i = 0; i < b->numel; ++i) b->g[i] += out->g[a->numel + i];
        });
        return out;
    }

    /// Reinterprets the value under a new shape of identical element count.
    V* reshape(V* x, std::initializer_list<int> dims) {
        V* out = make(dims);
        if (out->numel != x->numel) throw ShapeMismatch("reshape changes element count");
        out->storage.assign(x->x, x->x + x->numel);
        out->x = out->storage.data();
        out->g.assign(static_cast<std::size_t>(out->numel), T(0));
        record(out, {x}, [x, out] {
            if (x->requires_grad)
                for (int i = 0; i < x->numel; ++i) x->g[i] += out->g[i];
        });
        return out;
    }

    V* add(V* a, V* b) {
        check_same(a, b, "add");
        V* out = like(a);
        ops_.add(a->x, b->x, a->numel, out->mut());
        record(out, {a, b}, [a, b, out] {
            if (a->requires_grad)
                for (int i = 0; i < a->numel; ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (int i = 0; i < b->numel; ++i) b->g[i] += out->g[i];
        });
        return out;
    }

    V* sub(V* a, V* b) {
        check_same(a, b, "sub");
        V* out = like(a);
        ops_.sub(a->x, b->x, a->numel, out->mut());
        record(out, {a, b}, [a, b, out] {
            if (a->requires_grad)
                for (int i = 0; i < a->numel; ++i) a->g[i] += out->g[i];
            if (b->requires_grad)
                for (int i = 0; i < b->numel; ++i) b->g[i] -= out->g[i];
        });
        return out;
    }

    V* scale(V* a, T s) {
        V* out = like(a);
        ops_.scale(a->x, s, a->numel, out->mut());
        record(out, {a}, [a, out, s] {
            if (a->requires_grad)
                for (int i = 0; i < a->numel; ++i) a->g[i] += s * out->g[i];
        });
        return out;
    }

    // Dense matrix algebra for the servo law. Matrices are rank 2 row major
    // and small (feature_size x 6 at most), so plain loops suffice.

    V* matmul(V* a, V* b) {
        check_rank(a, 2, "matmul left");
        check_rank(b, 2, "matmul right");
        const int r = a->dim(0), k = a->dim(1), c = b->dim(1);
        if (b->dim(0) != k) throw ShapeMismatch("matmul inner dimensions differ");
        V* out = own({r, c, 1, 1}, 2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) {
                T acc = T(0);
                for (int l = 0; l < k; ++l) acc += a->x[i * k + l] * b->x[l * c + j];
                out->storage[static_cast<std::size_t>(i) * c + j] = acc;
            }
        record(out, {a, b}, [a, b, out, r, k, c] {
            if (a->requires_grad)
                for (int i = 0; i < r; ++i)
                    for (int l = 0; l < k; ++l) {
                        T acc = T(0);
                        for (int j = 0; j < c; ++j) acc += out->g[i * c + j] * b->x[l * c + j];
                        a->g[i * k + l] += acc;
                    }
            if (b->requires_grad)
                for (int l = 0; l < k; ++l)
                    for (int j = 0; j < c; ++j) {
                        T acc = T(0);
                        for (int i = 0; i < r; ++i) acc += a->x[i * k + l] * out->g[i * c + j];
                        b->g[l * c + j] += acc;
                    }
        });
        return out;
    }

    V* matvec(V* a, V* v) {
        check_rank(a, 2, "matvec matrix");
        const int r = a->dim(0), k = a->dim(1);
        if (v->numel != k) throw ShapeMismatch("matvec width does not match vector");
        V* out = own({r, 1, 1, 1}, 1);
        for (int i = 0; i < r; ++i) {
            T acc = T(0);
            for (int l = 0; l < k; ++l) acc += a->x[i * k + l] * v->x[l];
            out->storage[static_cast<std::size_t>(i)] = acc;
        }
        record(out, {a, v}, [a, v, out, r, k] {
            if (a->requires_grad)
                for (int i = 0; i < r; ++i)
                    for (int l = 0; l < k; ++l) a->g[i * k + l] += out->g[i] * v->x[l];
            if (v->requires_grad)
                for (int l = 0; l < k; ++l) {
                    T acc = T(0);
                    for (int i = 0; i < r; ++i) acc += a->x[i * k + l] * out->g[i];
                    v->g[l] += acc;
                }
        });
        return out;
    }

    V* transpose(V* a) {
        check_rank(a, 2, "transpose input");
        const int r = a->dim(0), c = a->dim(1);
        V* out = own({c, r, 1, 1}, 2);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
                out->storage[static_cast<std::size_t>(j) * r + i] = a->x[i * c + j];
        record(out, {a}, [a, out, r, c] {
            if (a->requires_grad)
                for (int i = 0; i < r; ++i)
                    for (int j = 0; j < c; ++j) a->g[i * c + j] += out->g[j * r + i];
        });
        return out;
    }

    /// out = a + c * I for square a.
    V* add_diag(V* a, T c) {
        check_rank(a, 2, "add_diag input");
        const int n = a->dim(0);
        if (a->dim(1) != n) throw ShapeMismatch("add_diag needs a square matrix");
        V* out = like(a);
        std::copy(a->x, a->x + a->numel, out->storage.begin());
        for (int i = 0; i < n; ++i) out->storage[static_cast<std::size_t>(i) * n + i] += c;
        record(out, {a}, [a, out] {
            if (a->requires_grad)
                for (int i = 0; i < a->numel; ++i) a->g[i] += out->g[i];
        });
        return out;
    }

    /// Matrix inverse by Gauss-Jordan with partial pivoting. The backward
    /// rule for B = A^-1 is gA -= B^T gB B^T.
    V* inverse(V* a) {
        check_rank(a, 2, "inverse input");
        const int n = a->dim(0);
        if (a->dim(1) != n) throw ShapeMismatch("inverse needs a square matrix");
        V* out = like(a);
        invert_dense(a->x, n, out->storage.data());
        record(out, {a}, [a, out, n] {
            if (!a->requires_grad) return;
            // tmp = B^T * gB, then gA -= tmp * B^T
            std::vector<T> tmp(static_cast<std::size_t>(n) * n, T(0));
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    T acc = T(0);
                    for (int l = 0; l < n; ++l) acc += out->x[l * n + i] * out->g[l * n + j];
                    tmp[static_cast<std::size_t>(i) * n + j] = acc;
                }
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    T acc = T(0);
                    for (int l = 0; l < n; ++l) acc += tmp[static_cast<std::size_t>(i) * n + l] * out->x[j * n + l];
                    a->g[i * n + j] -= acc;
                }
        });
        return out;
    }

    /// Interaction matrix rows built from predicted features m (width f) and
    /// constant point depths (width f/2). Row pair p, with x = m[2p],
    /// y = m[2p+1], Z = depths[p]:
    ///   [-1/Z, 0, x/Z, x*y, -(1+x^2), y]
    ///   [0, -1/Z, y/Z, 1+y^2, -x*y, -x]
    /// With differentiate = false the feature dependence is detached and no
    /// gradient flows back into m.
    V* interaction(V* m, const std::vector<T>& depths, bool differentiate = true) {
        if (m->numel != 2 * static_cast<int>(depths.size()))
            throw ShapeMismatch("feature width does not match depth count");
        const int f = m->numel;
        V* out = own({f, 6, 1, 1}, 2);
        for (std::size_t p = 0; p < depths.size(); ++p) {
            const T x = m->x[2 * p], y = m->x[2 * p + 1];
            const T iz = T(1) / depths[p];
            T* r0 = out->storage.data() + 2 * p * 6;
            T* r1 = r0 + 6;
            r0[0] = -iz; r0[1] = T(0); r0[2] = x * iz;
            r0[3] = x * y; r0[4] = -(T(1) + x * x); r0[5] = y;
            r1[0] = T(0); r1[1] = -iz; r1[2] = y * iz;
            r1[3] = T(1) + y * y; r1[4] = -x * y; r1[5] = -x;
        }
        record(out, {m}, [m, out, depths, differentiate] {
            if (!m->requires_grad || !differentiate) return;
            for (std::size_t p = 0; p < depths.size(); ++p) {
                const T x = m->x[2 * p], y = m->x[2 * p + 1];
                const T iz = T(1) / depths[p];
                const T* g0 = out->g.data() + 2 * p * 6;
                const T* g1 = g0 + 6;
                m->g[2 * p] += g0[2] * iz + g0[3] * y - g0[4] * T(2) * x
                             + g1[4] * (-y) - g1[5];
                m->g[2 * p + 1] += g0[3] * x + g0[5]
                                 + g1[2] * iz + g1[3] * T(2) * y + g1[4] * (-x);
            }
        });
        return out;
    }

    /// Sum of absolute values; subgradient is 0 at exactly 0.
    V* l1_sum(V* x) {
        V* out = own({1, 1, 1, 1}, 1);
        out->storage[0] = ops_.abs_sum(x->x, x->numel);
        record(out, {x}, [x, out] {
            if (!x->requires_grad) return;
            const T go = out->g[0];
            for (int i = 0; i < x->numel; ++i) {
                if (x->x[i] > T(0)) x->g[i] += go;
                else if (x->x[i] < T(0)) x->g[i] -= go;
            }
        });
        return out;
    }

    /// Sum of max(0, |x_i| - bound); subgradient 0 on the flat region and at
    /// the hinge.
    V* hinge_sum(V* x, T bound) {
        V* out = own({1, 1, 1, 1}, 1);
        T acc = T(0);
        for (int i = 0; i < x->numel; ++i) {
            const T ex = std::abs(x->x[i]) - bound;
            if (ex > T(0)) acc += ex;
        }
        out->storage[0] = acc;
        record(out, {x}, [x, out, bound] {
            if (!x->requires_grad) return;
            const T go = out->g[0];
            for (int i = 0; i < x->numel; ++i) {
                if (x->x[i] > bound) x->g[i] += go;
                else if (x->x[i] < -bound) x->g[i] -= go;
            }
        });
        return out;
    }

    /// Inner product with fixed coefficients. Smooth everywhere, which makes
    /// it the scalarizer of choice for finite-difference checks.
    V* dot_const(V* x, std::vector<T> w) {
        if (static_cast<int>(w.size()) != x->numel)
            throw ShapeMismatch("dot_const coefficient count does not match input");
        V* out = own({1, 1, 1, 1}, 1);
        out->storage[0] = ops_.dot(x->x, w.data(), x->numel);
        record(out, {x}, [x, out, w = std::move(w)] {
            if (!x->requires_grad) return;
            for (int i = 0; i < x->numel; ++i) x->g[i] += out->g[0] * w[static_cast<std::size_t>(i)];
        });
        return out;
    }

    /// Weighted sum of scalar nodes (the loss combiner).
    V* weighted_sum(const std::vector<std::pair<V*, T>>& terms) {
        V* out = own({1, 1, 1, 1}, 1);
        T acc = T(0);
        bool any_grad = false;
        for (const auto& [v, w] : terms) {
            if (v->numel != 1) throw ShapeMismatch("weighted_sum expects scalar terms");
            acc += w * v->x[0];
            any_grad = any_grad || v->requires_grad;
        }
        out->storage[0] = acc;
        out->requires_grad = any_grad;
        if (any_grad) {
            tape_.push_back([out, terms] {
                for (const auto& [v, w] : terms)
                    if (v->requires_grad) v->g[0] += w * out->g[0];
            });
        }
        return out;
    }

    /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse, summing
    /// gradients into every node recorded under this graph.
    void backward(V* loss) {
        if (loss->owner != this)
            throw GraphNotRecorded("backward target was not produced by this graph");
        if (tape_.empty())
            throw GraphNotRecorded("no forward computation recorded");
        if (backward_ran_)
            throw GraphNotRecorded("backward already ran for this graph");
        if (loss->numel != 1) throw ShapeMismatch("backward expects a scalar loss");
        backward_ran_ = true;
        loss->g[0] = T(1);
        for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
    }

    const kernels::Ops<T>& ops() const { return ops_; }

private:
    static void check_rank(V* v, int rank, const char* what) {
        if (v->rank != rank)
            throw ShapeMismatch(std::string(what) + " must have rank " + std::to_string(rank));
    }

    static void check_same(V* a, V* b, const char* what) {
        if (a->numel != b->numel)
            throw ShapeMismatch(std::string(what) + " operands differ in element count");
    }

    V* blank(const std::array<int, 4>& dims, int rank) {
        if (rank < 1 || rank > 4) throw ShapeMismatch("node rank must be 1 to 4");
        vars_.emplace_back();
        V* v = &vars_.back();
        v->rank = rank;
        v->shape = dims;
        long n = 1;
        for (int i = 0; i < rank; ++i) {
            if (dims[static_cast<std::size_t>(i)] <= 0)
                throw ShapeMismatch("node dimensions must be positive");
            n *= dims[static_cast<std::size_t>(i)];
        }
        v->numel = static_cast<int>(n);
        v->owner = this;
        return v;
    }

    V* make(std::initializer_list<int> dims) {
        std::array<int, 4> a{1, 1, 1, 1};
        int i = 0;
        if (dims.size() < 1 || dims.size() > 4)
            throw ShapeMismatch("node rank must be 1 to 4");
        for (int d : dims) a[static_cast<std::size_t>(i++)] = d;
        return blank(a, static_cast<int>(dims.size()));
    }

    V* own(std::array<int, 4> dims, int rank) {
        V* v = blank(dims, rank);
        v->storage.assign(static_cast<std::size_t>(v->numel), T(0));
        v->g.assign(static_cast<std::size_t>(v->numel), T(0));
        v->x = v->storage.data();
        return v;
    }

    V* like(V* ref) {
        V* v = own(ref->shape, ref->rank);
        return v;
    }

    void record(V* out, std::initializer_list<V*> inputs, std::function<void()> fn) {
        bool any = false;
        for (V* in : inputs) any = any || (in && in->requires_grad);
        out->requires_grad = any;
        if (any) tape_.push_back(std::move(fn));
    }

    /// Discard buffer for backward kernels that compute weight and bias
    /// gradients together when only one of the two is needed.
    T* scratch(V* w) {
        if (scratch_.size() < static_cast<std::size_t>(w->numel))
            scratch_.assign(static_cast<std::size_t>(w->numel), T(0));
        return scratch_.data();
    }

    static void invert_dense(const T* a, int n, T* out) {
        std::vector<T> m(a, a + static_cast<std::size_t>(n) * n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) out[static_cast<std::size_t>(i) * n + j] = (i == j) ? T(1) : T(0);
        for (int col = 0; col < n; ++col) {
            int piv = col;
            T best = std::abs(m[static_cast<std::size_t>(col) * n + col]);
            for (int r = col + 1; r < n; ++r) {
                const T cand = std::abs(m[static_cast<std::size_t>(r) * n + col]);
                if (cand > best) { best = cand; piv = r; }
            }
            if (!(best > T(0)))
                throw SingularMatrix("matrix is singular to working precision");
            if (piv != col)
                for (int j = 0; j < n; ++j) {
                    std::swap(m[static_cast<std::size_t>(piv) * n + j], m[static_cast<std::size_t>(col) * n + j]);
                    std::swap(out[static_cast<std::size_t>(piv) * n + j], out[static_cast<std::size_t>(col) * n + j]);
                }
            const T inv_p = T(1) / m[static_cast<std::size_t>(col) * n + col];
            for (int j = 0; j < n; ++j) {
                m[static_cast<std::size_t>(col) * n + j] *= inv_p;
                out[static_cast<std::size_t>(col) * n + j] *= inv_p;
            }
            for (int r = 0; r < n; ++r) {
                if (r == col) continue;
                const T factor = m[static_cast<std::size_t>(r) * n + col];
                if (factor == T(0)) continue;
                for (int j = 0; j < n; ++j) {
                    m[static_cast<std::size_t>(r) * n + j] -= factor * m[static_cast<std::size_t>(col) * n + j];
                    out[static_cast<std::size_t>(r) * n + j] -= factor * out[static_cast<std::size_t>(col) * n + j];
                }
            }
        }
    }

    const kernels::Ops<T>& ops_;
    std::deque<V> vars_;
    std::vector<std::function<void()>> tape_;
    std::vector<T> scratch_;
    bool backward_ran_ = false;
};

}  // namespace nfvs::autodiff
