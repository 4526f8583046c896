#include <cmath>

#include "kernels_detail.hpp"

// Reference implementations. Plain loops, no instruction-set extensions;
// these define the semantics the vectorized backends are tested against.

namespace nfvs::kernels::detail {

template <typename T>
void conv2d_forward_scalar(const ConvShape& s, const T* in, const T* w, const T* bias,
                           T* out) {
    const int oh = s.oh(), ow = s.ow();
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* o = out + (static_cast<std::size_t>(oy) * ow + ox) * s.co;
            for (int c = 0; c < s.co; ++c) o[c] = bias ? bias[c] : T(0);
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride + ky - s.pad;
                if (iy < 0 || iy >= s.ih) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride + kx - s.pad;
                    if (ix < 0 || ix >= s.iw) continue;
                    const T* px = in + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                    const T* wk = w + (static_cast<std::size_t>(ky) * s.k + kx) * s.ci * s.co;
                    for (int c = 0; c < s.ci; ++c) {
                        const T v = px[c];
                        const T* wc = wk + static_cast<std::size_t>(c) * s.co;
                        for (int f = 0; f < s.co; ++f) o[f] += v * wc[f];
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_data_scalar(const ConvShape& s, const T* w, const T* gout, T* gin) {
    const int oh = s.oh(), ow = s.ow();
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* go = gout + (static_cast<std::size_t>(oy) * ow + ox) * s.co;
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride + ky - s.pad;
                if (iy < 0 || iy >= s.ih) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride + kx - s.pad;
                    if (ix < 0 || ix >= s.iw) continue;
                    T* gi = gin + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                    const T* wk = w + (static_cast<std::size_t>(ky) * s.k + kx) * s.ci * s.co;
                    for (int c = 0; c < s.ci; ++c) {
                        const T* wc = wk + static_cast<std::size_t>(c) * s.co;
                        T acc = T(0);
                        for (int f = 0; f < s.co; ++f) acc += wc[f] * go[f];
                        gi[c] += acc;
                    }
                }
            }
        }
    }
}

template <typename T>
void conv2d_backward_weights_scalar(const ConvShape& s, const T* in, const T* gout,
                                    T* gw, T* gbias) {
    const int oh = s.oh(), ow = s.ow();
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* go = gout + (static_cast<std::size_t>(oy) * ow + ox) * s.co;
            if (gbias)
                for (int f = 0; f < s.co; ++f) gbias[f] += go[f];
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride + ky - s.pad;
                if (iy < 0 || iy >= s.ih) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride + kx - s.pad;
                    if (ix < 0 || ix >= s.iw) continue;
                    const T* px = in + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                    T* wk = gw + (static_cast<std::size_t>(ky) * s.k + kx) * s.ci * s.co;
                    for (int c = 0; c < s.ci; ++c) {
                        const T v = px[c];
                        T* wc = wk + static_cast<std::size_t>(c) * s.co;
                        for (int f = 0; f < s.co; ++f) wc[f] += v * go[f];
                    }
                }
            }
        }
    }
}

template <typename T>
void linear_forward_scalar(int nin, int nout, const T* in, const T* w, const T* bias,
                           T* out) {
    for (int o = 0; o < nout; ++o) out[o] = bias ? bias[o] : T(0);
    for (int i = 0; i < nin; ++i) {
        const T v = in[i];
        const T* row = w + static_cast<std::size_t>(i) * nout;
        for (int o = 0; o < nout; ++o) out[o] += v * row[o];
    }
}

template <typename T>
void linear_backward_data_scalar(int nin, int nout, const T* w, const T* gout, T* gin) {
    for (int i = 0; i < nin; ++i) {
        const T* row = w + static_cast<std::size_t>(i) * nout;
        T acc = T(0);
        for (int o = 0; o < nout; ++o) acc += row[o] * gout[o];
        gin[i] += acc;
    }
}

template <typename T>
void linear_backward_weights_scalar(int nin, int nout, const T* in, const T* gout,
                                    T* gw, T* gbias) {
    for (int i = 0; i < nin; ++i) {
        const T v = in[i];
        T* row = gw + static_cast<std::size_t>(i) * nout;
        for (int o = 0; o < nout; ++o) row[o] += v * gout[o];
    }
    if (gbias)
        for (int o = 0; o < nout; ++o) gbias[o] += gout[o];
}

template <typename T>
void relu_forward_scalar(const T* in, int n, T* out) {
    for (int i = 0; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename T>
void relu_backward_scalar(const T* in, const T* gout, int n, T* gin) {
    for (int i = 0; i < n; ++i)
        if (in[i] > T(0)) gin[i] += gout[i];
}

template <typename T>
void upsample2x_forward_scalar(int h, int w, int c, const T* in, T* out) {
    for (int y = 0; y < 2 * h; ++y) {
        const T* row = in + (static_cast<std::size_t>(y / 2) * w) * c;
        T* orow = out + (static_cast<std::size_t>(y) * 2 * w) * c;
        for (int x = 0; x < 2 * w; ++x) {
            const T* px = row + static_cast<std::size_t>(x / 2) * c;
            T* opx = orow + static_cast<std::size_t>(x) * c;
            for (int ch = 0; ch < c; ++ch) opx[ch] = px[ch];
        }
    }
}

template <typename T>
void upsample2x_backward_scalar(int h, int w, int c, const T* gout, T* gin) {
    for (int y = 0; y < 2 * h; ++y) {
        T* grow = gin + (static_cast<std::size_t>(y / 2) * w) * c;
        const T* orow = gout + (static_cast<std::size_t>(y) * 2 * w) * c;
        for (int x = 0; x < 2 * w; ++x) {
            T* gpx = grow + static_cast<std::size_t>(x / 2) * c;
            const T* opx = orow + static_cast<std::size_t>(x) * c;
            for (int ch = 0; ch < c; ++ch) gpx[ch] += opx[ch];
        }
    }
}

template <typename T>
void add_scalar(const T* a, const T* b, int n, T* out) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub_scalar(const T* a, const T* b, int n, T* out) {
    for (int i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void scale_scalar(const T* a, T s, int n, T* out) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * s;
}

template <typename T>
void axpy_scalar(T a, const T* x, int n, T* y) {
    for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
T abs_sum_scalar(const T* x, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += std::abs(x[i]);
    return acc;
}

template <typename T>
T dot_scalar(const T* x, const T* y, int n) {
    T acc = T(0);
    for (int i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

template <typename T>
void adam_step_scalar(int n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
                      T eps, T bias1, T bias2) {
    for (int i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] / bias1;
        const T vhat = v[i] / bias2;
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
Ops<T> make_scalar_table() {
    Ops<T> t;
    t.name = "scalar";
    t.conv2d_forward = &conv2d_forward_scalar<T>;
    t.conv2d_backward_data = &conv2d_backward_data_scalar<T>;
    t.conv2d_backward_weights = &conv2d_backward_weights_scalar<T>;
    t.linear_forward = &linear_forward_scalar<T>;
    t.linear_backward_data = &linear_backward_data_scalar<T>;
    t.linear_backward_weights = &linear_backward_weights_scalar<T>;
    t.relu_forward = &relu_forward_scalar<T>;
    t.relu_backward = &relu_backward_scalar<T>;
    t.upsample2x_forward = &upsample2x_forward_scalar<T>;
    t.upsample2x_backward = &upsample2x_backward_scalar<T>;
    t.add = &add_scalar<T>;
    t.sub = &sub_scalar<T>;
    t.scale = &scale_scalar<T>;
    t.axpy = &axpy_scalar<T>;
    t.abs_sum = &abs_sum_scalar<T>;
    t.dot = &dot_scalar<T>;
    t.adam_step = &adam_step_scalar<T>;
    return t;
}

template Ops<float> make_scalar_table<float>();
template Ops<double> make_scalar_table<double>();

#define NFVS_INSTANTIATE(T)                                                            \
    template void conv2d_forward_scalar<T>(const ConvShape&, const T*, const T*,       \
                                           const T*, T*);                              \
    template void conv2d_backward_data_scalar<T>(const ConvShape&, const T*, const T*, \
                                                 T*);                                  \
    template void conv2d_backward_weights_scalar<T>(const ConvShape&, const T*,        \
                                                    const T*, T*, T*);                 \
    template void linear_forward_scalar<T>(int, int, const T*, const T*, const T*,     \
                                           T*);                                        \
    template void linear_backward_data_scalar<T>(int, int, const T*, const T*, T*);    \
    template void linear_backward_weights_scalar<T>(int, int, const T*, const T*, T*,  \
                                                    T*);                               \
    template void relu_forward_scalar<T>(const T*, int, T*);                           \
    template void relu_backward_scalar<T>(const T*, const T*, int, T*);                \
    template void upsample2x_forward_scalar<T>(int, int, int, const T*, T*);           \
    template void upsample2x_backward_scalar<T>(int, int, int, const T*, T*);          \
    template void add_scalar<T>(const T*, const T*, int, T*);                          \
    template void sub_scalar<T>(const T*, const T*, int, T*);                          \
    template void scale_scalar<T>(const T*, T, int, T*);                               \
    template void axpy_scalar<T>(T, const T*, int, T*);                                \
    template T abs_sum_scalar<T>(const T*, int);                                       \
    template T dot_scalar<T>(const T*, const T*, int);                                 \
    template void adam_step_scalar<T>(int, T*, const T*, T*, T*, T, T, T, T, T, T);

NFVS_INSTANTIATE(float)
NFVS_INSTANTIATE(double)
#undef NFVS_INSTANTIATE

}  // namespace nfvs::kernels::detail
