#include "kernels_detail.hpp"

// AVX2/FMA variants of the arithmetic-heavy kernels. The activation layout
// keeps channels innermost, so convolutions and linear layers vectorize over
// the output-channel axis; reductions vectorize over the contiguous axis and
// fold lanes in a fixed order. Upsampling is pure data movement and reuses
// the scalar definition.

#ifdef NFVS_HAVE_AVX2

#include <immintrin.h>

#include <cmath>

namespace nfvs::kernels::detail {
namespace {

struct F32x8 {
    using scalar = float;
    static constexpr int width = 8;
    __m256 v;

    static F32x8 zero() { return {_mm256_setzero_ps()}; }
    static F32x8 load(const float* p) { return {_mm256_loadu_ps(p)}; }
    static F32x8 set1(float x) { return {_mm256_set1_ps(x)}; }
    void store(float* p) const { _mm256_storeu_ps(p, v); }

    friend F32x8 operator+(F32x8 a, F32x8 b) { return {_mm256_add_ps(a.v, b.v)}; }
    friend F32x8 operator-(F32x8 a, F32x8 b) { return {_mm256_sub_ps(a.v, b.v)}; }
    friend F32x8 operator*(F32x8 a, F32x8 b) { return {_mm256_mul_ps(a.v, b.v)}; }
    friend F32x8 operator/(F32x8 a, F32x8 b) { return {_mm256_div_ps(a.v, b.v)}; }
    friend F32x8 fmadd(F32x8 a, F32x8 b, F32x8 c) {
        return {_mm256_fmadd_ps(a.v, b.v, c.v)};
    }
    F32x8 abs() const {
        return {_mm256_andnot_ps(_mm256_set1_ps(-0.0f), v)};
    }
    F32x8 sqrt() const { return {_mm256_sqrt_ps(v)}; }
    F32x8 max0() const { return {_mm256_max_ps(v, _mm256_setzero_ps())}; }

    float hsum() const {
        __m128 lo = _mm256_castps256_ps128(v);
        __m128 hi = _mm256_extractf128_ps(v, 1);
        lo = _mm_add_ps(lo, hi);
        lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
        lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
        return _mm_cvtss_f32(lo);
    }
};

struct F64x4 {
    using scalar = double;
    static constexpr int width = 4;
    __m256d v;

    static F64x4 zero() { return {_mm256_setzero_pd()}; }
    static F64x4 load(const double* p) { return {_mm256_loadu_pd(p)}; }
    static F64x4 set1(double x) { return {_mm256_set1_pd(x)}; }
    void store(double* p) const { _mm256_storeu_pd(p, v); }

    friend F64x4 operator+(F64x4 a, F64x4 b) { return {_mm256_add_pd(a.v, b.v)}; }
    friend F64x4 operator-(F64x4 a, F64x4 b) { return {_mm256_sub_pd(a.v, b.v)}; }
    friend F64x4 operator*(F64x4 a, F64x4 b) { return {_mm256_mul_pd(a.v, b.v)}; }
    friend F64x4 operator/(F64x4 a, F64x4 b) { return {_mm256_div_pd(a.v, b.v)}; }
    friend F64x4 fmadd(F64x4 a, F64x4 b, F64x4 c) {
        return {_mm256_fmadd_pd(a.v, b.v, c.v)};
    }
    F64x4 abs() const {
        return {_mm256_andnot_pd(_mm256_set1_pd(-0.0), v)};
    }
    F64x4 sqrt() const { return {_mm256_sqrt_pd(v)}; }
    F64x4 max0() const { return {_mm256_max_pd(v, _mm256_setzero_pd())}; }

    double hsum() const {
        __m128d lo = _mm256_castpd256_pd128(v);
        __m128d hi = _mm256_extractf128_pd(v, 1);
        lo = _mm_add_pd(lo, hi);
        return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
    }
};

template <typename T>
struct vec_for;
template <>
struct vec_for<float> {
    using type = F32x8;
};
template <>
struct vec_for<double> {
    using type = F64x4;
};

template <typename V, typename T = typename V::scalar>
void conv2d_forward_avx(const ConvShape& s, const T* in, const T* w, const T* bias,
                        T* out) {
    const int oh = s.oh(), ow = s.ow();
    const int co_vec = s.co - s.co % V::width;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            T* o = out + (static_cast<std::size_t>(oy) * ow + ox) * s.co;
            for (int f0 = 0; f0 < co_vec; f0 += V::width) {
                V acc = bias ? V::load(bias + f0) : V::zero();
                for (int ky = 0; ky < s.k; ++ky) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.ih) continue;
                    for (int kx = 0; kx < s.k; ++kx) {
                        const int ix = ox * s.stride + kx - s.pad;
                        if (ix < 0 || ix >= s.iw) continue;
                        const T* px = in + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                        const T* wk =
                            w + ((static_cast<std::size_t>(ky) * s.k + kx) * s.ci) * s.co + f0;
                        for (int c = 0; c < s.ci; ++c)
                            acc = fmadd(V::set1(px[c]),
                                        V::load(wk + static_cast<std::size_t>(c) * s.co), acc);
                    }
                }
                acc.store(o + f0);
            }
            for (int f = co_vec; f < s.co; ++f) {
                T acc = bias ? bias[f] : T(0);
                for (int ky = 0; ky < s.k; ++ky) {
                    const int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= s.ih) continue;
                    for (int kx = 0; kx < s.k; ++kx) {
                        const int ix = ox * s.stride + kx - s.pad;
                        if (ix < 0 || ix >= s.iw) continue;
                        const T* px = in + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                        const T* wk =
                            w + ((static_cast<std::size_t>(ky) * s.k + kx) * s.ci) * s.co;
                        for (int c = 0; c < s.ci; ++c)
                            acc += px[c] * wk[static_cast<std::size_t>(c) * s.co + f];
                    }
                }
                o[f] = acc;
            }
        }
    }
}

template <typename V, typename T = typename V::scalar>
void conv2d_backward_data_avx(const ConvShape& s, const T* w, const T* gout, T* gin) {
    const int oh = s.oh(), ow = s.ow();
    const int co_vec = s.co - s.co % V::width;
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
                        V acc = V::zero();
                        for (int f0 = 0; f0 < co_vec; f0 += V::width)
                            acc = fmadd(V::load(wc + f0), V::load(go + f0), acc);
                        T tail = acc.hsum();
                        for (int f = co_vec; f < s.co; ++f) tail += wc[f] * go[f];
                        gi[c] += tail;
                    }
                }
            }
        }
    }
}

template <typename V, typename T = typename V::scalar>
void conv2d_backward_weights_avx(const ConvShape& s, const T* in, const T* gout,
                                 T* gw, T* gbias) {
    const int oh = s.oh(), ow = s.ow();
    const int co_vec = s.co - s.co % V::width;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const T* go = gout + (static_cast<std::size_t>(oy) * ow + ox) * s.co;
            if (gbias) {
                for (int f0 = 0; f0 < co_vec; f0 += V::width)
                    (V::load(gbias + f0) + V::load(go + f0)).store(gbias + f0);
                for (int f = co_vec; f < s.co; ++f) gbias[f] += go[f];
            }
            for (int ky = 0; ky < s.k; ++ky) {
                const int iy = oy * s.stride + ky - s.pad;
                if (iy < 0 || iy >= s.ih) continue;
                for (int kx = 0; kx < s.k; ++kx) {
                    const int ix = ox * s.stride + kx - s.pad;
                    if (ix < 0 || ix >= s.iw) continue;
                    const T* px = in + (static_cast<std::size_t>(iy) * s.iw + ix) * s.ci;
                    T* wk = gw + (static_cast<std::size_t>(ky) * s.k + kx) * s.ci * s.co;
                    for (int c = 0; c < s.ci; ++c) {
                        T* wc = wk + static_cast<std::size_t>(c) * s.co;
                        const V val = V::set1(px[c]);
                        for (int f0 = 0; f0 < co_vec; f0 += V::width)
                            fmadd(val, V::load(go + f0), V::load(wc + f0)).store(wc + f0);
                        for (int f = co_vec; f < s.co; ++f) wc[f] += px[c] * go[f];
                    }
                }
            }
        }
    }
}

template <typename V, typename T = typename V::scalar>
void linear_forward_avx(int nin, int nout, const T* in, const T* w, const T* bias,
                        T* out) {
    const int vec = nout - nout % V::width;
    for (int o = 0; o < nout; ++o) out[o] = bias ? bias[o] : T(0);
    for (int i = 0; i < nin; ++i) {
        const V val = V::set1(in[i]);
        const T* row = w + static_cast<std::size_t>(i) * nout;
        for (int o0 = 0; o0 < vec; o0 += V::width)
            fmadd(val, V::load(row + o0), V::load(out + o0)).store(out + o0);
        for (int o = vec; o < nout; ++o) out[o] += in[i] * row[o];
    }
}

template <typename V, typename T = typename V::scalar>
void linear_backward_data_avx(int nin, int nout, const T* w, const T* gout, T* gin) {
    const int vec = nout - nout % V::width;
    for (int i = 0; i < nin; ++i) {
        const T* row = w + static_cast<std::size_t>(i) * nout;
        V acc = V::zero();
        for (int o0 = 0; o0 < vec; o0 += V::width)
            acc = fmadd(V::load(row + o0), V::load(gout + o0), acc);
        T tail = acc.hsum();
        for (int o = vec; o < nout; ++o) tail += row[o] * gout[o];
        gin[i] += tail;
    }
}

template <typename V, typename T = typename V::scalar>
void linear_backward_weights_avx(int nin, int nout, const T* in, const T* gout,
                                 T* gw, T* gbias) {
    const int vec = nout - nout % V::width;
    for (int i = 0; i < nin; ++i) {
        const V val = V::set1(in[i]);
        T* row = gw + static_cast<std::size_t>(i) * nout;
        for (int o0 = 0; o0 < vec; o0 += V::width)
            fmadd(val, V::load(gout + o0), V::load(row + o0)).store(row + o0);
        for (int o = vec; o < nout; ++o) row[o] += in[i] * gout[o];
    }
    if (gbias) {
        for (int o0 = 0; o0 < vec; o0 += V::width)
            (V::load(gbias + o0) + V::load(gout + o0)).store(gbias + o0);
        for (int o = vec; o < nout; ++o) gbias[o] += gout[o];
    }
}

template <typename V, typename T = typename V::scalar>
void relu_forward_avx(const T* in, int n, T* out) {
    const int vec = n - n % V::width;
    for (int i = 0; i < vec; i += V::width) V::load(in + i).max0().store(out + i);
    for (int i = vec; i < n; ++i) out[i] = in[i] > T(0) ? in[i] : T(0);
}

template <typename V, typename T = typename V::scalar>
void add_avx(const T* a, const T* b, int n, T* out) {
    const int vec = n - n % V::width;
    for (int i = 0; i < vec; i += V::width) (V::load(a + i) + V::load(b + i)).store(out + i);
    for (int i = vec; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename V, typename T = typename V::scalar>
void sub_avx(const T* a, const T* b, int n, T* out) {
    const int vec = n - n % V::width;
    for (int i = 0; i < vec; i += V::width) (V::load(a + i) - V::load(b + i)).store(out + i);
    for (int i = vec; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename V, typename T = typename V::scalar>
void scale_avx(const T* a, T s, int n, T* out) {
    const int vec = n - n % V::width;
    const V vs = V::set1(s);
    for (int i = 0; i < vec; i += V::width) (V::load(a + i) * vs).store(out + i);
    for (int i = vec; i < n; ++i) out[i] = a[i] * s;
}

template <typename V, typename T = typename V::scalar>
void axpy_avx(T a, const T* x, int n, T* y) {
    const int vec = n - n % V::width;
    const V va = V::set1(a);
    for (int i = 0; i < vec; i += V::width)
        fmadd(va, V::load(x + i), V::load(y + i)).store(y + i);
    for (int i = vec; i < n; ++i) y[i] += a * x[i];
}

template <typename V, typename T = typename V::scalar>
T abs_sum_avx(const T* x, int n) {
    const int vec = n - n % V::width;
    V acc = V::zero();
    for (int i = 0; i < vec; i += V::width) acc = acc + V::load(x + i).abs();
    T total = acc.hsum();
    for (int i = vec; i < n; ++i) total += std::abs(x[i]);
    return total;
}

template <typename V, typename T = typename V::scalar>
T dot_avx(const T* x, const T* y, int n) {
    const int vec = n - n % V::width;
    V acc = V::zero();
    for (int i = 0; i < vec; i += V::width) acc = fmadd(V::load(x + i), V::load(y + i), acc);
    T total = acc.hsum();
    for (int i = vec; i < n; ++i) total += x[i] * y[i];
    return total;
}

template <typename V, typename T = typename V::scalar>
void adam_step_avx(int n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2, T eps,
                   T bias1, T bias2) {
    const int vec = n - n % V::width;
    const V vb1 = V::set1(beta1), vb2 = V::set1(beta2);
    const V vc1 = V::set1(T(1) - beta1), vc2 = V::set1(T(1) - beta2);
    const V vlr = V::set1(lr), veps = V::set1(eps);
    const V vib1 = V::set1(T(1) / bias1), vib2 = V::set1(T(1) / bias2);
    for (int i = 0; i < vec; i += V::width) {
        const V gi = V::load(g + i);
        V mi = fmadd(vc1, gi, vb1 * V::load(m + i));
        V vi = fmadd(vc2, gi * gi, vb2 * V::load(v + i));
        mi.store(m + i);
        vi.store(v + i);
        const V mhat = mi * vib1;
        const V vhat = vi * vib2;
        (V::load(w + i) - vlr * mhat / (vhat.sqrt() + veps)).store(w + i);
    }
    for (int i = vec; i < n; ++i) {
        m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
        v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
        const T mhat = m[i] * (T(1) / bias1);
        const T vhat = v[i] * (T(1) / bias2);
        w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

template <typename T>
Ops<T> make_avx2_table() {
    using V = typename vec_for<T>::type;
    Ops<T> t;
    t.name = "avx2";
    t.conv2d_forward = &conv2d_forward_avx<V>;
    t.conv2d_backward_data = &conv2d_backward_data_avx<V>;
    t.conv2d_backward_weights = &conv2d_backward_weights_avx<V>;
    t.linear_forward = &linear_forward_avx<V>;
    t.linear_backward_data = &linear_backward_data_avx<V>;
    t.linear_backward_weights = &linear_backward_weights_avx<V>;
    t.relu_forward = &relu_forward_avx<V>;
    t.relu_backward = &relu_backward_scalar<T>;
    t.upsample2x_forward = &upsample2x_forward_scalar<T>;
    t.upsample2x_backward = &upsample2x_backward_scalar<T>;
    t.add = &add_avx<V>;
    t.sub = &sub_avx<V>;
    t.scale = &scale_avx<V>;
    t.axpy = &axpy_avx<V>;
    t.abs_sum = &abs_sum_avx<V>;
    t.dot = &dot_avx<V>;
    t.adam_step = &adam_step_avx<V>;
    return t;
}

}  // namespace

template <typename T>
const Ops<T>* avx2_table() {
    static const Ops<T> table = make_avx2_table<T>();
    return &table;
}

template const Ops<float>* avx2_table<float>();
template const Ops<double>* avx2_table<double>();

}  // namespace nfvs::kernels::detail

#else  // NFVS_HAVE_AVX2

namespace nfvs::kernels::detail {

template <typename T>
const Ops<T>* avx2_table() {
    return nullptr;
}

template const Ops<float>* avx2_table<float>();
template const Ops<double>* avx2_table<double>();

}  // namespace nfvs::kernels::detail

#endif
