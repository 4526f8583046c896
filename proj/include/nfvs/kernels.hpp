#pragma once

#include <string>
#include <vector>

namespace nfvs::kernels {

/// Geometry of a 2D convolution over height x width x channels activations
/// with square k x k kernels laid out (ky, kx, ci, co).
struct ConvShape {
    int ih = 0, iw = 0;  // input height, width
    int ci = 0, co = 0;  // input, output channels
    int k = 3;           // kernel side
    int stride = 1;
    int pad = 1;

    int oh() const { return (ih + 2 * pad - k) / stride + 1; }
    int ow() const { return (iw + 2 * pad - k) / stride + 1; }
};

/// One backend's kernel table. Backward kernels accumulate into their
/// gradient outputs; callers zero the buffers when starting a new pass.
template <typename T>
struct Ops {
    const char* name;

    void (*conv2d_forward)(const ConvShape& s, const T* in, const T* w, const T* bias,
                           T* out);
    void (*conv2d_backward_data)(const ConvShape& s, const T* w, const T* gout, T* gin);
    void (*conv2d_backward_weights)(const ConvShape& s, const T* in, const T* gout,
                                    T* gw, T* gbias);

    void (*linear_forward)(int nin, int nout, const T* in, const T* w, const T* bias,
                           T* out);
    void (*linear_backward_data)(int nin, int nout, const T* w, const T* gout, T* gin);
    void (*linear_backward_weights)(int nin, int nout, const T* in, const T* gout,
                                    T* gw, T* gbias);

    void (*relu_forward)(const T* in, int n, T* out);
    void (*relu_backward)(const T* in, const T* gout, int n, T* gin);

    void (*upsample2x_forward)(int h, int w, int c, const T* in, T* out);
    void (*upsample2x_backward)(int h, int w, int c, const T* gout, T* gin);

    void (*add)(const T* a, const T* b, int n, T* out);
    void (*sub)(const T* a, const T* b, int n, T* out);
    void (*scale)(const T* a, T s, int n, T* out);
    void (*axpy)(T a, const T* x, int n, T* y);
    T (*abs_sum)(const T* x, int n);
    T (*dot)(const T* x, const T* y, int n);

    void (*adam_step)(int n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
                      T eps, T bias1, T bias2);
};

/// Backend selected at first use: the NFVS_KERNELS environment variable
/// ("scalar", "avx2", "auto") wins, otherwise the best instruction set the
/// CPU reports. The choice is process-wide and made once.
template <typename T>
const Ops<T>& active();

/// Fetch a backend by name regardless of the active selection. Throws
/// ConfigError for unknown names or unavailable instruction sets.
template <typename T>
const Ops<T>& backend(const std::string& name);

std::vector<std::string> available_backends();
const char* active_name();
bool cpu_has_avx2();

}  // namespace nfvs::kernels
