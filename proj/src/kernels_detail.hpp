#pragma once

// Internal declarations shared by the backend translation units. The scalar
// definitions live in kernels_scalar.cpp, compiled without extended
// instruction sets, so other backends can reuse them for ops they do not
// vectorize.

#include "nfvs/kernels.hpp"

namespace nfvs::kernels::detail {

template <typename T>
void conv2d_forward_scalar(const ConvShape& s, const T* in, const T* w, const T* bias,
                           T* out);
template <typename T>
void conv2d_backward_data_scalar(const ConvShape& s, const T* w, const T* gout, T* gin);
template <typename T>
void conv2d_backward_weights_scalar(const ConvShape& s, const T* in, const T* gout,
                                    T* gw, T* gbias);
template <typename T>
void linear_forward_scalar(int nin, int nout, const T* in, const T* w, const T* bias,
                           T* out);
template <typename T>
void linear_backward_data_scalar(int nin, int nout, const T* w, const T* gout, T* gin);
template <typename T>
void linear_backward_weights_scalar(int nin, int nout, const T* in, const T* gout,
                                    T* gw, T* gbias);
template <typename T>
void relu_forward_scalar(const T* in, int n, T* out);
template <typename T>
void relu_backward_scalar(const T* in, const T* gout, int n, T* gin);
template <typename T>
void upsample2x_forward_scalar(int h, int w, int c, const T* in, T* out);
template <typename T>
void upsample2x_backward_scalar(int h, int w, int c, const T* gout, T* gin);
template <typename T>
void add_scalar(const T* a, const T* b, int n, T* out);
template <typename T>
void sub_scalar(const T* a, const T* b, int n, T* out);
template <typename T>
void scale_scalar(const T* a, T s, int n, T* out);
template <typename T>
void axpy_scalar(T a, const T* x, int n, T* y);
template <typename T>
T abs_sum_scalar(const T* x, int n);
template <typename T>
T dot_scalar(const T* x, const T* y, int n);
template <typename T>
void adam_step_scalar(int n, T* w, const T* g, T* m, T* v, T lr, T beta1, T beta2,
                      T eps, T bias1, T bias2);

template <typename T>
Ops<T> make_scalar_table();

// Defined in kernels_avx2.cpp (built only when the compiler supports the
// flags); returns nullptr when compiled out.
template <typename T>
const Ops<T>* avx2_table();

}  // namespace nfvs::kernels::detail
