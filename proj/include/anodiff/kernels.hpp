#pragma once

// Hot numeric inner loops. Every kernel has a scalar reference implementation
// and, on x86-64, an AVX2/FMA variant selected at runtime. The two paths are
// equivalence-tested against each other; double precision always takes the
// generic scalar path.
//
// Conventions: row-major, ld* = leading dimension (row stride). gemm kernels
// accumulate into C. conv kernels accumulate into their output plane.

#include <cstdint>

namespace anodiff::kern {

enum class Backend { scalar, avx2 };

// Best backend supported by the running CPU.
Backend best_backend();
bool backend_available(Backend b);
const char* backend_name(Backend b);

// Force a backend (tests, ANODIFF_KERNELS=scalar|avx2). Throws if unavailable.
void set_backend(Backend b);
Backend active_backend();

// ---- dispatched float API ----
void axpy(int64_t n, float a, const float* x, float* y);          // y += a*x
void add(int64_t n, const float* x, float* y);                    // y += x
void mul(int64_t n, const float* x, float* y);                    // y *= x
void scale(int64_t n, float a, float* x);                         // x *= a
float dot(int64_t n, const float* x, const float* y);
float sum(int64_t n, const float* x);
float sqsum(int64_t n, const float* x);

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
// C[M,N] += A[M,K] * B[N,K]^T
void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
// C[M,N] += A[K,M]^T * B[K,N]
void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);

// 3x3 correlation, stride 1. in_pad is an (h_out+2) x (w_out+2) plane,
// out[y][x] += sum_{ky,kx} w9[ky*3+kx] * in_pad[y+ky][x+kx].
void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9);
// gw9[ky*3+kx] += sum_{y,x} g_out[y][x] * in_pad[y+ky][x+kx]
void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9);

// ---- per-backend entry points (used by the equivalence tests) ----
namespace scalar {
void axpy(int64_t n, float a, const float* x, float* y);
void add(int64_t n, const float* x, float* y);
void mul(int64_t n, const float* x, float* y);
void scale(int64_t n, float a, float* x);
float dot(int64_t n, const float* x, const float* y);
float sum(int64_t n, const float* x);
float sqsum(int64_t n, const float* x);
void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9);
void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define ANODIFF_HAVE_AVX2_BUILD 1
namespace avx2 {
void axpy(int64_t n, float a, const float* x, float* y);
void add(int64_t n, const float* x, float* y);
void mul(int64_t n, const float* x, float* y);
void scale(int64_t n, float a, float* x);
float dot(int64_t n, const float* x, const float* y);
float sum(int64_t n, const float* x);
float sqsum(int64_t n, const float* x);
void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc);
void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9);
void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9);
}  // namespace avx2
#endif

// ---- generic reference (any scalar type; the float scalar backend is
// exactly these with T = float) ----
namespace generic {

template <typename T>
inline void axpy(int64_t n, T a, const T* x, T* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
inline void add(int64_t n, const T* x, T* y) {
    for (int64_t i = 0; i < n; ++i) y[i] += x[i];
}

template <typename T>
inline void mul(int64_t n, const T* x, T* y) {
    for (int64_t i = 0; i < n; ++i) y[i] *= x[i];
}

template <typename T>
inline void scale(int64_t n, T a, T* x) {
    for (int64_t i = 0; i < n; ++i) x[i] *= a;
}

template <typename T>
inline T dot(int64_t n, const T* x, const T* y) {
    T s = 0;
    for (int64_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

template <typename T>
inline T sum(int64_t n, const T* x) {
    T s = 0;
    for (int64_t i = 0; i < n; ++i) s += x[i];
    return s;
}

template <typename T>
inline T sqsum(int64_t n, const T* x) {
    T s = 0;
    for (int64_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

template <typename T>
inline void gemm_nn(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                    const T* b, int64_t ldb, T* c, int64_t ldc) {
    for (int64_t i = 0; i < m; ++i) {
        T* crow = c + i * ldc;
        for (int64_t p = 0; p < k; ++p) {
            const T av = a[i * lda + p];
            const T* brow = b + p * ldb;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
inline void gemm_nt(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                    const T* b, int64_t ldb, T* c, int64_t ldc) {
    for (int64_t i = 0; i < m; ++i) {
        const T* arow = a + i * lda;
        for (int64_t j = 0; j < n; ++j) {
            const T* brow = b + j * ldb;
            T s = 0;
            for (int64_t p = 0; p < k; ++p) s += arow[p] * brow[p];
            c[i * ldc + j] += s;
        }
    }
}

template <typename T>
inline void gemm_tn(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                    const T* b, int64_t ldb, T* c, int64_t ldc) {
    for (int64_t p = 0; p < k; ++p) {
        const T* brow = b + p * ldb;
        for (int64_t i = 0; i < m; ++i) {
            const T av = a[p * lda + i];
            T* crow = c + i * ldc;
            for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

template <typename T>
inline void conv3x3_acc(T* out, int64_t h_out, int64_t w_out, const T* in_pad,
                        int64_t w_pad, const T* w9) {
    for (int64_t y = 0; y < h_out; ++y) {
        T* orow = out + y * w_out;
        for (int64_t ky = 0; ky < 3; ++ky) {
            const T* irow = in_pad + (y + ky) * w_pad;
            const T w0 = w9[ky * 3 + 0], w1 = w9[ky * 3 + 1], w2 = w9[ky * 3 + 2];
            for (int64_t x = 0; x < w_out; ++x)
                orow[x] += w0 * irow[x] + w1 * irow[x + 1] + w2 * irow[x + 2];
        }
    }
}

template <typename T>
inline void conv3x3_wgrad(const T* g_out, int64_t h_out, int64_t w_out,
                          const T* in_pad, int64_t w_pad, T* gw9) {
    for (int64_t ky = 0; ky < 3; ++ky) {
        for (int64_t kx = 0; kx < 3; ++kx) {
            T s = 0;
            for (int64_t y = 0; y < h_out; ++y) {
                const T* grow = g_out + y * w_out;
                const T* irow = in_pad + (y + ky) * w_pad + kx;
                for (int64_t x = 0; x < w_out; ++x) s += grow[x] * irow[x];
            }
            gw9[ky * 3 + kx] += s;
        }
    }
}

}  // namespace generic

// ---- type-generic shims used by templated layer code ----
template <typename T>
inline void t_axpy(int64_t n, T a, const T* x, T* y) { generic::axpy(n, a, x, y); }
template <>
inline void t_axpy<float>(int64_t n, float a, const float* x, float* y) { axpy(n, a, x, y); }

template <typename T>
inline void t_add(int64_t n, const T* x, T* y) { generic::add(n, x, y); }
template <>
inline void t_add<float>(int64_t n, const float* x, float* y) { add(n, x, y); }

template <typename T>
inline T t_dot(int64_t n, const T* x, const T* y) { return generic::dot(n, x, y); }
template <>
inline float t_dot<float>(int64_t n, const float* x, const float* y) { return dot(n, x, y); }

template <typename T>
inline T t_sum(int64_t n, const T* x) { return generic::sum(n, x); }
template <>
inline float t_sum<float>(int64_t n, const float* x) { return sum(n, x); }

template <typename T>
inline T t_sqsum(int64_t n, const T* x) { return generic::sqsum(n, x); }
template <>
inline float t_sqsum<float>(int64_t n, const float* x) { return sqsum(n, x); }

template <typename T>
inline void t_gemm_nn(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                      const T* b, int64_t ldb, T* c, int64_t ldc) {
    generic::gemm_nn(m, k, n, a, lda, b, ldb, c, ldc);
}
template <>
inline void t_gemm_nn<float>(int64_t m, int64_t k, int64_t n, const float* a,
                             int64_t lda, const float* b, int64_t ldb, float* c,
                             int64_t ldc) {
    gemm_nn(m, k, n, a, lda, b, ldb, c, ldc);
}

template <typename T>
inline void t_gemm_nt(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                      const T* b, int64_t ldb, T* c, int64_t ldc) {
    generic::gemm_nt(m, k, n, a, lda, b, ldb, c, ldc);
}
template <>
inline void t_gemm_nt<float>(int64_t m, int64_t k, int64_t n, const float* a,
                             int64_t lda, const float* b, int64_t ldb, float* c,
                             int64_t ldc) {
    gemm_nt(m, k, n, a, lda, b, ldb, c, ldc);
}

template <typename T>
inline void t_gemm_tn(int64_t m, int64_t k, int64_t n, const T* a, int64_t lda,
                      const T* b, int64_t ldb, T* c, int64_t ldc) {
    generic::gemm_tn(m, k, n, a, lda, b, ldb, c, ldc);
}
template <>
inline void t_gemm_tn<float>(int64_t m, int64_t k, int64_t n, const float* a,
                             int64_t lda, const float* b, int64_t ldb, float* c,
                             int64_t ldc) {
    gemm_tn(m, k, n, a, lda, b, ldb, c, ldc);
}

template <typename T>
inline void t_conv3x3_acc(T* out, int64_t h_out, int64_t w_out, const T* in_pad,
                          int64_t w_pad, const T* w9) {
    generic::conv3x3_acc(out, h_out, w_out, in_pad, w_pad, w9);
}
template <>
inline void t_conv3x3_acc<float>(float* out, int64_t h_out, int64_t w_out,
                                 const float* in_pad, int64_t w_pad,
                                 const float* w9) {
    conv3x3_acc(out, h_out, w_out, in_pad, w_pad, w9);
}

template <typename T>
inline void t_conv3x3_wgrad(const T* g_out, int64_t h_out, int64_t w_out,
                            const T* in_pad, int64_t w_pad, T* gw9) {
    generic::conv3x3_wgrad(g_out, h_out, w_out, in_pad, w_pad, gw9);
}
template <>
inline void t_conv3x3_wgrad<float>(const float* g_out, int64_t h_out,
                                   int64_t w_out, const float* in_pad,
                                   int64_t w_pad, float* gw9) {
    conv3x3_wgrad(g_out, h_out, w_out, in_pad, w_pad, gw9);
}

}  // namespace anodiff::kern
