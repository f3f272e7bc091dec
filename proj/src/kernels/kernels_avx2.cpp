// AVX2/FMA variants. Built with -mavx2 -mfma; only reached after the runtime
// CPU check in dispatch.cpp.

#include "anodiff/kernels.hpp"

#if defined(ANODIFF_HAVE_AVX2_BUILD)

#include <immintrin.h>

namespace anodiff::kern::avx2 {

namespace {

inline float hsum256(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 sh = _mm_movehdup_ps(lo);
    lo = _mm_add_ps(lo, sh);
    sh = _mm_movehl_ps(sh, lo);
    lo = _mm_add_ss(lo, sh);
    return _mm_cvtss_f32(lo);
}

}  // namespace

void axpy(int64_t n, float a, const float* x, float* y) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 vy = _mm256_loadu_ps(y + i);
        vy = _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), vy);
        _mm256_storeu_ps(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add(int64_t n, const float* x, float* y) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] += x[i];
}

void mul(int64_t n, const float* x, float* y) {
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(y + i, _mm256_mul_ps(_mm256_loadu_ps(y + i), _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) y[i] *= x[i];
}

void scale(int64_t n, float a, float* x) {
    const __m256 va = _mm256_set1_ps(a);
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(x + i, _mm256_mul_ps(va, _mm256_loadu_ps(x + i)));
    for (; i < n; ++i) x[i] *= a;
}

float dot(int64_t n, const float* x, const float* y) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8)
        acc = _mm256_fmadd_ps(_mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i), acc);
    float s = hsum256(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

float sum(int64_t n, const float* x) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) acc = _mm256_add_ps(acc, _mm256_loadu_ps(x + i));
    float s = hsum256(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

float sqsum(int64_t n, const float* x) {
    __m256 acc = _mm256_setzero_ps();
    int64_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_loadu_ps(x + i);
        acc = _mm256_fmadd_ps(v, v, acc);
    }
    float s = hsum256(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    for (int64_t i = 0; i < m; ++i) {
        float* crow = c + i * ldc;
        int64_t p = 0;
        // two rank-1 updates per pass keeps B traffic amortized
        for (; p + 2 <= k; p += 2) {
            const __m256 a0 = _mm256_set1_ps(a[i * lda + p]);
            const __m256 a1 = _mm256_set1_ps(a[i * lda + p + 1]);
            const float* b0 = b + p * ldb;
            const float* b1 = b0 + ldb;
            int64_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 vc = _mm256_loadu_ps(crow + j);
                vc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), vc);
                vc = _mm256_fmadd_ps(a1, _mm256_loadu_ps(b1 + j), vc);
                _mm256_storeu_ps(crow + j, vc);
            }
            for (; j < n; ++j)
                crow[j] += a[i * lda + p] * b0[j] + a[i * lda + p + 1] * b1[j];
        }
        for (; p < k; ++p) {
            const __m256 a0 = _mm256_set1_ps(a[i * lda + p]);
            const float* b0 = b + p * ldb;
            int64_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 vc = _mm256_loadu_ps(crow + j);
                vc = _mm256_fmadd_ps(a0, _mm256_loadu_ps(b0 + j), vc);
                _mm256_storeu_ps(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += a[i * lda + p] * b0[j];
        }
    }
}

void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    for (int64_t i = 0; i < m; ++i) {
        const float* arow = a + i * lda;
        for (int64_t j = 0; j < n; ++j) {
            const float* brow = b + j * ldb;
            __m256 acc = _mm256_setzero_ps();
            int64_t p = 0;
            for (; p + 8 <= k; p += 8)
                acc = _mm256_fmadd_ps(_mm256_loadu_ps(arow + p),
                                      _mm256_loadu_ps(brow + p), acc);
            float s = hsum256(acc);
            for (; p < k; ++p) s += arow[p] * brow[p];
            c[i * ldc + j] += s;
        }
    }
}

void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    for (int64_t p = 0; p < k; ++p) {
        const float* brow = b + p * ldb;
        for (int64_t i = 0; i < m; ++i) {
            const __m256 av = _mm256_set1_ps(a[p * lda + i]);
            float* crow = c + i * ldc;
            int64_t j = 0;
            for (; j + 8 <= n; j += 8) {
                __m256 vc = _mm256_loadu_ps(crow + j);
                vc = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + j), vc);
                _mm256_storeu_ps(crow + j, vc);
            }
            for (; j < n; ++j) crow[j] += a[p * lda + i] * brow[j];
        }
    }
}

void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9) {
    const __m256 w00 = _mm256_set1_ps(w9[0]), w01 = _mm256_set1_ps(w9[1]),
                 w02 = _mm256_set1_ps(w9[2]), w10 = _mm256_set1_ps(w9[3]),
                 w11 = _mm256_set1_ps(w9[4]), w12 = _mm256_set1_ps(w9[5]),
                 w20 = _mm256_set1_ps(w9[6]), w21 = _mm256_set1_ps(w9[7]),
                 w22 = _mm256_set1_ps(w9[8]);
    for (int64_t y = 0; y < h_out; ++y) {
        float* orow = out + y * w_out;
        const float* r0 = in_pad + y * w_pad;
        const float* r1 = r0 + w_pad;
        const float* r2 = r1 + w_pad;
        int64_t x = 0;
        for (; x + 8 <= w_out; x += 8) {
            __m256 acc = _mm256_loadu_ps(orow + x);
            acc = _mm256_fmadd_ps(w00, _mm256_loadu_ps(r0 + x), acc);
            acc = _mm256_fmadd_ps(w01, _mm256_loadu_ps(r0 + x + 1), acc);
            acc = _mm256_fmadd_ps(w02, _mm256_loadu_ps(r0 + x + 2), acc);
            acc = _mm256_fmadd_ps(w10, _mm256_loadu_ps(r1 + x), acc);
            acc = _mm256_fmadd_ps(w11, _mm256_loadu_ps(r1 + x + 1), acc);
            acc = _mm256_fmadd_ps(w12, _mm256_loadu_ps(r1 + x + 2), acc);
            acc = _mm256_fmadd_ps(w20, _mm256_loadu_ps(r2 + x), acc);
            acc = _mm256_fmadd_ps(w21, _mm256_loadu_ps(r2 + x + 1), acc);
            acc = _mm256_fmadd_ps(w22, _mm256_loadu_ps(r2 + x + 2), acc);
            _mm256_storeu_ps(orow + x, acc);
        }
        for (; x < w_out; ++x) {
            float s = orow[x];
            s += w9[0] * r0[x] + w9[1] * r0[x + 1] + w9[2] * r0[x + 2];
            s += w9[3] * r1[x] + w9[4] * r1[x + 1] + w9[5] * r1[x + 2];
            s += w9[6] * r2[x] + w9[7] * r2[x + 1] + w9[8] * r2[x + 2];
            orow[x] = s;
        }
    }
}

void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9) {
    __m256 acc[9];
    for (auto& a : acc) a = _mm256_setzero_ps();
    float tail[9] = {0};
    for (int64_t y = 0; y < h_out; ++y) {
        const float* grow = g_out + y * w_out;
        const float* r[3] = {in_pad + y * w_pad, in_pad + (y + 1) * w_pad,
                             in_pad + (y + 2) * w_pad};
        int64_t x = 0;
        for (; x + 8 <= w_out; x += 8) {
            const __m256 g = _mm256_loadu_ps(grow + x);
            for (int ky = 0; ky < 3; ++ky) {
                acc[ky * 3 + 0] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r[ky] + x), acc[ky * 3 + 0]);
                acc[ky * 3 + 1] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r[ky] + x + 1), acc[ky * 3 + 1]);
                acc[ky * 3 + 2] = _mm256_fmadd_ps(g, _mm256_loadu_ps(r[ky] + x + 2), acc[ky * 3 + 2]);
            }
        }
        for (; x < w_out; ++x) {
            const float g = grow[x];
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) tail[ky * 3 + kx] += g * r[ky][x + kx];
        }
    }
    for (int i = 0; i < 9; ++i) gw9[i] += hsum256(acc[i]) + tail[i];
}

}  // namespace anodiff::kern::avx2

#endif  // ANODIFF_HAVE_AVX2_BUILD
