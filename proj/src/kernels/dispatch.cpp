#include "anodiff/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace anodiff::kern {

namespace {

bool cpu_has_avx2() {
#if defined(ANODIFF_HAVE_AVX2_BUILD) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend detect_backend() {
    if (const char* env = std::getenv("ANODIFF_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
    }
    return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend> g_backend{detect_backend()};

}  // namespace

Backend best_backend() { return cpu_has_avx2() ? Backend::avx2 : Backend::scalar; }

bool backend_available(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && cpu_has_avx2());
}

const char* backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) {
    if (!backend_available(b))
        throw std::runtime_error(std::string("kernel backend unavailable: ") + backend_name(b));
    g_backend.store(b, std::memory_order_relaxed);
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

#if defined(ANODIFF_HAVE_AVX2_BUILD)
#define ANODIFF_DISPATCH(fn, ...)                          \
    if (active_backend() == Backend::avx2)                 \
        return avx2::fn(__VA_ARGS__);                      \
    return scalar::fn(__VA_ARGS__)
#else
#define ANODIFF_DISPATCH(fn, ...) return scalar::fn(__VA_ARGS__)
#endif

void axpy(int64_t n, float a, const float* x, float* y) { ANODIFF_DISPATCH(axpy, n, a, x, y); }
void add(int64_t n, const float* x, float* y) { ANODIFF_DISPATCH(add, n, x, y); }
void mul(int64_t n, const float* x, float* y) { ANODIFF_DISPATCH(mul, n, x, y); }
void scale(int64_t n, float a, float* x) { ANODIFF_DISPATCH(scale, n, a, x); }
float dot(int64_t n, const float* x, const float* y) { ANODIFF_DISPATCH(dot, n, x, y); }
float sum(int64_t n, const float* x) { ANODIFF_DISPATCH(sum, n, x); }
float sqsum(int64_t n, const float* x) { ANODIFF_DISPATCH(sqsum, n, x); }

void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    ANODIFF_DISPATCH(gemm_nn, m, k, n, a, lda, b, ldb, c, ldc);
}
void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    ANODIFF_DISPATCH(gemm_nt, m, k, n, a, lda, b, ldb, c, ldc);
}
void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    ANODIFF_DISPATCH(gemm_tn, m, k, n, a, lda, b, ldb, c, ldc);
}
void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9) {
    ANODIFF_DISPATCH(conv3x3_acc, out, h_out, w_out, in_pad, w_pad, w9);
}
void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9) {
    ANODIFF_DISPATCH(conv3x3_wgrad, g_out, h_out, w_out, in_pad, w_pad, gw9);
}

}  // namespace anodiff::kern
