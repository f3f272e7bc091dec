#include "anodiff/kernels.hpp"

namespace anodiff::kern::scalar {

void axpy(int64_t n, float a, const float* x, float* y) { generic::axpy(n, a, x, y); }
void add(int64_t n, const float* x, float* y) { generic::add(n, x, y); }
void mul(int64_t n, const float* x, float* y) { generic::mul(n, x, y); }
void scale(int64_t n, float a, float* x) { generic::scale(n, a, x); }
float dot(int64_t n, const float* x, const float* y) { return generic::dot(n, x, y); }
float sum(int64_t n, const float* x) { return generic::sum(n, x); }
float sqsum(int64_t n, const float* x) { return generic::sqsum(n, x); }

void gemm_nn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    generic::gemm_nn(m, k, n, a, lda, b, ldb, c, ldc);
}
void gemm_nt(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    generic::gemm_nt(m, k, n, a, lda, b, ldb, c, ldc);
}
void gemm_tn(int64_t m, int64_t k, int64_t n, const float* a, int64_t lda,
             const float* b, int64_t ldb, float* c, int64_t ldc) {
    generic::gemm_tn(m, k, n, a, lda, b, ldb, c, ldc);
}

void conv3x3_acc(float* out, int64_t h_out, int64_t w_out, const float* in_pad,
                 int64_t w_pad, const float* w9) {
    generic::conv3x3_acc(out, h_out, w_out, in_pad, w_pad, w9);
}
void conv3x3_wgrad(const float* g_out, int64_t h_out, int64_t w_out,
                   const float* in_pad, int64_t w_pad, float* gw9) {
    generic::conv3x3_wgrad(g_out, h_out, w_out, in_pad, w_pad, gw9);
}

}  // namespace anodiff::kern::scalar
