#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "anodiff/kernels.hpp"
#include "anodiff/util/rng.hpp"

using namespace anodiff;

namespace {

std::vector<float> random_vec(Rng& rng, int64_t n, double scale = 1.0) {
    std::vector<float> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<float>(rng.normal() * scale);
    return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, double tol) {
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max(1.0, std::abs(static_cast<double>(a[i])));
        CHECK(std::abs(static_cast<double>(a[i]) - b[i]) / denom < tol);
    }
}

}  // namespace

#if defined(ANODIFF_HAVE_AVX2_BUILD)

// Every SIMD kernel must agree with its scalar reference on random inputs.
TEST_CASE("avx2 kernels match scalar reference") {
    if (!kern::backend_available(kern::Backend::avx2)) {
        MESSAGE("avx2 not available on this CPU; skipping");
        return;
    }
    Rng rng(7);
    for (int64_t n : {1, 7, 8, 31, 64, 200, 1031}) {
        auto x = random_vec(rng, n), base = random_vec(rng, n);

        auto ys = base;
        kern::scalar::axpy(n, 1.37f, x.data(), ys.data());
        auto yv = base;
        kern::avx2::axpy(n, 1.37f, x.data(), yv.data());
        check_close(ys, yv, 1e-6);

        ys = base;
        kern::scalar::add(n, x.data(), ys.data());
        yv = base;
        kern::avx2::add(n, x.data(), yv.data());
        check_close(ys, yv, 1e-6);

        ys = base;
        kern::scalar::mul(n, x.data(), ys.data());
        yv = base;
        kern::avx2::mul(n, x.data(), yv.data());
        check_close(ys, yv, 1e-6);

        ys = base;
        kern::scalar::scale(n, 0.73f, ys.data());
        yv = base;
        kern::avx2::scale(n, 0.73f, yv.data());
        check_close(ys, yv, 1e-6);

        const double ds = kern::scalar::dot(n, x.data(), base.data());
        const double dv = kern::avx2::dot(n, x.data(), base.data());
        CHECK(std::abs(ds - dv) < 1e-3 * std::max(1.0, std::abs(ds)));

        CHECK(std::abs(kern::scalar::sum(n, x.data()) - kern::avx2::sum(n, x.data())) <
              1e-3 * std::max<float>(1.0f, std::abs(kern::scalar::sum(n, x.data()))));
        CHECK(std::abs(kern::scalar::sqsum(n, x.data()) - kern::avx2::sqsum(n, x.data())) <
              1e-3 * kern::scalar::sqsum(n, x.data()));
    }
}

TEST_CASE("avx2 gemm variants match scalar reference") {
    if (!kern::backend_available(kern::Backend::avx2)) return;
    Rng rng(11);
    for (auto [m, k, n] : std::vector<std::array<int64_t, 3>>{
             {1, 1, 1}, {3, 5, 7}, {8, 16, 8}, {13, 9, 21}, {32, 24, 40}}) {
        auto a = random_vec(rng, m * k);
        auto b_nn = random_vec(rng, k * n);
        auto b_nt = random_vec(rng, n * k);
        auto b_tn = random_vec(rng, k * n);
        auto a_tn = random_vec(rng, k * m);
        auto c0 = random_vec(rng, m * n);

        auto cs = c0, cv = c0;
        kern::scalar::gemm_nn(m, k, n, a.data(), k, b_nn.data(), n, cs.data(), n);
        kern::avx2::gemm_nn(m, k, n, a.data(), k, b_nn.data(), n, cv.data(), n);
        check_close(cs, cv, 1e-4);

        cs = c0;
        cv = c0;
        kern::scalar::gemm_nt(m, k, n, a.data(), k, b_nt.data(), k, cs.data(), n);
        kern::avx2::gemm_nt(m, k, n, a.data(), k, b_nt.data(), k, cv.data(), n);
        check_close(cs, cv, 1e-4);

        cs = c0;
        cv = c0;
        kern::scalar::gemm_tn(m, k, n, a_tn.data(), m, b_tn.data(), n, cs.data(), n);
        kern::avx2::gemm_tn(m, k, n, a_tn.data(), m, b_tn.data(), n, cv.data(), n);
        check_close(cs, cv, 1e-4);
    }
}

TEST_CASE("avx2 conv3x3 kernels match scalar reference") {
    if (!kern::backend_available(kern::Backend::avx2)) return;
    Rng rng(13);
    for (auto [h, w] : std::vector<std::array<int64_t, 2>>{{4, 4}, {7, 9}, {16, 16}, {32, 32}}) {
        auto pad = random_vec(rng, (h + 2) * (w + 2));
        auto w9 = random_vec(rng, 9);
        auto out0 = random_vec(rng, h * w);

        auto os = out0, ov = out0;
        kern::scalar::conv3x3_acc(os.data(), h, w, pad.data(), w + 2, w9.data());
        kern::avx2::conv3x3_acc(ov.data(), h, w, pad.data(), w + 2, w9.data());
        check_close(os, ov, 1e-4);

        auto g = random_vec(rng, h * w);
        std::vector<float> gws(9, 0.5f), gwv(9, 0.5f);
        kern::scalar::conv3x3_wgrad(g.data(), h, w, pad.data(), w + 2, gws.data());
        kern::avx2::conv3x3_wgrad(g.data(), h, w, pad.data(), w + 2, gwv.data());
        check_close(gws, gwv, 1e-3);
    }
}

#endif  // ANODIFF_HAVE_AVX2_BUILD

TEST_CASE("dispatch honors forced backend") {
    const auto prev = kern::active_backend();
    kern::set_backend(kern::Backend::scalar);
    CHECK(kern::active_backend() == kern::Backend::scalar);
    std::vector<float> x{1, 2, 3}, y{1, 1, 1};
    kern::axpy(3, 2.0f, x.data(), y.data());
    CHECK(y[2] == doctest::Approx(7.0f));
    kern::set_backend(prev);
}

TEST_CASE("conv3x3 scalar reference computes a hand case") {
    // 1x1 output, identity-ish kernel: out += sum of 3x3 patch weighted
    std::vector<float> pad(9);
    for (int i = 0; i < 9; ++i) pad[static_cast<size_t>(i)] = static_cast<float>(i + 1);
    std::vector<float> w9 = {0, 0, 0, 0, 1, 0, 0, 0, 0};  // picks center
    std::vector<float> out(1, 0.0f);
    kern::scalar::conv3x3_acc(out.data(), 1, 1, pad.data(), 3, w9.data());
    CHECK(out[0] == doctest::Approx(5.0f));
}
