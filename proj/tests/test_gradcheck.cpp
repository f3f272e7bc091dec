#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "anodiff/nn/ops.hpp"
#include "anodiff/nn/unet.hpp"
#include "anodiff/util/rng.hpp"

using namespace anodiff;
using namespace anodiff::nn;

namespace {

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

// central finite difference of a scalar-valued function of one coordinate
double central_diff(std::function<double()> eval, double& w, double h) {
    const double w0 = w;
    w = w0 + h;
    const double up = eval();
    w = w0 - h;
    const double dn = eval();
    w = w0;
    return (up - dn) / (2.0 * h);
}

DTensor randn_t(Rng& rng, std::vector<int64_t> dims, double scale = 1.0) {
    DTensor t(std::move(dims));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * scale;
    return t;
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences (3x3 s1, 3x3 s2, 1x1)") {
    Rng rng(21);
    for (auto [k, stride] : std::vector<std::pair<int, int>>{{3, 1}, {3, 2}, {1, 1}}) {
        ConvSpec cs{3, 4, k, stride};
        const int H = 6, W = 6;
        DTensor x = randn_t(rng, {3, H, W});
        std::vector<double> w(static_cast<size_t>(cs.weight_count()));
        std::vector<double> b(static_cast<size_t>(cs.cout));
        for (auto& v : w) v = rng.normal() * 0.3;
        for (auto& v : b) v = rng.normal() * 0.1;
        DTensor r = randn_t(rng, conv2d(cs, w.data(), b.data(), x).dims());

        auto loss = [&] {
            DTensor y = conv2d(cs, w.data(), b.data(), x);
            return kern::generic::dot(y.numel(), y.data(), r.data());
        };

        std::vector<double> gw(w.size(), 0.0), gb(b.size(), 0.0);
        DTensor gx = conv2d_backward(cs, w.data(), x, r, gw.data(), gb.data());

        for (size_t i = 0; i < w.size(); i += std::max<size_t>(1, w.size() / 17))
            CHECK(rel_err(gw[i], central_diff(loss, w[i], 1e-6)) < 1e-5);
        for (size_t i = 0; i < b.size(); ++i)
            CHECK(rel_err(gb[i], central_diff(loss, b[i], 1e-6)) < 1e-5);
        for (int64_t i = 0; i < x.numel(); i += 7)
            CHECK(rel_err(gx[i], central_diff(loss, x[i], 1e-6)) < 1e-5);
    }
}

TEST_CASE("groupnorm gradients match finite differences") {
    Rng rng(22);
    const int C = 8, H = 5, W = 4, groups = 4;
    DTensor x = randn_t(rng, {C, H, W});
    std::vector<double> gamma(C), beta(C);
    for (auto& v : gamma) v = 1.0 + 0.2 * rng.normal();
    for (auto& v : beta) v = 0.1 * rng.normal();
    DTensor r = randn_t(rng, {C, H, W});

    auto loss = [&] {
        DTensor y = groupnorm<double>(x, groups, gamma.data(), beta.data(), nullptr);
        return kern::generic::dot(y.numel(), y.data(), r.data());
    };

    GroupNormCache<double> cache;
    groupnorm<double>(x, groups, gamma.data(), beta.data(), &cache);
    std::vector<double> gg(C, 0.0), gb(C, 0.0);
    DTensor gx = groupnorm_backward(cache, groups, gamma.data(), r, gg.data(), gb.data());

    for (int i = 0; i < C; ++i) {
        CHECK(rel_err(gg[static_cast<size_t>(i)],
                      central_diff(loss, gamma[static_cast<size_t>(i)], 1e-6)) < 1e-5);
        CHECK(rel_err(gb[static_cast<size_t>(i)],
                      central_diff(loss, beta[static_cast<size_t>(i)], 1e-6)) < 1e-5);
    }
    for (int64_t i = 0; i < x.numel(); i += 5)
        CHECK(rel_err(gx[i], central_diff(loss, x[i], 1e-6)) < 1e-4);
}

TEST_CASE("silu backward matches finite differences") {
    Rng rng(23);
    DTensor x = randn_t(rng, {4, 4}, 2.0);
    DTensor r = randn_t(rng, {4, 4});
    auto loss = [&] {
        DTensor y = silu(x);
        return kern::generic::dot(y.numel(), y.data(), r.data());
    };
    DTensor gx(x.dims());
    silu_backward(x, r, gx);
    for (int64_t i = 0; i < x.numel(); ++i)
        CHECK(rel_err(gx[i], central_diff(loss, x[i], 1e-6)) < 1e-6);
}

// Whole-network finite-difference verification on the smallest config that
// still contains every layer kind (residual + skip conv, attention, down-
// and up-sampling, time embedding). >= 100 weights sampled across every
// parameter tensor; relative error budget 1e-3.
TEST_CASE("tiny unet analytic gradients agree with central differences") {
    UNet<double> net(UNetConfig::tiny());
    std::vector<double> w;
    net.init_weights(71, w);
    // randomize every entry (zero-init head included) so gradients flow
    Rng rng(72);
    for (auto& v : w) v = rng.normal() * 0.15;

    Rng drng(73);
    DTensor x = randn_t(drng, {16, 16});
    const int t = 137;
    DTensor r = randn_t(drng, {16, 16});

    auto loss = [&] {
        DTensor y = net.forward(w.data(), x, t);
        return kern::generic::dot(y.numel(), y.data(), r.data());
    };

    UNetCache<double> cache;
    net.forward(w.data(), x, t, &cache);
    std::vector<double> g(w.size(), 0.0);
    net.backward(w.data(), cache, r, g.data());

    int checked = 0, failed = 0;
    double worst = 0.0;
    std::string worst_name;
    for (const auto& e : net.entries()) {
        // two coordinates per tensor, deterministic picks
        for (int pick = 0; pick < 2; ++pick) {
            const int64_t idx = e.offset + (pick * 11 + 3) % e.count;
            const double num = central_diff(loss, w[static_cast<size_t>(idx)], 1e-5);
            const double re = rel_err(g[static_cast<size_t>(idx)], num);
            if (re >= 1e-3) {
                ++failed;
                if (re > worst) {
                    worst = re;
                    worst_name = e.name;
                }
            }
            ++checked;
        }
    }
    CHECK(checked >= 100);
    if (failed > 0) MESSAGE("worst offender: ", worst_name, " rel_err=", worst);
    CHECK(failed == 0);
}

TEST_CASE("outputs and gradients stay finite for inputs up to +-10") {
    UNet<double> net(UNetConfig::tiny());
    std::vector<double> w;
    net.init_weights(81, w);
    Rng rng(82);
    for (auto& v : w) v += rng.normal() * 0.1;
    DTensor x(16, 16);
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = (i % 2 ? 10.0 : -10.0);
    UNetCache<double> cache;
    DTensor y = net.forward(w.data(), x, 999, &cache);
    for (int64_t i = 0; i < y.numel(); ++i) REQUIRE(std::isfinite(y[i]));
    std::vector<double> g(w.size(), 0.0);
    DTensor gy(16, 16);
    gy.fill(1.0);
    net.backward(w.data(), cache, gy, g.data());
    for (double v : g) REQUIRE(std::isfinite(v));
}

TEST_CASE("zero output gradient produces zero parameter gradients") {
    UNet<double> net(UNetConfig::tiny());
    std::vector<double> w;
    net.init_weights(3, w);
    Rng rng(4);
    DTensor x = randn_t(rng, {16, 16});
    UNetCache<double> cache;
    net.forward(w.data(), x, 10, &cache);
    std::vector<double> g(w.size(), 0.0);
    DTensor zero(16, 16);
    net.backward(w.data(), cache, zero, g.data());
    for (double v : g) CHECK(v == 0.0);
}
