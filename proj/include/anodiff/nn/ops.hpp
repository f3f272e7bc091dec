#pragma once

// Per-sample layer primitives (forward + hand-derived backward) used by the
// denoiser. Feature maps are (C, H, W) tensors; weight/grad storage is flat,
// layers address it by offset. Gradient functions accumulate.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "anodiff/kernels.hpp"
#include "anodiff/tensor.hpp"

namespace anodiff::nn {

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

// ---------------- SiLU ----------------

template <typename T>
TensorT<T> silu(const TensorT<T>& x) {
    TensorT<T> y(x.dims());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] * sigmoid(x[i]);
    return y;
}

// gx += silu'(x) * gy
template <typename T>
void silu_backward(const TensorT<T>& x, const TensorT<T>& gy, TensorT<T>& gx) {
    for (int64_t i = 0; i < x.numel(); ++i) {
        const T s = sigmoid(x[i]);
        gx[i] += gy[i] * s * (T(1) + x[i] * (T(1) - s));
    }
}

// ---------------- conv2d ----------------

struct ConvSpec {
    int cin = 0, cout = 0, k = 3, stride = 1;  // pad = k / 2
    int64_t weight_count() const { return static_cast<int64_t>(cout) * cin * k * k; }
    int64_t fan_in() const { return static_cast<int64_t>(cin) * k * k; }
};

namespace detail {

// copies channel plane into a zero-padded (h + 2) x (w + 2) buffer
template <typename T>
void pad1(const T* src, int64_t h, int64_t w, T* dst) {
    const int64_t wp = w + 2;
    std::fill(dst, dst + wp, T(0));
    std::fill(dst + (h + 1) * wp, dst + (h + 2) * wp, T(0));
    for (int64_t y = 0; y < h; ++y) {
        T* row = dst + (y + 1) * wp;
        row[0] = T(0);
        row[w + 1] = T(0);
        std::copy(src + y * w, src + (y + 1) * w, row + 1);
    }
}

}  // namespace detail

template <typename T>
TensorT<T> conv2d(const ConvSpec& cs, const T* w, const T* b, const TensorT<T>& x) {
    const int64_t cin = cs.cin, cout = cs.cout;
    const int64_t h = x.dim(1), wd = x.dim(2);
    if (x.dim(0) != cin) throw std::invalid_argument("conv2d: channel mismatch");

    if (cs.k == 1) {
        if (cs.stride != 1) throw std::invalid_argument("conv2d: 1x1 stride must be 1");
        const int64_t s = h * wd;
        TensorT<T> y(cout, h, wd);
        for (int64_t co = 0; co < cout; ++co)
            std::fill(y.data() + co * s, y.data() + (co + 1) * s, b[co]);
        kern::t_gemm_nn(cout, cin, s, w, cin, x.data(), s, y.data(), s);
        return y;
    }
    if (cs.k != 3) throw std::invalid_argument("conv2d: kernel must be 1 or 3");

    const int64_t wp = wd + 2;
    std::vector<T> pad(static_cast<size_t>(cin * (h + 2) * wp));
    for (int64_t ci = 0; ci < cin; ++ci)
        detail::pad1(x.data() + ci * h * wd, h, wd, pad.data() + ci * (h + 2) * wp);

    if (cs.stride == 1) {
        TensorT<T> y(cout, h, wd);
        for (int64_t co = 0; co < cout; ++co) {
            T* out = y.data() + co * h * wd;
            std::fill(out, out + h * wd, b[co]);
            for (int64_t ci = 0; ci < cin; ++ci)
                kern::t_conv3x3_acc(out, h, wd, pad.data() + ci * (h + 2) * wp, wp,
                                    w + (co * cin + ci) * 9);
        }
        return y;
    }
    if (cs.stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");

    const int64_t ho = h / 2, wo = wd / 2;
    TensorT<T> y(cout, ho, wo);
    for (int64_t co = 0; co < cout; ++co) {
        T* out = y.data() + co * ho * wo;
        std::fill(out, out + ho * wo, b[co]);
        for (int64_t ci = 0; ci < cin; ++ci) {
            const T* pp = pad.data() + ci * (h + 2) * wp;
            const T* w9 = w + (co * cin + ci) * 9;
            for (int64_t y2 = 0; y2 < ho; ++y2)
                for (int64_t x2 = 0; x2 < wo; ++x2) {
                    T s = 0;
                    for (int ky = 0; ky < 3; ++ky) {
                        const T* row = pp + (2 * y2 + ky) * wp + 2 * x2;
                        s += w9[ky * 3] * row[0] + w9[ky * 3 + 1] * row[1] +
                             w9[ky * 3 + 2] * row[2];
                    }
                    out[y2 * wo + x2] += s;
                }
        }
    }
    return y;
}

// Accumulates gw/gb; returns gradient w.r.t. x.
template <typename T>
TensorT<T> conv2d_backward(const ConvSpec& cs, const T* w, const TensorT<T>& x,
                           const TensorT<T>& gy, T* gw, T* gb) {
    const int64_t cin = cs.cin, cout = cs.cout;
    const int64_t h = x.dim(1), wd = x.dim(2);
    TensorT<T> gx(cin, h, wd);

    if (cs.k == 1) {
        const int64_t s = h * wd;
        for (int64_t co = 0; co < cout; ++co)
            gb[co] += kern::t_sum(s, gy.data() + co * s);
        // gw (cout x cin) += gy (cout x s) * x^T
        kern::t_gemm_nt(cout, s, cin, gy.data(), s, x.data(), s, gw, cin);
        // gx (cin x s) += w^T * gy
        kern::t_gemm_tn(cin, cout, s, w, cin, gy.data(), s, gx.data(), s);
        return gx;
    }

    const int64_t wp = wd + 2;
    std::vector<T> xpad(static_cast<size_t>(cin * (h + 2) * wp));
    for (int64_t ci = 0; ci < cin; ++ci)
        detail::pad1(x.data() + ci * h * wd, h, wd, xpad.data() + ci * (h + 2) * wp);

    if (cs.stride == 1) {
        for (int64_t co = 0; co < cout; ++co) {
            const T* g = gy.data() + co * h * wd;
            gb[co] += kern::t_sum(h * wd, g);
            for (int64_t ci = 0; ci < cin; ++ci)
                kern::t_conv3x3_wgrad(g, h, wd, xpad.data() + ci * (h + 2) * wp, wp,
                                      gw + (co * cin + ci) * 9);
        }
        // data grad: full correlation of padded gy with flipped kernels
        std::vector<T> gpad(static_cast<size_t>((h + 2) * wp));
        T wflip[9];
        for (int64_t co = 0; co < cout; ++co) {
            detail::pad1(gy.data() + co * h * wd, h, wd, gpad.data());
            for (int64_t ci = 0; ci < cin; ++ci) {
                const T* w9 = w + (co * cin + ci) * 9;
                for (int i = 0; i < 9; ++i) wflip[i] = w9[8 - i];
                kern::t_conv3x3_acc(gx.data() + ci * h * wd, h, wd, gpad.data(), wp, wflip);
            }
        }
        return gx;
    }

    const int64_t ho = h / 2, wo = wd / 2;
    std::vector<T> gxpad(static_cast<size_t>(cin * (h + 2) * wp), T(0));
    for (int64_t co = 0; co < cout; ++co) {
        const T* g = gy.data() + co * ho * wo;
        gb[co] += kern::t_sum(ho * wo, g);
        for (int64_t ci = 0; ci < cin; ++ci) {
            const T* pp = xpad.data() + ci * (h + 2) * wp;
            T* gp = gxpad.data() + ci * (h + 2) * wp;
            T* gw9 = gw + (co * cin + ci) * 9;
            const T* w9 = w + (co * cin + ci) * 9;
            for (int64_t y2 = 0; y2 < ho; ++y2)
                for (int64_t x2 = 0; x2 < wo; ++x2) {
                    const T gv = g[y2 * wo + x2];
                    for (int ky = 0; ky < 3; ++ky) {
                        const int64_t off = (2 * y2 + ky) * wp + 2 * x2;
                        gw9[ky * 3] += gv * pp[off];
                        gw9[ky * 3 + 1] += gv * pp[off + 1];
                        gw9[ky * 3 + 2] += gv * pp[off + 2];
                        gp[off] += gv * w9[ky * 3];
                        gp[off + 1] += gv * w9[ky * 3 + 1];
                        gp[off + 2] += gv * w9[ky * 3 + 2];
                    }
                }
        }
    }
    // strip padding
    for (int64_t ci = 0; ci < cin; ++ci)
        for (int64_t y = 0; y < h; ++y)
            std::copy(gxpad.data() + ci * (h + 2) * wp + (y + 1) * wp + 1,
                      gxpad.data() + ci * (h + 2) * wp + (y + 1) * wp + 1 + wd,
                      gx.data() + ci * h * wd + y * wd);
    return gx;
}

// ---------------- group normalization ----------------

template <typename T>
struct GroupNormCache {
    TensorT<T> x;
    std::vector<T> mean, invstd;  // per group
};

constexpr double kGnEps = 1e-5;

template <typename T>
TensorT<T> groupnorm(const TensorT<T>& x, int groups, const T* gamma, const T* beta,
                     GroupNormCache<T>* cache) {
    const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    if (c % groups != 0) throw std::invalid_argument("groupnorm: channels % groups != 0");
    const int64_t gc = c / groups, n = gc * hw;

    std::vector<T> mean(static_cast<size_t>(groups)), invstd(static_cast<size_t>(groups));
    TensorT<T> y(x.dims());
    for (int g = 0; g < groups; ++g) {
        const T* xg = x.data() + g * gc * hw;
        const T mu = kern::t_sum(n, xg) / static_cast<T>(n);
        T var = 0;
        for (int64_t i = 0; i < n; ++i) {
            const T d = xg[i] - mu;
            var += d * d;
        }
        var /= static_cast<T>(n);
        const T is = T(1) / std::sqrt(var + static_cast<T>(kGnEps));
        mean[static_cast<size_t>(g)] = mu;
        invstd[static_cast<size_t>(g)] = is;
        for (int64_t cc = 0; cc < gc; ++cc) {
            const int64_t ch = g * gc + cc;
            const T* xi = x.data() + ch * hw;
            T* yi = y.data() + ch * hw;
            const T a = gamma[ch] * is;
            const T b = beta[ch] - gamma[ch] * is * mu;
            for (int64_t i = 0; i < hw; ++i) yi[i] = a * xi[i] + b;
        }
    }
    if (cache) {
        cache->x = x;
        cache->mean = std::move(mean);
        cache->invstd = std::move(invstd);
    }
    return y;
}

template <typename T>
TensorT<T> groupnorm_backward(const GroupNormCache<T>& cache, int groups,
                              const T* gamma, const TensorT<T>& gy, T* ggamma,
                              T* gbeta) {
    const TensorT<T>& x = cache.x;
    const int64_t c = x.dim(0), hw = x.dim(1) * x.dim(2);
    const int64_t gc = c / groups, n = gc * hw;
    TensorT<T> gx(x.dims());

    for (int g = 0; g < groups; ++g) {
        const T mu = cache.mean[static_cast<size_t>(g)];
        const T is = cache.invstd[static_cast<size_t>(g)];
        // per-channel reductions feed both the affine grads and the group sums
        T s1 = 0, s2 = 0;  // sum(ghat), sum(ghat * xhat)
        for (int64_t cc = 0; cc < gc; ++cc) {
            const int64_t ch = g * gc + cc;
            const T* xi = x.data() + ch * hw;
            const T* gi = gy.data() + ch * hw;
            T sg = 0, sgx = 0;
            for (int64_t i = 0; i < hw; ++i) {
                const T xh = (xi[i] - mu) * is;
                sg += gi[i];
                sgx += gi[i] * xh;
            }
            gbeta[ch] += sg;
            ggamma[ch] += sgx;
            s1 += gamma[ch] * sg;
            s2 += gamma[ch] * sgx;
        }
        const T inv_n = T(1) / static_cast<T>(n);
        for (int64_t cc = 0; cc < gc; ++cc) {
            const int64_t ch = g * gc + cc;
            const T* xi = x.data() + ch * hw;
            const T* gi = gy.data() + ch * hw;
            T* go = gx.data() + ch * hw;
            const T gm = gamma[ch];
            for (int64_t i = 0; i < hw; ++i) {
                const T xh = (xi[i] - mu) * is;
                go[i] = is * (gm * gi[i] - inv_n * (s1 + xh * s2));
            }
        }
    }
    return gx;
}

// ---------------- linear (vectors) ----------------

template <typename T>
void linear(int in, int out, const T* w, const T* b, const T* x, T* y) {
    for (int o = 0; o < out; ++o)
        y[o] = b[o] + kern::t_dot<T>(in, w + static_cast<int64_t>(o) * in, x);
}

template <typename T>
void linear_backward(int in, int out, const T* w, const T* x, const T* gy, T* gw,
                     T* gb, T* gx_acc) {
    for (int o = 0; o < out; ++o) {
        const T g = gy[o];
        gb[o] += g;
        kern::t_axpy<T>(in, g, x, gw + static_cast<int64_t>(o) * in);
        if (gx_acc) kern::t_axpy<T>(in, g, w + static_cast<int64_t>(o) * in, gx_acc);
    }
}

// ---------------- nearest-neighbor 2x resize ----------------

template <typename T>
TensorT<T> upsample2(const TensorT<T>& x) {
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    TensorT<T> y(c, 2 * h, 2 * w);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t r = 0; r < h; ++r) {
            const T* src = x.data() + (ch * h + r) * w;
            T* d0 = y.data() + (ch * 2 * h + 2 * r) * 2 * w;
            T* d1 = d0 + 2 * w;
            for (int64_t cc = 0; cc < w; ++cc) {
                d0[2 * cc] = d0[2 * cc + 1] = src[cc];
                d1[2 * cc] = d1[2 * cc + 1] = src[cc];
            }
        }
    return y;
}

template <typename T>
TensorT<T> upsample2_backward(const TensorT<T>& gy, int64_t c, int64_t h, int64_t w) {
    TensorT<T> gx(c, h, w);
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t r = 0; r < h; ++r) {
            const T* g0 = gy.data() + (ch * 2 * h + 2 * r) * 2 * w;
            const T* g1 = g0 + 2 * w;
            T* dst = gx.data() + (ch * h + r) * w;
            for (int64_t cc = 0; cc < w; ++cc)
                dst[cc] = g0[2 * cc] + g0[2 * cc + 1] + g1[2 * cc] + g1[2 * cc + 1];
        }
    return gx;
}

}  // namespace anodiff::nn
