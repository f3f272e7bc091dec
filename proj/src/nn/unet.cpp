#include "anodiff/nn/unet.hpp"

#include <cmath>
#include <stdexcept>

namespace anodiff::nn {

void UNetConfig::validate() const {
    if (base_channels < 2 || base_channels % 2 != 0)
        throw std::invalid_argument("unet: base_channels must be even and >= 2");
    if (channel_multipliers.empty())
        throw std::invalid_argument("unet: channel_multipliers must be non-empty");
    for (int m : channel_multipliers)
        if (m < 1) throw std::invalid_argument("unet: multipliers must be >= 1");
    const int n = stages();
    if (input_size < (4 << (n - 1)) || input_size % (1 << (n - 1)) != 0)
        throw std::invalid_argument(
            "unet: input_size must be divisible by 2^(stages-1) and leave >= 4 px");
    if (attention_heads < 1) throw std::invalid_argument("unet: attention_heads >= 1");
    if (groups_per_norm < 1) throw std::invalid_argument("unet: groups_per_norm >= 1");
    if (embed_dim() < 1) throw std::invalid_argument("unet: time_embed_dim >= 1");
    if (base_channels % groups_per_norm != 0)
        throw std::invalid_argument("unet: base_channels % groups_per_norm != 0");
    for (int i = 0; i < n; ++i) {
        const int ch = stage_channels(i);
        if (ch % groups_per_norm != 0)
            throw std::invalid_argument("unet: stage channels must divide by groups_per_norm");
        if (attn_at(stage_size(i)) && ch % attention_heads != 0)
            throw std::invalid_argument("unet: attention channels must divide by heads");
    }
    for (int r : attention_resolutions) {
        bool reached = false;
        for (int i = 0; i < n; ++i) reached = reached || stage_size(i) == r;
        if (!reached)
            throw std::invalid_argument("unet: attention resolution " + std::to_string(r) +
                                        " is never reached");
    }
}

// ---------------- construction / registration ----------------

template <typename T>
int64_t UNet<T>::reg(const std::string& name, std::vector<int64_t> shape, InitKind init,
                     int64_t fan_in) {
    ParamEntry e;
    e.name = name;
    e.offset = total_;
    e.count = 1;
    for (int64_t d : shape) e.count *= d;
    e.shape = std::move(shape);
    e.init = init;
    e.fan_in = fan_in;
    total_ += e.count;
    entries_.push_back(std::move(e));
    return entries_.back().offset;
}

template <typename T>
ConvLayer UNet<T>::reg_conv(const std::string& prefix, int cin, int cout, int k,
                            int stride, bool zero_init) {
    ConvLayer l;
    l.spec = ConvSpec{cin, cout, k, stride};
    l.w = reg(prefix + ".w", {cout, cin, k, k},
              zero_init ? InitKind::zeros : InitKind::fan_in_normal, l.spec.fan_in());
    l.b = reg(prefix + ".b", {cout}, InitKind::zeros, 0);
    return l;
}

template <typename T>
NormLayer UNet<T>::reg_norm(const std::string& prefix, int channels) {
    NormLayer l;
    l.channels = channels;
    l.groups = cfg_.groups_per_norm;
    l.gamma = reg(prefix + ".g", {channels}, InitKind::ones, 0);
    l.beta = reg(prefix + ".b", {channels}, InitKind::zeros, 0);
    return l;
}

template <typename T>
LinLayer UNet<T>::reg_lin(const std::string& prefix, int in, int out) {
    LinLayer l;
    l.in = in;
    l.out = out;
    l.w = reg(prefix + ".w", {out, in}, InitKind::fan_in_normal, in);
    l.b = reg(prefix + ".b", {out}, InitKind::zeros, 0);
    return l;
}

template <typename T>
ResBlockLayer UNet<T>::reg_res(const std::string& prefix, int cin, int cout) {
    ResBlockLayer l;
    l.cin = cin;
    l.cout = cout;
    l.gn1 = reg_norm(prefix + ".gn1", cin);
    l.conv1 = reg_conv(prefix + ".conv1", cin, cout, 3, 1);
    l.emb = reg_lin(prefix + ".emb", cfg_.embed_dim(), cout);
    l.gn2 = reg_norm(prefix + ".gn2", cout);
    l.conv2 = reg_conv(prefix + ".conv2", cout, cout, 3, 1);
    l.has_skip = cin != cout;
    if (l.has_skip) l.skip = reg_conv(prefix + ".skip", cin, cout, 1, 1);
    return l;
}

template <typename T>
AttnLayer UNet<T>::reg_attn(const std::string& prefix, int channels) {
    AttnLayer l;
    l.channels = channels;
    l.heads = cfg_.attention_heads;
    l.norm = reg_norm(prefix + ".norm", channels);
    l.qkv = reg_conv(prefix + ".qkv", channels, 3 * channels, 1, 1);
    l.proj = reg_conv(prefix + ".proj", channels, channels, 1, 1);
    return l;
}

template <typename T>
UNet<T>::UNet(UNetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int n = cfg_.stages();

    temb1_ = reg_lin("temb.lin1", cfg_.base_channels, cfg_.embed_dim());
    temb2_ = reg_lin("temb.lin2", cfg_.embed_dim(), cfg_.embed_dim());
    stem_ = reg_conv("stem", 1, cfg_.base_channels, 3, 1);

    int ch = cfg_.base_channels;
    for (int i = 0; i < n; ++i) {
        EncStage st;
        const int cout = cfg_.stage_channels(i);
        const std::string p = "enc" + std::to_string(i);
        st.r1 = reg_res(p + ".res1", ch, cout);
        st.r2 = reg_res(p + ".res2", cout, cout);
        st.has_attn = cfg_.attn_at(cfg_.stage_size(i));
        if (st.has_attn) st.attn = reg_attn(p + ".attn", cout);
        st.has_down = i < n - 1;
        if (st.has_down) st.down = reg_conv(p + ".down", cout, cout, 3, 2);
        enc_.push_back(st);
        ch = cout;
    }

    dec_.resize(static_cast<size_t>(std::max(0, n - 1)));
    for (int i = n - 2; i >= 0; --i) {
        DecStage st;
        const int chi = cfg_.stage_channels(i);
        const int chd = cfg_.stage_channels(i + 1);
        const std::string p = "dec" + std::to_string(i);
        st.up = reg_conv(p + ".up", chd, chd, 3, 1);
        st.r1 = reg_res(p + ".res1", chd + chi, chi);
        st.r2 = reg_res(p + ".res2", chi, chi);
        st.has_attn = cfg_.attn_at(cfg_.stage_size(i));
        if (st.has_attn) st.attn = reg_attn(p + ".attn", chi);
        dec_[static_cast<size_t>(i)] = st;
    }

    head_norm_ = reg_norm("head.gn", cfg_.stage_channels(0));
    head_conv_ = reg_conv("head.conv", cfg_.stage_channels(0), 1, 3, 1, /*zero_init=*/true);
}

template <typename T>
void UNet<T>::init_weights(uint64_t seed, std::vector<T>& weights) const {
    weights.assign(static_cast<size_t>(total_), T(0));
    Rng rng(seed);
    for (const auto& e : entries_) {
        T* p = weights.data() + e.offset;
        switch (e.init) {
            case InitKind::zeros:
                break;
            case InitKind::ones:
                std::fill(p, p + e.count, T(1));
                break;
            case InitKind::fan_in_normal: {
                const double std = 1.0 / std::sqrt(static_cast<double>(e.fan_in));
                for (int64_t i = 0; i < e.count; ++i)
                    p[i] = static_cast<T>(rng.normal() * std);
                break;
            }
        }
    }
}

// ---------------- forward ----------------

template <typename T>
void UNet<T>::time_embedding(int t, std::vector<T>& sin_emb) const {
    const int dim = cfg_.base_channels, half = dim / 2;
    sin_emb.assign(static_cast<size_t>(dim), T(0));
    for (int i = 0; i < half; ++i) {
        const double f =
            half > 1 ? std::exp(-std::log(10000.0) * i / (half - 1)) : 1.0;
        sin_emb[static_cast<size_t>(i)] = static_cast<T>(std::sin(t * f));
        sin_emb[static_cast<size_t>(half + i)] = static_cast<T>(std::cos(t * f));
    }
}

namespace {

template <typename T>
TensorT<T> concat_channels(const TensorT<T>& a, const TensorT<T>& b) {
    TensorT<T> out(a.dim(0) + b.dim(0), a.dim(1), a.dim(2));
    std::copy(a.data(), a.data() + a.numel(), out.data());
    std::copy(b.data(), b.data() + b.numel(), out.data() + a.numel());
    return out;
}

template <typename T>
void silu_vec(const std::vector<T>& x, std::vector<T>& y) {
    y.resize(x.size());
    for (size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
}

}  // namespace

template <typename T>
TensorT<T> UNet<T>::res_forward(const ResBlockLayer& L, const T* p, const TensorT<T>& x,
                                const std::vector<T>& silu_temb,
                                ResBlockCache<T>* c) const {
    GroupNormCache<T>* gc1 = c ? &c->gn1 : nullptr;
    GroupNormCache<T>* gc2 = c ? &c->gn2 : nullptr;

    TensorT<T> n1 = groupnorm(x, L.gn1.groups, p + L.gn1.gamma, p + L.gn1.beta, gc1);
    TensorT<T> h1 = silu(n1);
    TensorT<T> a = conv2d(L.conv1.spec, p + L.conv1.w, p + L.conv1.b, h1);

    std::vector<T> tb(static_cast<size_t>(L.cout));
    linear(L.emb.in, L.emb.out, p + L.emb.w, p + L.emb.b, silu_temb.data(), tb.data());
    const int64_t hw = a.dim(1) * a.dim(2);
    for (int ch = 0; ch < L.cout; ++ch) {
        T* row = a.data() + static_cast<int64_t>(ch) * hw;
        const T v = tb[static_cast<size_t>(ch)];
        for (int64_t i = 0; i < hw; ++i) row[i] += v;
    }

    TensorT<T> n2 = groupnorm(a, L.gn2.groups, p + L.gn2.gamma, p + L.gn2.beta, gc2);
    TensorT<T> h2 = silu(n2);
    TensorT<T> y = conv2d(L.conv2.spec, p + L.conv2.w, p + L.conv2.b, h2);

    if (L.has_skip) {
        TensorT<T> s = conv2d(L.skip.spec, p + L.skip.w, p + L.skip.b, x);
        kern::t_add(y.numel(), s.data(), y.data());
    } else {
        kern::t_add(y.numel(), x.data(), y.data());
    }
    if (c) {
        c->n1 = std::move(n1);
        c->h1 = std::move(h1);
        c->n2 = std::move(n2);
        c->h2 = std::move(h2);
    }
    return y;
}

template <typename T>
TensorT<T> UNet<T>::res_backward(const ResBlockLayer& L, const T* p,
                                 const ResBlockCache<T>& c, const TensorT<T>& gy, T* g,
                                 const std::vector<T>& silu_temb,
                                 std::vector<T>& g_silu_temb) const {
    TensorT<T> g_h2 =
        conv2d_backward(L.conv2.spec, p + L.conv2.w, c.h2, gy, g + L.conv2.w, g + L.conv2.b);
    TensorT<T> g_n2(g_h2.dims());
    silu_backward(c.n2, g_h2, g_n2);
    TensorT<T> g_a = groupnorm_backward(c.gn2, L.gn2.groups, p + L.gn2.gamma, g_n2,
                                        g + L.gn2.gamma, g + L.gn2.beta);

    // time-embedding injection: gradient is the per-channel sum
    const int64_t hw = g_a.dim(1) * g_a.dim(2);
    std::vector<T> g_tb(static_cast<size_t>(L.cout));
    for (int ch = 0; ch < L.cout; ++ch)
        g_tb[static_cast<size_t>(ch)] =
            kern::t_sum(hw, g_a.data() + static_cast<int64_t>(ch) * hw);
    linear_backward(L.emb.in, L.emb.out, p + L.emb.w, silu_temb.data(), g_tb.data(),
                    g + L.emb.w, g + L.emb.b, g_silu_temb.data());

    TensorT<T> g_h1 =
        conv2d_backward(L.conv1.spec, p + L.conv1.w, c.h1, g_a, g + L.conv1.w, g + L.conv1.b);
    TensorT<T> g_n1(g_h1.dims());
    silu_backward(c.n1, g_h1, g_n1);
    TensorT<T> gx = groupnorm_backward(c.gn1, L.gn1.groups, p + L.gn1.gamma, g_n1,
                                       g + L.gn1.gamma, g + L.gn1.beta);

    if (L.has_skip) {
        TensorT<T> g_skip = conv2d_backward(L.skip.spec, p + L.skip.w, c.gn1.x, gy,
                                            g + L.skip.w, g + L.skip.b);
        kern::t_add(gx.numel(), g_skip.data(), gx.data());
    } else {
        kern::t_add(gx.numel(), gy.data(), gx.data());
    }
    return gx;
}

// ---------------- attention ----------------

template <typename T>
TensorT<T> UNet<T>::attn_forward(const AttnLayer& L, const T* p, const TensorT<T>& x,
                                 AttnCache<T>* c) const {
    const int64_t C = L.channels, H = x.dim(1), W = x.dim(2), S = H * W;
    const int heads = L.heads;
    const int64_t dh = C / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    GroupNormCache<T>* gc = c ? &c->gn : nullptr;
    TensorT<T> h = groupnorm(x, L.norm.groups, p + L.norm.gamma, p + L.norm.beta, gc);
    TensorT<T> qkv = conv2d(L.qkv.spec, p + L.qkv.w, p + L.qkv.b, h);

    TensorT<T> q(heads, S, dh), k(heads, S, dh), v(heads, S, dh);
    for (int hd = 0; hd < heads; ++hd)
        for (int64_t d = 0; d < dh; ++d) {
            const T* qc = qkv.data() + (static_cast<int64_t>(hd) * dh + d) * S;
            const T* kc = qc + C * S;
            const T* vc = kc + C * S;
            T* qd = q.data() + (static_cast<int64_t>(hd) * S) * dh + d;
            T* kd = k.data() + (static_cast<int64_t>(hd) * S) * dh + d;
            T* vd = v.data() + (static_cast<int64_t>(hd) * S) * dh + d;
            for (int64_t s = 0; s < S; ++s) {
                qd[s * dh] = qc[s];
                kd[s * dh] = kc[s];
                vd[s * dh] = vc[s];
            }
        }

    TensorT<T> probs(heads, S, S);
    TensorT<T> ctx_heads(heads, S, dh);
    for (int hd = 0; hd < heads; ++hd) {
        const T* qh = q.data() + static_cast<int64_t>(hd) * S * dh;
        const T* kh = k.data() + static_cast<int64_t>(hd) * S * dh;
        const T* vh = v.data() + static_cast<int64_t>(hd) * S * dh;
        T* ph = probs.data() + static_cast<int64_t>(hd) * S * S;
        kern::t_gemm_nt(S, dh, S, qh, dh, kh, dh, ph, S);
        for (int64_t s = 0; s < S; ++s) {
            T* row = ph + s * S;
            T mx = row[0] * scale;
            for (int64_t j = 1; j < S; ++j) mx = std::max(mx, row[j] * scale);
            T sum = 0;
            for (int64_t j = 0; j < S; ++j) {
                row[j] = std::exp(row[j] * scale - mx);
                sum += row[j];
            }
            const T inv = T(1) / sum;
            for (int64_t j = 0; j < S; ++j) row[j] *= inv;
        }
        kern::t_gemm_nn(S, S, dh, ph, S, vh, dh,
                        ctx_heads.data() + static_cast<int64_t>(hd) * S * dh, dh);
    }

    TensorT<T> ctx(C, H, W);
    for (int hd = 0; hd < heads; ++hd)
        for (int64_t d = 0; d < dh; ++d) {
            const T* src = ctx_heads.data() + (static_cast<int64_t>(hd) * S) * dh + d;
            T* dst = ctx.data() + (static_cast<int64_t>(hd) * dh + d) * S;
            for (int64_t s = 0; s < S; ++s) dst[s] = src[s * dh];
        }

    TensorT<T> y = conv2d(L.proj.spec, p + L.proj.w, p + L.proj.b, ctx);
    kern::t_add(y.numel(), x.data(), y.data());

    if (c) {
        c->h = std::move(h);
        c->q = std::move(q);
        c->k = std::move(k);
        c->v = std::move(v);
        c->probs = std::move(probs);
        c->ctx = std::move(ctx);
    }
    return y;
}

template <typename T>
TensorT<T> UNet<T>::attn_backward(const AttnLayer& L, const T* p, const AttnCache<T>& c,
                                  const TensorT<T>& gy, T* g) const {
    const int64_t C = L.channels, H = c.h.dim(1), W = c.h.dim(2), S = H * W;
    const int heads = L.heads;
    const int64_t dh = C / heads;
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

    TensorT<T> g_ctx =
        conv2d_backward(L.proj.spec, p + L.proj.w, c.ctx, gy, g + L.proj.w, g + L.proj.b);

    TensorT<T> g_qkv_ch(3 * C, H, W);
    for (int hd = 0; hd < heads; ++hd) {
        // gather this head's context gradient as (S, dh)
        TensorT<T> g_ctxh(S, dh);
        for (int64_t d = 0; d < dh; ++d) {
            const T* src = g_ctx.data() + (static_cast<int64_t>(hd) * dh + d) * S;
            T* dst = g_ctxh.data() + d;
            for (int64_t s = 0; s < S; ++s) dst[s * dh] = src[s];
        }
        const T* qh = c.q.data() + static_cast<int64_t>(hd) * S * dh;
        const T* kh = c.k.data() + static_cast<int64_t>(hd) * S * dh;
        const T* vh = c.v.data() + static_cast<int64_t>(hd) * S * dh;
        const T* ph = c.probs.data() + static_cast<int64_t>(hd) * S * S;

        TensorT<T> gP(S, S);
        kern::t_gemm_nt(S, dh, S, g_ctxh.data(), dh, vh, dh, gP.data(), S);
        TensorT<T> gv(S, dh);
        kern::t_gemm_tn(S, S, dh, ph, S, g_ctxh.data(), dh, gv.data(), dh);

        // softmax backward (row-wise), including the score scale
        for (int64_t s = 0; s < S; ++s) {
            const T* prow = ph + s * S;
            T* grow = gP.data() + s * S;
            const T dotv = kern::t_dot(S, grow, prow);
            for (int64_t j = 0; j < S; ++j)
                grow[j] = scale * prow[j] * (grow[j] - dotv);
        }

        TensorT<T> gq(S, dh), gk(S, dh);
        kern::t_gemm_nn(S, S, dh, gP.data(), S, kh, dh, gq.data(), dh);
        kern::t_gemm_tn(S, S, dh, gP.data(), S, qh, dh, gk.data(), dh);

        // scatter back to channel layout
        for (int64_t d = 0; d < dh; ++d) {
            T* qc = g_qkv_ch.data() + (static_cast<int64_t>(hd) * dh + d) * S;
            T* kc = qc + C * S;
            T* vc = kc + C * S;
            const T* gqd = gq.data() + d;
            const T* gkd = gk.data() + d;
            const T* gvd = gv.data() + d;
            for (int64_t s = 0; s < S; ++s) {
                qc[s] = gqd[s * dh];
                kc[s] = gkd[s * dh];
                vc[s] = gvd[s * dh];
            }
        }
    }

    TensorT<T> g_h = conv2d_backward(L.qkv.spec, p + L.qkv.w, c.h, g_qkv_ch, g + L.qkv.w,
                                     g + L.qkv.b);
    TensorT<T> gx = groupnorm_backward(c.gn, L.norm.groups, p + L.norm.gamma, g_h,
                                       g + L.norm.gamma, g + L.norm.beta);
    kern::t_add(gx.numel(), gy.data(), gx.data());  // residual path
    return gx;
}

template <typename T>
TensorT<T> UNet<T>::forward(const T* p, const TensorT<T>& x, int t,
                            UNetCache<T>* cache) const {
    if (t < 0) throw std::invalid_argument("unet: timestep must be >= 0");
    if (!((x.ndim() == 2 && x.dim(0) == cfg_.input_size && x.dim(1) == cfg_.input_size)))
        throw std::invalid_argument("unet: expected " + std::to_string(cfg_.input_size) +
                                    "x" + std::to_string(cfg_.input_size) + " input, got " +
                                    x.shape_str());

    // time embedding MLP
    std::vector<T> sin_emb, z1, s1, temb, silu_temb;
    time_embedding(t, sin_emb);
    z1.resize(static_cast<size_t>(temb1_.out));
    linear(temb1_.in, temb1_.out, p + temb1_.w, p + temb1_.b, sin_emb.data(), z1.data());
    silu_vec(z1, s1);
    temb.resize(static_cast<size_t>(temb2_.out));
    linear(temb2_.in, temb2_.out, p + temb2_.w, p + temb2_.b, s1.data(), temb.data());
    silu_vec(temb, silu_temb);

    TensorT<T> xin(1, cfg_.input_size, cfg_.input_size);
    std::copy(x.data(), x.data() + x.numel(), xin.data());

    const int n = cfg_.stages();
    if (cache) {
        cache->enc.resize(static_cast<size_t>(n));
        cache->dec.resize(static_cast<size_t>(std::max(0, n - 1)));
    }

    TensorT<T> h = conv2d(stem_.spec, p + stem_.w, p + stem_.b, xin);

    std::vector<TensorT<T>> skips(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const EncStage& st = enc_[static_cast<size_t>(i)];
        EncStageCache<T>* ec = cache ? &cache->enc[static_cast<size_t>(i)] : nullptr;
        h = res_forward(st.r1, p, h, silu_temb, ec ? &ec->r1 : nullptr);
        h = res_forward(st.r2, p, h, silu_temb, ec ? &ec->r2 : nullptr);
        if (st.has_attn) h = attn_forward(st.attn, p, h, ec ? &ec->attn : nullptr);
        skips[static_cast<size_t>(i)] = h;
        if (st.has_down) {
            if (ec) ec->down_in = h;
            h = conv2d(st.down.spec, p + st.down.w, p + st.down.b, h);
        }
    }

    for (int i = n - 2; i >= 0; --i) {
        const DecStage& st = dec_[static_cast<size_t>(i)];
        DecStageCache<T>* dc = cache ? &cache->dec[static_cast<size_t>(i)] : nullptr;
        TensorT<T> up = upsample2(h);
        if (dc) dc->up_in = up;
        TensorT<T> upc = conv2d(st.up.spec, p + st.up.w, p + st.up.b, up);
        h = concat_channels(upc, skips[static_cast<size_t>(i)]);
        h = res_forward(st.r1, p, h, silu_temb, dc ? &dc->r1 : nullptr);
        h = res_forward(st.r2, p, h, silu_temb, dc ? &dc->r2 : nullptr);
        if (st.has_attn) h = attn_forward(st.attn, p, h, dc ? &dc->attn : nullptr);
    }

    GroupNormCache<T>* hgc = cache ? &cache->head_gn : nullptr;
    TensorT<T> hn = groupnorm(h, head_norm_.groups, p + head_norm_.gamma,
                              p + head_norm_.beta, hgc);
    TensorT<T> hs = silu(hn);
    TensorT<T> out3 = conv2d(head_conv_.spec, p + head_conv_.w, p + head_conv_.b, hs);

    if (cache) {
        cache->sin_emb = std::move(sin_emb);
        cache->z1 = std::move(z1);
        cache->s1 = std::move(s1);
        cache->temb = std::move(temb);
        cache->silu_temb = std::move(silu_temb);
        cache->x_in = std::move(xin);
        cache->head_n = std::move(hn);
        cache->head_h = std::move(hs);
    }

    TensorT<T> out(cfg_.input_size, cfg_.input_size);
    std::copy(out3.data(), out3.data() + out3.numel(), out.data());
    return out;
}

template <typename T>
void UNet<T>::backward(const T* p, const UNetCache<T>& cache, const TensorT<T>& g_out,
                       T* g) const {
    const int n = cfg_.stages();
    const int64_t W = cfg_.input_size;
    if (!(g_out.ndim() == 2 && g_out.dim(0) == W && g_out.dim(1) == W))
        throw std::invalid_argument("unet: gradient shape mismatch");

    std::vector<T> g_silu_temb(cache.silu_temb.size(), T(0));

    // head
    TensorT<T> g3(1, W, W);
    std::copy(g_out.data(), g_out.data() + g_out.numel(), g3.data());
    TensorT<T> g_hs = conv2d_backward(head_conv_.spec, p + head_conv_.w, cache.head_h, g3,
                                      g + head_conv_.w, g + head_conv_.b);
    TensorT<T> g_hn(g_hs.dims());
    silu_backward(cache.head_n, g_hs, g_hn);
    TensorT<T> gh = groupnorm_backward(cache.head_gn, head_norm_.groups,
                                       p + head_norm_.gamma, g_hn, g + head_norm_.gamma,
                                       g + head_norm_.beta);

    // decoder levels in reverse of their forward execution (0 .. n-2)
    std::vector<TensorT<T>> g_skips(static_cast<size_t>(n));
    for (int i = 0; i <= n - 2; ++i) {
        const DecStage& st = dec_[static_cast<size_t>(i)];
        const DecStageCache<T>& dc = cache.dec[static_cast<size_t>(i)];
        if (st.has_attn) gh = attn_backward(st.attn, p, dc.attn, gh, g);
        gh = res_backward(st.r2, p, dc.r2, gh, g, cache.silu_temb, g_silu_temb);
        gh = res_backward(st.r1, p, dc.r1, gh, g, cache.silu_temb, g_silu_temb);

        // split concat gradient: [up channels | skip channels]
        const int chd = cfg_.stage_channels(i + 1);
        const int chi = cfg_.stage_channels(i);
        const int64_t hw = gh.dim(1) * gh.dim(2);
        TensorT<T> g_upc(chd, gh.dim(1), gh.dim(2));
        std::copy(gh.data(), gh.data() + static_cast<int64_t>(chd) * hw, g_upc.data());
        TensorT<T>& gsk = g_skips[static_cast<size_t>(i)];
        gsk.resize({chi, gh.dim(1), gh.dim(2)});
        std::copy(gh.data() + static_cast<int64_t>(chd) * hw,
                  gh.data() + static_cast<int64_t>(chd + chi) * hw, gsk.data());

        TensorT<T> g_up = conv2d_backward(st.up.spec, p + st.up.w, dc.up_in, g_upc,
                                          g + st.up.w, g + st.up.b);
        gh = upsample2_backward(g_up, chd, gh.dim(1) / 2, gh.dim(2) / 2);
    }

    // encoder stages deepest-first
    for (int i = n - 1; i >= 0; --i) {
        const EncStage& st = enc_[static_cast<size_t>(i)];
        const EncStageCache<T>& ec = cache.enc[static_cast<size_t>(i)];
        if (st.has_down) {
            gh = conv2d_backward(st.down.spec, p + st.down.w, ec.down_in, gh, g + st.down.w,
                                 g + st.down.b);
        }
        if (i <= n - 2) kern::t_add(gh.numel(), g_skips[static_cast<size_t>(i)].data(), gh.data());
        if (st.has_attn) gh = attn_backward(st.attn, p, ec.attn, gh, g);
        gh = res_backward(st.r2, p, ec.r2, gh, g, cache.silu_temb, g_silu_temb);
        gh = res_backward(st.r1, p, ec.r1, gh, g, cache.silu_temb, g_silu_temb);
    }

    conv2d_backward(stem_.spec, p + stem_.w, cache.x_in, gh, g + stem_.w, g + stem_.b);

    // time-embedding MLP
    std::vector<T> g_temb(cache.temb.size(), T(0));
    for (size_t i = 0; i < g_temb.size(); ++i) {
        const T s = sigmoid(cache.temb[i]);
        g_temb[i] = g_silu_temb[i] * s * (T(1) + cache.temb[i] * (T(1) - s));
    }
    std::vector<T> g_s1(cache.s1.size(), T(0));
    linear_backward(temb2_.in, temb2_.out, p + temb2_.w, cache.s1.data(), g_temb.data(),
                    g + temb2_.w, g + temb2_.b, g_s1.data());
    std::vector<T> g_z1(cache.z1.size(), T(0));
    for (size_t i = 0; i < g_z1.size(); ++i) {
        const T s = sigmoid(cache.z1[i]);
        g_z1[i] = g_s1[i] * s * (T(1) + cache.z1[i] * (T(1) - s));
    }
    linear_backward(temb1_.in, temb1_.out, p + temb1_.w, cache.sin_emb.data(), g_z1.data(),
                    g + temb1_.w, g + temb1_.b, static_cast<T*>(nullptr));
}

template class UNet<float>;
template class UNet<double>;

}  // namespace anodiff::nn
