#pragma once

// Noise-prediction U-Net. Weights live in one flat buffer owned by the
// caller; the net only records offsets, shapes and init rules, so EMA /
// optimizer state / checkpointing all operate on plain arrays. Instantiated
// for float (pipeline) and double (finite-difference verification).

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "anodiff/nn/ops.hpp"
#include "anodiff/tensor.hpp"
#include "anodiff/util/rng.hpp"

namespace anodiff::nn {

struct UNetConfig {
    int base_channels = 64;
    std::vector<int> channel_multipliers = {1, 2, 4, 8};
    int attention_heads = 4;
    std::vector<int> attention_resolutions = {32};
    int input_size = 128;
    int time_embed_dim = 0;  // 0 -> 4 * base_channels
    int groups_per_norm = 8;

    int embed_dim() const { return time_embed_dim > 0 ? time_embed_dim : 4 * base_channels; }
    int stages() const { return static_cast<int>(channel_multipliers.size()); }
    int stage_channels(int i) const { return base_channels * channel_multipliers[static_cast<size_t>(i)]; }
    int stage_size(int i) const { return input_size >> i; }
    bool attn_at(int size) const {
        return std::find(attention_resolutions.begin(), attention_resolutions.end(), size) !=
               attention_resolutions.end();
    }
    void validate() const;

    // desk-scale config used by the fast tests and the --toy pipeline
    static UNetConfig toy() {
        UNetConfig c;
        c.base_channels = 16;
        c.channel_multipliers = {1, 2};
        c.attention_heads = 4;
        c.attention_resolutions = {16};
        c.input_size = 32;
        return c;
    }
    // smallest config that still exercises every layer kind
    static UNetConfig tiny() {
        UNetConfig c;
        c.base_channels = 8;
        c.channel_multipliers = {1, 2};
        c.attention_heads = 2;
        c.attention_resolutions = {8};
        c.input_size = 16;
        return c;
    }
};

enum class InitKind { fan_in_normal, zeros, ones };

struct ParamEntry {
    std::string name;
    int64_t offset = 0;
    int64_t count = 0;
    std::vector<int64_t> shape;
    InitKind init = InitKind::fan_in_normal;
    int64_t fan_in = 0;
};

// ---- layer descriptors (offsets into the flat parameter buffer) ----

struct ConvLayer {
    ConvSpec spec;
    int64_t w = 0, b = 0;
};
struct NormLayer {
    int channels = 0, groups = 0;
    int64_t gamma = 0, beta = 0;
};
struct LinLayer {
    int in = 0, out = 0;
    int64_t w = 0, b = 0;
};
struct ResBlockLayer {
    NormLayer gn1, gn2;
    ConvLayer conv1, conv2;
    LinLayer emb;
    bool has_skip = false;
    ConvLayer skip;
    int cin = 0, cout = 0;
};
struct AttnLayer {
    NormLayer norm;
    ConvLayer qkv, proj;
    int heads = 0, channels = 0;
};
struct EncStage {
    ResBlockLayer r1, r2;
    bool has_attn = false;
    AttnLayer attn;
    bool has_down = false;
    ConvLayer down;
};
struct DecStage {
    ConvLayer up;
    ResBlockLayer r1, r2;
    bool has_attn = false;
    AttnLayer attn;
};

// ---- per-forward caches for backprop ----

template <typename T>
struct ResBlockCache {
    GroupNormCache<T> gn1, gn2;
    TensorT<T> n1, h1, n2, h2;
};
template <typename T>
struct AttnCache {
    GroupNormCache<T> gn;
    TensorT<T> h;      // normed input, qkv conv input
    TensorT<T> q, k, v;    // (heads, S, dh)
    TensorT<T> probs;      // (heads, S, S)
    TensorT<T> ctx;        // merged context, proj conv input
};
template <typename T>
struct EncStageCache {
    ResBlockCache<T> r1, r2;
    AttnCache<T> attn;
    TensorT<T> down_in;
};
template <typename T>
struct DecStageCache {
    TensorT<T> up_in;  // upsampled tensor (conv input)
    ResBlockCache<T> r1, r2;
    AttnCache<T> attn;
};
template <typename T>
struct UNetCache {
    std::vector<T> sin_emb, z1, s1, temb, silu_temb;
    TensorT<T> x_in;
    std::vector<EncStageCache<T>> enc;
    std::vector<DecStageCache<T>> dec;
    GroupNormCache<T> head_gn;
    TensorT<T> head_n, head_h;
};

template <typename T>
class UNet {
public:
    explicit UNet(UNetConfig cfg);

    const UNetConfig& config() const { return cfg_; }
    int64_t param_count() const { return total_; }
    const std::vector<ParamEntry>& entries() const { return entries_; }

    // Deterministic initialization; resizes and fills `weights`.
    void init_weights(uint64_t seed, std::vector<T>& weights) const;

    // x is a (W, W) window; returns the predicted noise, same shape.
    TensorT<T> forward(const T* p, const TensorT<T>& x, int t,
                       UNetCache<T>* cache = nullptr) const;

    // Accumulates parameter gradients into `grads` (flat, param_count long).
    void backward(const T* p, const UNetCache<T>& cache, const TensorT<T>& g_out,
                  T* grads) const;

private:
    int64_t reg(const std::string& name, std::vector<int64_t> shape, InitKind init,
                int64_t fan_in);
    ConvLayer reg_conv(const std::string& prefix, int cin, int cout, int k, int stride,
                       bool zero_init = false);
    NormLayer reg_norm(const std::string& prefix, int channels);
    LinLayer reg_lin(const std::string& prefix, int in, int out);
    ResBlockLayer reg_res(const std::string& prefix, int cin, int cout);
    AttnLayer reg_attn(const std::string& prefix, int channels);

    void time_embedding(int t, std::vector<T>& sin_emb) const;

    TensorT<T> res_forward(const ResBlockLayer& L, const T* p, const TensorT<T>& x,
                           const std::vector<T>& silu_temb, ResBlockCache<T>* c) const;
    TensorT<T> res_backward(const ResBlockLayer& L, const T* p, const ResBlockCache<T>& c,
                            const TensorT<T>& gy, T* g, const std::vector<T>& silu_temb,
                            std::vector<T>& g_silu_temb) const;
    TensorT<T> attn_forward(const AttnLayer& L, const T* p, const TensorT<T>& x,
                            AttnCache<T>* c) const;
    TensorT<T> attn_backward(const AttnLayer& L, const T* p, const AttnCache<T>& c,
                             const TensorT<T>& gy, T* g) const;

    UNetConfig cfg_;
    std::vector<ParamEntry> entries_;
    int64_t total_ = 0;

    LinLayer temb1_, temb2_;
    ConvLayer stem_;
    std::vector<EncStage> enc_;
    std::vector<DecStage> dec_;  // dec_[i] corresponds to spatial level i (0 .. stages-2)
    NormLayer head_norm_;
    ConvLayer head_conv_;
};

// Learnable state: live weights plus their EMA shadow used at inference.
template <typename T>
struct DenoiserParams {
    std::vector<T> weights, ema;
    int64_t step = 0;
};

template <typename T>
DenoiserParams<T> init_params(const UNet<T>& net, uint64_t seed) {
    DenoiserParams<T> p;
    net.init_weights(seed, p.weights);
    p.ema = p.weights;
    p.step = 0;
    return p;
}

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace anodiff::nn
