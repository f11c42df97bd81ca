#ifndef GRAFT_NN_HPP
#define GRAFT_NN_HPP

#include <map>
#include <string>
#include <vector>

#include "graft/tensor.hpp"

namespace graft::nn {

struct ParamRef {
    std::string name;
    Tensor tensor;
};
using ParamList = std::vector<ParamRef>;

void mark_trainable(ParamList& params, bool trainable);
std::vector<Tensor> tensors_of(const ParamList& params);

struct LinearLayer {
    Tensor w, b;  // w: [in, out]

    LinearLayer() = default;
    LinearLayer(int64_t in, int64_t out, Rng& rng, bool bias = true, double gain = 1.0);
    Tensor forward(const Tensor& x) const { return linear(x, w, b); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct Conv2dLayer {
    Tensor w, b;  // w: [out, in, k, k]
    int stride = 1, pad = 1;

    Conv2dLayer() = default;
    Conv2dLayer(int64_t in, int64_t out, int k, int stride, int pad, Rng& rng,
                bool zero_init = false);
    Tensor forward(const Tensor& x) const { return conv2d(x, w, b, stride, pad); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct GroupNormLayer {
    Tensor gamma, beta;
    int groups = 8;

    GroupNormLayer() = default;
    explicit GroupNormLayer(int64_t channels, int groups = 8);
    Tensor forward(const Tensor& x) const { return group_norm(x, gamma, beta, groups); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct LayerNormLayer {
    Tensor gamma, beta;

    LayerNormLayer() = default;
    explicit LayerNormLayer(int64_t channels);
    Tensor forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }
    void collect(const std::string& prefix, ParamList& out) const;
};

struct MultiheadAttention {
    int heads = 4;
    int64_t d_head = 32;
    LinearLayer wq, wk, wv, wo;

    MultiheadAttention() = default;
    MultiheadAttention(int64_t q_dim, int64_t kv_dim, int heads, int64_t d_head, Rng& rng);
    // q_tokens: [T, q_dim]; kv_tokens: [S, kv_dim] -> [T, q_dim]
    Tensor forward(const Tensor& q_tokens, const Tensor& kv_tokens) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct FeedForward {
    LinearLayer in, out;

    FeedForward() = default;
    FeedForward(int64_t dim, int64_t hidden, Rng& rng);
    Tensor forward(const Tensor& x) const { return out.forward(silu(in.forward(x))); }
    void collect(const std::string& prefix, ParamList& out_list) const;
};

struct ResBlock {
    GroupNormLayer n1, n2;
    Conv2dLayer c1, c2, skip;
    LinearLayer temb_proj;
    bool has_skip = false, has_temb = false;

    ResBlock() = default;
    ResBlock(int64_t cin, int64_t cout, int64_t temb_dim, Rng& rng);  // temb_dim 0 = none
    Tensor forward(const Tensor& x, const Tensor& temb) const;
    Tensor forward(const Tensor& x) const { return forward(x, Tensor()); }
    void collect(const std::string& prefix, ParamList& out) const;
};

// Residual attention whose contribution is scaled per channel by a
// zero-initialized gate, so the block is the identity until trained.
struct GatedCrossAttention {
    LayerNormLayer query_norm;
    MultiheadAttention attn;
    Tensor gate;  // [dim], zeros

    GatedCrossAttention() = default;
    GatedCrossAttention(int64_t dim, int64_t kv_dim, int heads, int64_t d_head, Rng& rng);
    Tensor forward(const Tensor& h, const Tensor& context) const;
    void collect(const std::string& prefix, ParamList& out) const;
};

struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t t = 0;
    std::map<TensorData*, std::pair<std::vector<double>, std::vector<double>>> slots;

    explicit Adam(double lr) : lr(lr) {}
    void step(const std::vector<Tensor>& params);
    static void zero_grad(const std::vector<Tensor>& params);
};

// sinusoidal embedding of a diffusion timestep -> [1, dim]
Tensor timestep_embedding(double t, int64_t dim);

// ---- checkpoint io (little-endian, versioned) ----

using StateDict = std::map<std::string, Tensor>;

StateDict state_from(const ParamList& params);
void load_state(ParamList& params, const StateDict& state);  // by name, shape-checked
void save_checkpoint(const std::string& path, const StateDict& state);
StateDict load_checkpoint(const std::string& path);

// order-insensitive digest of parameter bytes, for freeze audits
uint64_t state_digest(const ParamList& params);

}  // namespace graft::nn

#endif  // GRAFT_NN_HPP
