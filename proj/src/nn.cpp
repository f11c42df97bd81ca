#include "graft/nn.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "graft/error.hpp"

namespace graft::nn {

void mark_trainable(ParamList& params, bool trainable) {
    for (auto& p : params) p.tensor.set_requires_grad(trainable);
}

std::vector<Tensor> tensors_of(const ParamList& params) {
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (const auto& p : params) out.push_back(p.tensor);
    return out;
}

LinearLayer::LinearLayer(int64_t in, int64_t out, Rng& rng, bool bias, double gain) {
    w = Tensor::randn({in, out}, rng, gain / std::sqrt(double(in)));
    if (bias) b = Tensor::zeros({out});
}

void LinearLayer::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    if (b.defined()) out.push_back({prefix + ".b", b});
}

Conv2dLayer::Conv2dLayer(int64_t in, int64_t out, int k, int stride, int pad, Rng& rng,
                         bool zero_init)
    : stride(stride), pad(pad) {
    if (zero_init) {
        w = Tensor::zeros({out, in, k, k});
    } else {
        w = Tensor::randn({out, in, k, k}, rng, std::sqrt(2.0 / double(in * k * k)));
    }
    b = Tensor::zeros({out});
}

void Conv2dLayer::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".w", w});
    out.push_back({prefix + ".b", b});
}

GroupNormLayer::GroupNormLayer(int64_t channels, int groups) : groups(groups) {
    gamma = Tensor::full({channels}, 1.0);
    beta = Tensor::zeros({channels});
}

void GroupNormLayer::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

LayerNormLayer::LayerNormLayer(int64_t channels) {
    gamma = Tensor::full({channels}, 1.0);
    beta = Tensor::zeros({channels});
}

void LayerNormLayer::collect(const std::string& prefix, ParamList& out) const {
    out.push_back({prefix + ".gamma", gamma});
    out.push_back({prefix + ".beta", beta});
}

MultiheadAttention::MultiheadAttention(int64_t q_dim, int64_t kv_dim, int heads, int64_t d_head,
                                       Rng& rng)
    : heads(heads), d_head(d_head) {
    const int64_t inner = heads * d_head;
    wq = LinearLayer(q_dim, inner, rng, false);
    wk = LinearLayer(kv_dim, inner, rng, false);
    wv = LinearLayer(kv_dim, inner, rng, false);
    wo = LinearLayer(inner, q_dim, rng, true);
}

Tensor MultiheadAttention::forward(const Tensor& q_tokens, const Tensor& kv_tokens) const {
    Tensor q = wq.forward(q_tokens);
    Tensor k = wk.forward(kv_tokens);
    Tensor v = wv.forward(kv_tokens);
    const double inv_sqrt = 1.0 / std::sqrt(double(d_head));
    Tensor heads_out;
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * d_head, (h + 1) * d_head);
        Tensor kh = slice_cols(k, h * d_head, (h + 1) * d_head);
        Tensor vh = slice_cols(v, h * d_head, (h + 1) * d_head);
        Tensor att = softmax_lastdim(scale(matmul(qh, transpose2d(kh)), inv_sqrt));
        Tensor oh = matmul(att, vh);
        heads_out = h == 0 ? oh : concat_cols(heads_out, oh);
    }
    return wo.forward(heads_out);
}

void MultiheadAttention::collect(const std::string& prefix, ParamList& out) const {
    wq.collect(prefix + ".wq", out);
    wk.collect(prefix + ".wk", out);
    wv.collect(prefix + ".wv", out);
    wo.collect(prefix + ".wo", out);
}

FeedForward::FeedForward(int64_t dim, int64_t hidden, Rng& rng) {
    in = LinearLayer(dim, hidden, rng);
    out = LinearLayer(hidden, dim, rng);
}

void FeedForward::collect(const std::string& prefix, ParamList& out_list) const {
    in.collect(prefix + ".in", out_list);
    out.collect(prefix + ".out", out_list);
}

ResBlock::ResBlock(int64_t cin, int64_t cout, int64_t temb_dim, Rng& rng) {
    n1 = GroupNormLayer(cin);
    c1 = Conv2dLayer(cin, cout, 3, 1, 1, rng);
    n2 = GroupNormLayer(cout);
    c2 = Conv2dLayer(cout, cout, 3, 1, 1, rng);
    if (cin != cout) {
        skip = Conv2dLayer(cin, cout, 1, 1, 0, rng);
        has_skip = true;
    }
    if (temb_dim > 0) {
        temb_proj = LinearLayer(temb_dim, cout, rng);
        has_temb = true;
    }
}

Tensor ResBlock::forward(const Tensor& x, const Tensor& temb) const {
    Tensor h = c1.forward(silu(n1.forward(x)));
    if (has_temb && temb.defined()) {
        Tensor shift = reshape(temb_proj.forward(temb), {h.dim(0)});
        h = add_channel_bias(h, shift);
    }
    h = c2.forward(silu(n2.forward(h)));
    Tensor res = has_skip ? skip.forward(x) : x;
    return add(h, res);
}

void ResBlock::collect(const std::string& prefix, ParamList& out) const {
    n1.collect(prefix + ".n1", out);
    c1.collect(prefix + ".c1", out);
    n2.collect(prefix + ".n2", out);
    c2.collect(prefix + ".c2", out);
    if (has_skip) skip.collect(prefix + ".skip", out);
    if (has_temb) temb_proj.collect(prefix + ".temb", out);
}

GatedCrossAttention::GatedCrossAttention(int64_t dim, int64_t kv_dim, int heads, int64_t d_head,
                                         Rng& rng) {
    query_norm = LayerNormLayer(dim);
    attn = MultiheadAttention(dim, kv_dim, heads, d_head, rng);
    gate = Tensor::zeros({dim});
}

Tensor GatedCrossAttention::forward(const Tensor& h, const Tensor& context) const {
    Tensor a = attn.forward(query_norm.forward(h), context);
    return add(h, mul_row_broadcast(a, gate));
}

void GatedCrossAttention::collect(const std::string& prefix, ParamList& out) const {
    query_norm.collect(prefix + ".norm", out);
    attn.collect(prefix + ".attn", out);
    out.push_back({prefix + ".gate", gate});
}

void Adam::step(const std::vector<Tensor>& params) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, double(t));
    const double bc2 = 1.0 - std::pow(beta2, double(t));
    for (const Tensor& p : params) {
        TensorData* key = p.raw();
        auto& [m, v] = slots[key];
        if (m.empty()) {
            m.assign(p.values().size(), 0.0);
            v.assign(p.values().size(), 0.0);
        }
        auto& grad = const_cast<Tensor&>(p).grad();
        auto& vals = const_cast<Tensor&>(p).values();
        for (size_t i = 0; i < vals.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            vals[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
}

void Adam::zero_grad(const std::vector<Tensor>& params) {
    for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
}

Tensor timestep_embedding(double t, int64_t dim) {
    const int64_t half = dim / 2;
    std::vector<double> v(size_t(dim), 0.0);
    for (int64_t i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * double(i) / double(half));
        v[size_t(i)] = std::cos(t * freq);
        v[size_t(half + i)] = std::sin(t * freq);
    }
    return Tensor::from({1, dim}, std::move(v));
}

StateDict state_from(const ParamList& params) {
    StateDict s;
    for (const auto& p : params) s[p.name] = p.tensor;
    return s;
}

void load_state(ParamList& params, const StateDict& state) {
    for (auto& p : params) {
        auto it = state.find(p.name);
        if (it == state.end()) throw ValidationError("missing parameter in checkpoint: " + p.name);
        if (it->second.shape() != p.tensor.shape())
            throw ShapeError("checkpoint shape mismatch for " + p.name);
        p.tensor.values() = it->second.values();
    }
}

namespace {
constexpr char kMagic[8] = {'G', 'R', 'A', 'F', 'T', 'C', 'K', '1'};

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}
}  // namespace

void save_checkpoint(const std::string& path, const StateDict& state) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    write_raw<uint64_t>(os, state.size());
    for (const auto& [name, t] : state) {
        write_raw<uint32_t>(os, uint32_t(name.size()));
        os.write(name.data(), std::streamsize(name.size()));
        write_raw<uint32_t>(os, uint32_t(t.shape().size()));
        for (int64_t d : t.shape()) write_raw<int64_t>(os, d);
        os.write(reinterpret_cast<const char*>(t.data()),
                 std::streamsize(t.numel() * sizeof(double)));
    }
    if (!os) throw IoError("write failure: " + path);
}

StateDict load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw NotFoundError("checkpoint not found: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw FormatError("bad checkpoint magic: " + path);
    const uint64_t count = read_raw<uint64_t>(is);
    StateDict s;
    for (uint64_t i = 0; i < count; ++i) {
        const uint32_t name_len = read_raw<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const uint32_t ndim = read_raw<uint32_t>(is);
        std::vector<int64_t> shape(ndim);
        int64_t numel = 1;
        for (auto& d : shape) {
            d = read_raw<int64_t>(is);
            numel *= d;
        }
        std::vector<double> vals(size_t(numel));
        is.read(reinterpret_cast<char*>(vals.data()), std::streamsize(vals.size() * sizeof(double)));
        if (!is) throw FormatError("truncated checkpoint: " + path);
        s[name] = Tensor::from(shape, std::move(vals));
    }
    return s;
}

uint64_t state_digest(const ParamList& params) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& p : params) {
        for (unsigned char c : p.name) h = (h ^ c) * 0x100000001b3ull;
        const auto& vals = p.tensor.values();
        const auto* bytes = reinterpret_cast<const unsigned char*>(vals.data());
        for (size_t i = 0; i < vals.size() * sizeof(double); ++i) h = (h ^ bytes[i]) * 0x100000001b3ull;
    }
    return h;
}

}  // namespace graft::nn
