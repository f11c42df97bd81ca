#include "graft/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "graft/error.hpp"

namespace graft::nn {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

namespace {

std::shared_ptr<TensorData> make_node(std::vector<int64_t> shape) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values.assign(size_t(d->numel()), 0.0);
    return d;
}

// Wires parents and the needs_grad flag; backward_fn only set when needed.
Tensor make_op(std::vector<int64_t> shape, std::vector<Tensor> parents,
               std::function<void(TensorData&)> bwd) {
    auto d = make_node(std::move(shape));
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.raw()->needs_grad;
    d->needs_grad = needs;
    if (needs) {
        d->backward_fn = std::move(bwd);
        for (auto& p : parents) d->parents.push_back(p.impl());
    }
    return Tensor(d);
}

void check(bool cond, const char* msg) {
    if (!cond) throw ShapeError(msg);
}

}  // namespace

Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(make_node(std::move(shape))); }

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
    auto d = make_node(std::move(shape));
    std::fill(d->values.begin(), d->values.end(), value);
    return Tensor(d);
}

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values) {
    auto d = std::make_shared<TensorData>();
    d->shape = std::move(shape);
    d->values = std::move(values);
    if (int64_t(d->values.size()) != d->numel()) throw ShapeError("tensor init size mismatch");
    return Tensor(d);
}

Tensor Tensor::randn(std::vector<int64_t> shape, Rng& rng, double stddev) {
    auto d = make_node(std::move(shape));
    for (auto& v : d->values) v = rng.normal() * stddev;
    return Tensor(d);
}

Tensor Tensor::detach() const {
    auto d = std::make_shared<TensorData>();
    d->shape = d_->shape;
    d->values = d_->values;
    return Tensor(d);
}

void Tensor::backward() {
    if (numel() != 1) throw ShapeError("backward() requires a scalar");
    // Iterative topological sort over the recorded graph.
    std::vector<TensorData*> order;
    std::unordered_set<TensorData*> visited;
    std::vector<std::pair<TensorData*, size_t>> stack;
    stack.push_back({d_.get(), 0});
    visited.insert(d_.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorData* p = node->parents[idx].get();
            ++idx;
            if (p->needs_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (TensorData* n : order) n->ensure_grad();
    d_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorData* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// ---- elementwise ----

Tensor add(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "add shape mismatch");
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op(a.shape(), {a, b}, [pa, pb](TensorData& o) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i];
        }
    });
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->values[i] + pb->values[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

Tensor mul(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mul shape mismatch");
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op(a.shape(), {a, b}, [pa, pb](TensorData& o) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * pb->values[i];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * pa->values[i];
        }
    });
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->values[i] * pb->values[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    auto pa = a.impl();
    Tensor out = make_op(a.shape(), {a}, [pa, s](TensorData& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * s;
    });
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->values[i] * s;
    return out;
}

Tensor add_scalar(const Tensor& a, double s) {
    auto pa = a.impl();
    Tensor out = make_op(a.shape(), {a}, [pa](TensorData& o) {
        pa->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i];
    });
    for (int64_t i = 0; i < out.numel(); ++i) out.data()[i] = pa->values[i] + s;
    return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor add_weighted(const Tensor& a, double wa, const Tensor& b, double wb) {
    check(a.shape() == b.shape(), "add_weighted shape mismatch");
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op(a.shape(), {a, b}, [pa, pb, wa, wb](TensorData& o) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pa->grad[i] += o.grad[i] * wa;
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) pb->grad[i] += o.grad[i] * wb;
        }
    });
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data()[i] = wa * pa->values[i] + wb * pb->values[i];
    return out;
}

// ---- matrix ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(0), "matmul shape mismatch");
    const int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op({m, n}, {a, b}, [pa, pb, m, k, n](TensorData& o) {
        MapC go(o.grad.data(), m, n);
        MapC va(pa->values.data(), m, k);
        MapC vb(pb->values.data(), k, n);
        if (pa->needs_grad) {
            pa->ensure_grad();
            MapM ga(pa->grad.data(), m, k);
            ga.noalias() += go * vb.transpose();
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            MapM gb(pb->grad.data(), k, n);
            gb.noalias() += va.transpose() * go;
        }
    });
    MapM(out.data(), m, n).noalias() =
        MapC(pa->values.data(), m, k) * MapC(pb->values.data(), k, n);
    return out;
}

Tensor transpose2d(const Tensor& a) {
    check(a.ndim() == 2, "transpose2d needs 2-d");
    const int64_t r = a.dim(0), c = a.dim(1);
    auto pa = a.impl();
    Tensor out = make_op({c, r}, {a}, [pa, r, c](TensorData& o) {
        pa->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) pa->grad[size_t(i * c + j)] += o.grad[size_t(j * r + i)];
    });
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j) out.data()[j * r + i] = pa->values[size_t(i * c + j)];
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    check(w.ndim() == 2, "linear weight must be 2-d");
    const int64_t in = w.dim(0), out_dim = w.dim(1);
    check(x.dim(x.ndim() - 1) == in, "linear input width mismatch");
    const int64_t rows = x.numel() / in;
    Tensor x2 = reshape(x, {rows, in});
    Tensor y = matmul(x2, w);
    if (b.defined()) {
        check(b.numel() == out_dim, "linear bias size mismatch");
        auto pb = b.impl();
        auto py = y.impl();
        Tensor out = make_op({rows, out_dim}, {y, b}, [py, pb, rows, out_dim](TensorData& o) {
            if (py->needs_grad) {
                py->ensure_grad();
                for (size_t i = 0; i < o.grad.size(); ++i) py->grad[i] += o.grad[i];
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t c = 0; c < out_dim; ++c)
                        pb->grad[size_t(c)] += o.grad[size_t(r * out_dim + c)];
            }
        });
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t c = 0; c < out_dim; ++c)
                out.data()[r * out_dim + c] = py->values[size_t(r * out_dim + c)] + pb->values[size_t(c)];
        y = out;
    }
    std::vector<int64_t> out_shape(x.shape().begin(), x.shape().end() - 1);
    out_shape.push_back(out_dim);
    return reshape(y, out_shape);
}

// ---- conv ----

namespace {

struct ConvDims {
    int64_t cin, h, w, cout, k, ho, wo;
    int stride, pad;
};

void im2col(const double* x, const ConvDims& d, double* col) {
    // col is [cin*k*k, ho*wo]
    const int64_t plane = d.ho * d.wo;
    for (int64_t c = 0; c < d.cin; ++c)
        for (int64_t ky = 0; ky < d.k; ++ky)
            for (int64_t kx = 0; kx < d.k; ++kx) {
                double* crow = col + ((c * d.k + ky) * d.k + kx) * plane;
                for (int64_t oy = 0; oy < d.ho; ++oy) {
                    int64_t iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) {
                        std::fill(crow + oy * d.wo, crow + (oy + 1) * d.wo, 0.0);
                        continue;
                    }
                    const double* xrow = x + (c * d.h + iy) * d.w;
                    for (int64_t ox = 0; ox < d.wo; ++ox) {
                        int64_t ix = ox * d.stride + kx - d.pad;
                        crow[oy * d.wo + ox] = (ix >= 0 && ix < d.w) ? xrow[ix] : 0.0;
                    }
                }
            }
}

void col2im_add(const double* col, const ConvDims& d, double* gx) {
    const int64_t plane = d.ho * d.wo;
    for (int64_t c = 0; c < d.cin; ++c)
        for (int64_t ky = 0; ky < d.k; ++ky)
            for (int64_t kx = 0; kx < d.k; ++kx) {
                const double* crow = col + ((c * d.k + ky) * d.k + kx) * plane;
                for (int64_t oy = 0; oy < d.ho; ++oy) {
                    int64_t iy = oy * d.stride + ky - d.pad;
                    if (iy < 0 || iy >= d.h) continue;
                    double* xrow = gx + (c * d.h + iy) * d.w;
                    for (int64_t ox = 0; ox < d.wo; ++ox) {
                        int64_t ix = ox * d.stride + kx - d.pad;
                        if (ix >= 0 && ix < d.w) xrow[ix] += crow[oy * d.wo + ox];
                    }
                }
            }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    check(x.ndim() == 3 && w.ndim() == 4, "conv2d expects x[C,H,W], w[Co,Ci,k,k]");
    ConvDims d;
    d.cin = x.dim(0);
    d.h = x.dim(1);
    d.w = x.dim(2);
    d.cout = w.dim(0);
    d.k = w.dim(2);
    d.stride = stride;
    d.pad = pad;
    check(w.dim(1) == d.cin && w.dim(3) == d.k, "conv2d weight shape mismatch");
    d.ho = (d.h + 2 * pad - d.k) / stride + 1;
    d.wo = (d.w + 2 * pad - d.k) / stride + 1;
    const int64_t plane = d.ho * d.wo, kk = d.cin * d.k * d.k;

    auto px = x.impl();
    auto pw = w.impl();
    auto pb = b.defined() ? b.impl() : nullptr;
    if (pb) check(b.numel() == d.cout, "conv2d bias size mismatch");

    std::vector<Tensor> parents = {x, w};
    if (b.defined()) parents.push_back(b);

    Tensor out = make_op({d.cout, d.ho, d.wo}, parents, [px, pw, pb, d, plane, kk](TensorData& o) {
        std::vector<double> col(size_t(kk * plane));
        im2col(px->values.data(), d, col.data());
        MapC go(o.grad.data(), d.cout, plane);
        if (pw->needs_grad) {
            pw->ensure_grad();
            MapM gw(pw->grad.data(), d.cout, kk);
            gw.noalias() += go * MapC(col.data(), kk, plane).transpose();
        }
        if (pb && pb->needs_grad) {
            pb->ensure_grad();
            for (int64_t c = 0; c < d.cout; ++c)
                for (int64_t i = 0; i < plane; ++i) pb->grad[size_t(c)] += o.grad[size_t(c * plane + i)];
        }
        if (px->needs_grad) {
            px->ensure_grad();
            std::vector<double> gcol(size_t(kk * plane));
            MapM(gcol.data(), kk, plane).noalias() =
                MapC(pw->values.data(), d.cout, kk).transpose() * go;
            col2im_add(gcol.data(), d, px->grad.data());
        }
    });

    std::vector<double> col(size_t(kk * plane));
    im2col(px->values.data(), d, col.data());
    MapM om(out.data(), d.cout, plane);
    om.noalias() = MapC(pw->values.data(), d.cout, kk) * MapC(col.data(), kk, plane);
    if (pb)
        for (int64_t c = 0; c < d.cout; ++c)
            for (int64_t i = 0; i < plane; ++i) out.data()[c * plane + i] += pb->values[size_t(c)];
    return out;
}

Tensor nearest_upsample2x(const Tensor& x) {
    check(x.ndim() == 3, "nearest_upsample2x expects [C,H,W]");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    auto px = x.impl();
    Tensor out = make_op({c, 2 * h, 2 * w}, {x}, [px, c, h, w](TensorData& o) {
        px->ensure_grad();
        for (int64_t ch = 0; ch < c; ++ch)
            for (int64_t y = 0; y < 2 * h; ++y)
                for (int64_t xx = 0; xx < 2 * w; ++xx)
                    px->grad[size_t((ch * h + y / 2) * w + xx / 2)] +=
                        o.grad[size_t((ch * 2 * h + y) * 2 * w + xx)];
    });
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t y = 0; y < 2 * h; ++y)
            for (int64_t xx = 0; xx < 2 * w; ++xx)
                out.data()[(ch * 2 * h + y) * 2 * w + xx] = px->values[size_t((ch * h + y / 2) * w + xx / 2)];
    return out;
}

// ---- normalization ----

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps) {
    check(x.ndim() == 3, "group_norm expects [C,H,W]");
    const int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
    check(c % groups == 0, "group_norm channels not divisible by groups");
    check(gamma.numel() == c && beta.numel() == c, "group_norm affine size mismatch");
    const int64_t gs = c / groups, plane = h * w, n = gs * plane;
    auto px = x.impl();
    auto pg = gamma.impl();
    auto pbta = beta.impl();

    // stash normalized values and inv-std for the backward pass
    auto xhat = std::make_shared<std::vector<double>>(size_t(c * plane));
    auto istd = std::make_shared<std::vector<double>>(size_t(groups));

    Tensor out = make_op({c, h, w}, {x, gamma, beta},
                         [px, pg, pbta, xhat, istd, groups, gs, plane, c](TensorData& o) {
        for (int64_t g = 0; g < groups; ++g) {
            const int64_t base = g * gs * plane;
            const int64_t n = gs * plane;
            if (pg->needs_grad || pbta->needs_grad) {
                pg->ensure_grad();
                pbta->ensure_grad();
                for (int64_t cc = 0; cc < gs; ++cc) {
                    const int64_t ch = g * gs + cc;
                    for (int64_t i = 0; i < plane; ++i) {
                        const size_t idx = size_t(base + cc * plane + i);
                        pg->grad[size_t(ch)] += o.grad[idx] * (*xhat)[idx];
                        pbta->grad[size_t(ch)] += o.grad[idx];
                    }
                }
            }
            if (px->needs_grad) {
                px->ensure_grad();
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                std::vector<double> dxhat(size_t(n));
                for (int64_t cc = 0; cc < gs; ++cc) {
                    const int64_t ch = g * gs + cc;
                    for (int64_t i = 0; i < plane; ++i) {
                        const size_t idx = size_t(base + cc * plane + i);
                        const double dxh = o.grad[idx] * pg->values[size_t(ch)];
                        dxhat[size_t(cc * plane + i)] = dxh;
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * (*xhat)[idx];
                    }
                }
                const double inv_n = 1.0 / double(n);
                for (int64_t j = 0; j < n; ++j) {
                    const size_t idx = size_t(base + j);
                    px->grad[idx] += (*istd)[size_t(g)] *
                                     (dxhat[size_t(j)] - inv_n * sum_dxhat -
                                      (*xhat)[idx] * inv_n * sum_dxhat_xhat);
                }
            }
        }
    });

    for (int64_t g = 0; g < groups; ++g) {
        const int64_t base = g * gs * plane;
        double mean = 0.0;
        for (int64_t j = 0; j < n; ++j) mean += px->values[size_t(base + j)];
        mean /= double(n);
        double var = 0.0;
        for (int64_t j = 0; j < n; ++j) {
            const double dv = px->values[size_t(base + j)] - mean;
            var += dv * dv;
        }
        var /= double(n);
        const double is = 1.0 / std::sqrt(var + eps);
        (*istd)[size_t(g)] = is;
        for (int64_t cc = 0; cc < gs; ++cc) {
            const int64_t ch = g * gs + cc;
            for (int64_t i = 0; i < plane; ++i) {
                const size_t idx = size_t(base + cc * plane + i);
                const double xh = (px->values[idx] - mean) * is;
                (*xhat)[idx] = xh;
                out.data()[idx] = xh * pg->values[size_t(ch)] + pbta->values[size_t(ch)];
            }
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const int64_t c = x.dim(x.ndim() - 1);
    check(gamma.numel() == c && beta.numel() == c, "layer_norm affine size mismatch");
    const int64_t rows = x.numel() / c;
    auto px = x.impl();
    auto pg = gamma.impl();
    auto pbta = beta.impl();
    auto xhat = std::make_shared<std::vector<double>>(size_t(rows * c));
    auto istd = std::make_shared<std::vector<double>>(size_t(rows));

    Tensor out = make_op(x.shape(), {x, gamma, beta},
                         [px, pg, pbta, xhat, istd, rows, c](TensorData& o) {
        for (int64_t r = 0; r < rows; ++r) {
            const int64_t base = r * c;
            if (pg->needs_grad || pbta->needs_grad) {
                pg->ensure_grad();
                pbta->ensure_grad();
                for (int64_t j = 0; j < c; ++j) {
                    pg->grad[size_t(j)] += o.grad[size_t(base + j)] * (*xhat)[size_t(base + j)];
                    pbta->grad[size_t(j)] += o.grad[size_t(base + j)];
                }
            }
            if (px->needs_grad) {
                px->ensure_grad();
                double sum_dxh = 0.0, sum_dxh_xh = 0.0;
                for (int64_t j = 0; j < c; ++j) {
                    const double dxh = o.grad[size_t(base + j)] * pg->values[size_t(j)];
                    sum_dxh += dxh;
                    sum_dxh_xh += dxh * (*xhat)[size_t(base + j)];
                }
                const double inv_c = 1.0 / double(c);
                for (int64_t j = 0; j < c; ++j) {
                    const double dxh = o.grad[size_t(base + j)] * pg->values[size_t(j)];
                    px->grad[size_t(base + j)] +=
                        (*istd)[size_t(r)] *
                        (dxh - inv_c * sum_dxh - (*xhat)[size_t(base + j)] * inv_c * sum_dxh_xh);
                }
            }
        }
    });

    for (int64_t r = 0; r < rows; ++r) {
        const int64_t base = r * c;
        double mean = 0.0;
        for (int64_t j = 0; j < c; ++j) mean += px->values[size_t(base + j)];
        mean /= double(c);
        double var = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            const double dv = px->values[size_t(base + j)] - mean;
            var += dv * dv;
        }
        var /= double(c);
        const double is = 1.0 / std::sqrt(var + eps);
        (*istd)[size_t(r)] = is;
        for (int64_t j = 0; j < c; ++j) {
            const double xh = (px->values[size_t(base + j)] - mean) * is;
            (*xhat)[size_t(base + j)] = xh;
            out.data()[base + j] = xh * pg->values[size_t(j)] + pbta->values[size_t(j)];
        }
    }
    return out;
}

// ---- activations ----

Tensor silu(const Tensor& x) {
    auto px = x.impl();
    Tensor out = make_op(x.shape(), {x}, [px](TensorData& o) {
        px->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) {
            const double v = px->values[i];
            const double s = 1.0 / (1.0 + std::exp(-v));
            px->grad[i] += o.grad[i] * s * (1.0 + v * (1.0 - s));
        }
    });
    for (int64_t i = 0; i < out.numel(); ++i) {
        const double v = px->values[size_t(i)];
        out.data()[i] = v / (1.0 + std::exp(-v));
    }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    const int64_t c = x.dim(x.ndim() - 1);
    const int64_t rows = x.numel() / c;
    auto px = x.impl();
    auto yv = std::make_shared<std::vector<double>>(size_t(rows * c));
    Tensor out = make_op(x.shape(), {x}, [px, yv, rows, c](TensorData& o) {
        px->ensure_grad();
        for (int64_t r = 0; r < rows; ++r) {
            const int64_t base = r * c;
            double dot = 0.0;
            for (int64_t j = 0; j < c; ++j) dot += o.grad[size_t(base + j)] * (*yv)[size_t(base + j)];
            for (int64_t j = 0; j < c; ++j)
                px->grad[size_t(base + j)] +=
                    (*yv)[size_t(base + j)] * (o.grad[size_t(base + j)] - dot);
        }
    });
    for (int64_t r = 0; r < rows; ++r) {
        const int64_t base = r * c;
        double mx = px->values[size_t(base)];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, px->values[size_t(base + j)]);
        double sum = 0.0;
        for (int64_t j = 0; j < c; ++j) {
            const double e = std::exp(px->values[size_t(base + j)] - mx);
            (*yv)[size_t(base + j)] = e;
            sum += e;
        }
        for (int64_t j = 0; j < c; ++j) {
            (*yv)[size_t(base + j)] /= sum;
            out.data()[base + j] = (*yv)[size_t(base + j)];
        }
    }
    return out;
}

// ---- shape ops ----

Tensor reshape(const Tensor& x, std::vector<int64_t> shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    check(n == x.numel(), "reshape numel mismatch");
    auto px = x.impl();
    Tensor out = make_op(std::move(shape), {x}, [px](TensorData& o) {
        px->ensure_grad();
        for (size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
    });
    std::copy(px->values.begin(), px->values.end(), out.data());
    return out;
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1), "concat_rows shape mismatch");
    const int64_t r1 = a.dim(0), r2 = b.dim(0), c = a.dim(1);
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op({r1 + r2, c}, {a, b}, [pa, pb, r1, r2, c](TensorData& o) {
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (int64_t i = 0; i < r1 * c; ++i) pa->grad[size_t(i)] += o.grad[size_t(i)];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (int64_t i = 0; i < r2 * c; ++i) pb->grad[size_t(i)] += o.grad[size_t(r1 * c + i)];
        }
    });
    std::copy(pa->values.begin(), pa->values.end(), out.data());
    std::copy(pb->values.begin(), pb->values.end(), out.data() + r1 * c);
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 2 && b.ndim() == 2 && a.dim(0) == b.dim(0), "concat_cols shape mismatch");
    const int64_t r = a.dim(0), c1 = a.dim(1), c2 = b.dim(1);
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op({r, c1 + c2}, {a, b}, [pa, pb, r, c1, c2](TensorData& o) {
        for (int64_t i = 0; i < r; ++i) {
            if (pa->needs_grad) {
                pa->ensure_grad();
                for (int64_t j = 0; j < c1; ++j)
                    pa->grad[size_t(i * c1 + j)] += o.grad[size_t(i * (c1 + c2) + j)];
            }
            if (pb->needs_grad) {
                pb->ensure_grad();
                for (int64_t j = 0; j < c2; ++j)
                    pb->grad[size_t(i * c2 + j)] += o.grad[size_t(i * (c1 + c2) + c1 + j)];
            }
        }
    });
    for (int64_t i = 0; i < r; ++i) {
        for (int64_t j = 0; j < c1; ++j) out.data()[i * (c1 + c2) + j] = pa->values[size_t(i * c1 + j)];
        for (int64_t j = 0; j < c2; ++j)
            out.data()[i * (c1 + c2) + c1 + j] = pb->values[size_t(i * c2 + j)];
    }
    return out;
}

Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1) {
    check(x.ndim() == 2 && 0 <= c0 && c0 < c1 && c1 <= x.dim(1), "slice_cols bounds");
    const int64_t r = x.dim(0), c = x.dim(1), w = c1 - c0;
    auto px = x.impl();
    Tensor out = make_op({r, w}, {x}, [px, r, c, c0, w](TensorData& o) {
        px->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j)
                px->grad[size_t(i * c + c0 + j)] += o.grad[size_t(i * w + j)];
    });
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < w; ++j) out.data()[i * w + j] = px->values[size_t(i * c + c0 + j)];
    return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    check(a.ndim() == 3 && b.ndim() == 3 && a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
          "concat_channels shape mismatch");
    const int64_t c1 = a.dim(0), c2 = b.dim(0), h = a.dim(1), w = a.dim(2);
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op({c1 + c2, h, w}, {a, b}, [pa, pb, c1, c2, h, w](TensorData& o) {
        const int64_t plane = h * w;
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (int64_t i = 0; i < c1 * plane; ++i) pa->grad[size_t(i)] += o.grad[size_t(i)];
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (int64_t i = 0; i < c2 * plane; ++i)
                pb->grad[size_t(i)] += o.grad[size_t(c1 * plane + i)];
        }
    });
    std::copy(pa->values.begin(), pa->values.end(), out.data());
    std::copy(pb->values.begin(), pb->values.end(), out.data() + c1 * h * w);
    return out;
}

Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1) {
    check(x.ndim() == 3 && 0 <= c0 && c0 < c1 && c1 <= x.dim(0), "slice_channels bounds");
    const int64_t h = x.dim(1), w = x.dim(2), plane = h * w, nc = c1 - c0;
    auto px = x.impl();
    Tensor out = make_op({nc, h, w}, {x}, [px, c0, nc, plane](TensorData& o) {
        px->ensure_grad();
        for (int64_t i = 0; i < nc * plane; ++i)
            px->grad[size_t(c0 * plane + i)] += o.grad[size_t(i)];
    });
    std::copy(px->values.begin() + c0 * plane, px->values.begin() + c1 * plane, out.data());
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& v) {
    check(x.ndim() == 3 && v.numel() == x.dim(0), "add_channel_bias shape mismatch");
    const int64_t c = x.dim(0), plane = x.dim(1) * x.dim(2);
    auto px = x.impl(), pv = v.impl();
    Tensor out = make_op(x.shape(), {x, v}, [px, pv, c, plane](TensorData& o) {
        if (px->needs_grad) {
            px->ensure_grad();
            for (size_t i = 0; i < o.grad.size(); ++i) px->grad[i] += o.grad[i];
        }
        if (pv->needs_grad) {
            pv->ensure_grad();
            for (int64_t ch = 0; ch < c; ++ch)
                for (int64_t i = 0; i < plane; ++i)
                    pv->grad[size_t(ch)] += o.grad[size_t(ch * plane + i)];
        }
    });
    for (int64_t ch = 0; ch < c; ++ch)
        for (int64_t i = 0; i < plane; ++i)
            out.data()[ch * plane + i] = px->values[size_t(ch * plane + i)] + pv->values[size_t(ch)];
    return out;
}

Tensor mul_row_broadcast(const Tensor& x, const Tensor& g) {
    check(x.ndim() == 2 && g.numel() == x.dim(1), "mul_row_broadcast shape mismatch");
    const int64_t r = x.dim(0), c = x.dim(1);
    auto px = x.impl(), pg = g.impl();
    Tensor out = make_op(x.shape(), {x, g}, [px, pg, r, c](TensorData& o) {
        if (px->needs_grad) {
            px->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    px->grad[size_t(i * c + j)] += o.grad[size_t(i * c + j)] * pg->values[size_t(j)];
        }
        if (pg->needs_grad) {
            pg->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    pg->grad[size_t(j)] += o.grad[size_t(i * c + j)] * px->values[size_t(i * c + j)];
        }
    });
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out.data()[i * c + j] = px->values[size_t(i * c + j)] * pg->values[size_t(j)];
    return out;
}

// ---- reductions ----

Tensor sum_all(const Tensor& x) {
    auto px = x.impl();
    Tensor out = make_op({1}, {x}, [px](TensorData& o) {
        px->ensure_grad();
        for (auto& g : px->grad) g += o.grad[0];
    });
    double s = 0.0;
    for (double v : px->values) s += v;
    out.data()[0] = s;
    return out;
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / double(x.numel())); }

Tensor mse(const Tensor& a, const Tensor& b) {
    check(a.shape() == b.shape(), "mse shape mismatch");
    const int64_t n = a.numel();
    auto pa = a.impl(), pb = b.impl();
    Tensor out = make_op({1}, {a, b}, [pa, pb, n](TensorData& o) {
        const double k = 2.0 * o.grad[0] / double(n);
        if (pa->needs_grad) {
            pa->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                pa->grad[size_t(i)] += k * (pa->values[size_t(i)] - pb->values[size_t(i)]);
        }
        if (pb->needs_grad) {
            pb->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                pb->grad[size_t(i)] += k * (pb->values[size_t(i)] - pa->values[size_t(i)]);
        }
    });
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double d = pa->values[size_t(i)] - pb->values[size_t(i)];
        s += d * d;
    }
    out.data()[0] = s / double(n);
    return out;
}

}  // namespace graft::nn
