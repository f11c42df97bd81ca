#ifndef GRAFT_TENSOR_HPP
#define GRAFT_TENSOR_HPP

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "graft/rng.hpp"

namespace graft::nn {

// Reverse-mode autodiff tensor. Double precision throughout: the training
// stack is desk-scale and the gradient tests compare against central finite
// differences at 1e-4 relative, which single precision cannot support.
struct TensorData {
    std::vector<int64_t> shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated on demand, same numel as values
    bool requires_grad = false;
    bool needs_grad = false;  // requires_grad or depends on such a leaf
    std::vector<std::shared_ptr<TensorData>> parents;
    std::function<void(TensorData&)> backward_fn;  // pushes grad into parents

    int64_t numel() const {
        int64_t n = 1;
        for (int64_t d : shape) n *= d;
        return n;
    }
    void ensure_grad() {
        if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
    }
};

class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorData> d) : d_(std::move(d)) {}

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double value);
    static Tensor from(std::vector<int64_t> shape, std::vector<double> values);
    static Tensor randn(std::vector<int64_t> shape, Rng& rng, double stddev = 1.0);
    static Tensor scalar(double v) { return from({1}, {v}); }

    bool defined() const { return d_ != nullptr; }
    const std::vector<int64_t>& shape() const { return d_->shape; }
    int64_t numel() const { return d_->numel(); }
    int64_t dim(int i) const { return d_->shape[size_t(i)]; }
    int ndim() const { return int(d_->shape.size()); }

    double* data() { return d_->values.data(); }
    const double* data() const { return d_->values.data(); }
    std::vector<double>& values() { return d_->values; }
    const std::vector<double>& values() const { return d_->values; }
    double item() const { return d_->values.at(0); }

    Tensor& set_requires_grad(bool b) {
        d_->requires_grad = b;
        d_->needs_grad = b;
        return *this;
    }
    bool requires_grad() const { return d_->requires_grad; }
    std::vector<double>& grad() {
        d_->ensure_grad();
        return d_->grad;
    }
    void zero_grad() {
        if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), 0.0);
    }

    // Backpropagate from a scalar tensor through the recorded graph.
    void backward();

    Tensor detach() const;
    Tensor clone_values() const { return from(d_->shape, d_->values); }

    std::shared_ptr<TensorData> impl() const { return d_; }
    TensorData* raw() const { return d_.get(); }

  private:
    std::shared_ptr<TensorData> d_;
};

// ---- primitive ops (each records its backward) ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);

// x: [*, in] flattened over leading dims; w: [in, out]; b: [out] or undefined
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// x: [C,H,W]; w: [Cout,Cin,k,k]; b: [Cout] or undefined
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

Tensor nearest_upsample2x(const Tensor& x);  // [C,H,W] -> [C,2H,2W]

Tensor group_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, int groups,
                  double eps = 1e-6);
// normalizes over the last dimension
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-6);

Tensor silu(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);

Tensor reshape(const Tensor& x, std::vector<int64_t> shape);
Tensor concat_rows(const Tensor& a, const Tensor& b);      // [r1,c]+[r2,c]
Tensor concat_cols(const Tensor& a, const Tensor& b);      // [r,c1]+[r,c2]
Tensor slice_cols(const Tensor& x, int64_t c0, int64_t c1);
Tensor concat_channels(const Tensor& a, const Tensor& b);  // [C1,H,W]+[C2,H,W]
Tensor slice_channels(const Tensor& x, int64_t c0, int64_t c1);

// adds v[C] to every spatial position of x[C,H,W]
Tensor add_channel_bias(const Tensor& x, const Tensor& v);
// scales row-vectors: x[T,C] * g[C] (broadcast over rows)
Tensor mul_row_broadcast(const Tensor& x, const Tensor& g);

Tensor mean_all(const Tensor& x);                    // -> [1]
Tensor sum_all(const Tensor& x);                     // -> [1]
Tensor mse(const Tensor& a, const Tensor& b);        // mean squared error -> [1]
Tensor add_weighted(const Tensor& a, double wa, const Tensor& b, double wb);

}  // namespace graft::nn

#endif  // GRAFT_TENSOR_HPP
