#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace gazerep {

struct TensorImpl;

// Dense f32 tensor participating in a reverse-mode graph. Value-semantic
// handle; copies share the underlying buffer. Signals use layout [B, C, T]
// (row-major, time contiguous), matrices [M, N], scalars [1].
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<float> data,
                            bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const;
    int dim(int i) const;
    int rank() const;
    int64_t size() const;

    float* data();
    const float* data() const;
    std::vector<float> to_vector() const;
    float item() const; // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool v);
    bool has_grad() const;
    // Tensors are shared handles; the grad buffer is reachable through
    // const handles too (allocated zeroed on first access).
    float* grad() const;
    std::vector<float> grad_vector() const;
    void zero_grad() const;

    // Reverse-mode sweep from a scalar. Leaf gradients accumulate across
    // calls; intermediate gradients are reset per sweep.
    void backward();

    TensorImpl* impl() const { return impl_.get(); }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
    friend Tensor make_op_result(std::vector<int> shape, std::vector<float> data,
                                 const char* op, std::vector<Tensor> parents,
                                 std::function<void(TensorImpl&)> backprop);
};

struct OpNode {
    const char* op = nullptr;
    std::vector<Tensor> parents;
    // Reads out.grad and accumulates into parents' grads.
    std::function<void(TensorImpl&)> backprop;
};

struct TensorImpl {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad; // empty until needed
    bool requires_grad = false;
    std::unique_ptr<OpNode> node; // null for leaves

    int64_t size() const { return static_cast<int64_t>(data.size()); }
    void ensure_grad();
};

// Gradient recording is on by default; disable within a scope for pure
// inference passes (no graph is built, tensors come out detached).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};
bool grad_enabled();

std::string shape_str(const std::vector<int>& s);

// Builds an op output and records its backward closure when gradients are
// enabled and any parent requires them. The closure reads out.grad and
// accumulates into the parents' grads.
Tensor make_op_result(std::vector<int> shape, std::vector<float> data, const char* op,
                      std::vector<Tensor> parents, std::function<void(TensorImpl&)> backprop);

// ---- operator set ----

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, float s);
Tensor mul(const Tensor& a, const Tensor& b); // elementwise
// [M,K] x [K,N] -> [M,N]; with transpose_b, b is [N,K]
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b = false);
// x [B,C,T], w [O,C,K], bias [O]; causal pads d(K-1) left, otherwise
// d(K-1)/2 per side (K odd). Output [B,O,T], same T.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int dilation, bool causal);
Tensor relu(const Tensor& x);
// per-channel moments over (batch, time); x [B,C,T] -> [C]
Tensor channel_mean(const Tensor& x);
Tensor channel_var(const Tensor& x, const Tensor& mean); // biased
// x [B,C,T] + v broadcast over the time axis; v is [B,C] or [C]
Tensor broadcast_add_time(const Tensor& x, const Tensor& v);
Tensor gap(const Tensor& x); // [B,C,T] -> [B,C], mean over time
// dropout-mask-apply: elementwise product with a constant mask
Tensor apply_mask(const Tensor& x, std::shared_ptr<const std::vector<float>> mask);
Tensor sum_of_squares(const Tensor& x); // -> [1]
// x [B,N] * W[M,N]^T + bias[M] -> [B,M]
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
// fused batch normalization over (batch, time) per channel
Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps,
                       std::vector<float>* batch_mean_out = nullptr,
                       std::vector<float>* batch_var_out = nullptr);
Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const std::vector<float>& running_mean,
                      const std::vector<float>& running_var, float eps);
// logits [B,K], labels size B; returns summed cross-entropy -> [1]
Tensor softmax_xent(const Tensor& logits, const std::vector<int>& labels);
std::vector<float> softmax_probs(const Tensor& logits); // forward only, row-wise

void zero_grads(std::vector<Tensor>& params);

} // namespace gazerep
