#include "gazerep/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#ifdef _OPENMP
#include <omp.h>
#endif

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace gazerep {

namespace {

#ifdef __GLIBC__
// Training graphs churn multi-megabyte buffers every op; keeping them on
// the heap instead of per-allocation mmap/munmap avoids refaulting pages.
const bool g_malloc_tuned = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
}();
#endif

thread_local bool g_grad_enabled = true;

// threshold below which threading an elementwise loop is not worth it
constexpr int64_t kParallelCutoff = 1 << 15;

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor: non-positive dim in shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                    " vs " + shape_str(b.shape()));
}

bool any_requires_grad(const std::vector<Tensor>& ts) {
    for (const auto& t : ts)
        if (t.requires_grad()) return true;
    return false;
}

} // namespace

std::string shape_str(const std::vector<int>& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

void TensorImpl::ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    int64_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(static_cast<size_t>(n), value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> data, bool requires_grad) {
    int64_t n = shape_numel(shape);
    if (n != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

const std::vector<int>& Tensor::shape() const { return impl_->shape; }
int Tensor::dim(int i) const { return impl_->shape.at(static_cast<size_t>(i)); }
int Tensor::rank() const { return static_cast<int>(impl_->shape.size()); }
int64_t Tensor::size() const { return impl_->size(); }
float* Tensor::data() { return impl_->data.data(); }
const float* Tensor::data() const { return impl_->data.data(); }
std::vector<float> Tensor::to_vector() const { return impl_->data; }

float Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item: tensor has shape " + shape_str(shape()));
    return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool v) { impl_->requires_grad = v; }
bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

float* Tensor::grad() const {
    impl_->ensure_grad();
    return impl_->grad.data();
}
std::vector<float> Tensor::grad_vector() const {
    impl_->ensure_grad();
    return impl_->grad;
}
void Tensor::zero_grad() const {
    if (impl_) impl_->grad.assign(impl_->data.size(), 0.0f);
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

Tensor make_op_result(std::vector<int> shape, std::vector<float> data, const char* op,
                      std::vector<Tensor> parents, std::function<void(TensorImpl&)> backprop) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(data));
    if (g_grad_enabled && any_requires_grad(parents)) {
        out.impl()->requires_grad = true;
        auto node = std::make_unique<OpNode>();
        node->op = op;
        node->parents = std::move(parents);
        node->backprop = std::move(backprop);
        out.impl()->node = std::move(node);
    }
    return out;
}

void Tensor::backward() {
    if (size() != 1)
        throw std::invalid_argument("backward: called on non-scalar tensor " + shape_str(shape()));
    if (!impl_->node && !impl_->requires_grad) return;

    // topological order, parents before children
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> seen;
    std::vector<std::pair<TensorImpl*, size_t>> stack;
    stack.emplace_back(impl_.get(), 0);
    seen.insert(impl_.get());
    while (!stack.empty()) {
        auto& [cur, idx] = stack.back();
        size_t n_parents = cur->node ? cur->node->parents.size() : 0;
        if (idx < n_parents) {
            TensorImpl* p = cur->node->parents[idx].impl();
            ++idx;
            if (p->node && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(cur);
            stack.pop_back();
        }
    }
    // leaf grads persist (accumulate across sweeps); intermediates are per-sweep
    for (TensorImpl* t : order)
        if (t->node) t->grad.assign(t->data.size(), 0.0f);
    impl_->ensure_grad();
    impl_->grad[0] += 1.0f;
    if (!impl_->node) return;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* t = *it;
        if (t->node) t->node->backprop(*t);
    }
}

// ---- elementwise and linear algebra ops ----

namespace {

// y[i] op= f(x[i]) loops, threaded for large buffers; writes are disjoint so
// results do not depend on the thread count
template <typename F>
void elementwise(int64_t n, F&& f) {
#ifdef _OPENMP
    if (n >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < n; ++i) f(i);
        return;
    }
#endif
    for (int64_t i = 0; i < n; ++i) f(i);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    std::vector<float> out(a.size());
    const float* pa = a.data();
    const float* pb = b.data();
    elementwise(a.size(), [&](int64_t i) { out[i] = pa[i] + pb[i]; });
    return make_op_result(a.shape(), std::move(out), "add", {a, b}, [a, b](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (a.requires_grad()) {
            float* ga = a.grad();
            elementwise(a.size(), [&](int64_t i) { ga[i] += g[i]; });
        }
        if (b.requires_grad()) {
            float* gb = b.grad();
            elementwise(b.size(), [&](int64_t i) { gb[i] += g[i]; });
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    std::vector<float> out(a.size());
    const float* pa = a.data();
    const float* pb = b.data();
    elementwise(a.size(), [&](int64_t i) { out[i] = pa[i] - pb[i]; });
    return make_op_result(a.shape(), std::move(out), "sub", {a, b}, [a, b](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (a.requires_grad()) {
            float* ga = a.grad();
            elementwise(a.size(), [&](int64_t i) { ga[i] += g[i]; });
        }
        if (b.requires_grad()) {
            float* gb = b.grad();
            elementwise(b.size(), [&](int64_t i) { gb[i] -= g[i]; });
        }
    });
}

Tensor scalar_mul(const Tensor& a, float s) {
    std::vector<float> out(a.size());
    const float* pa = a.data();
    for (int64_t i = 0; i < a.size(); ++i) out[i] = pa[i] * s;
    return make_op_result(a.shape(), std::move(out), "scalar_mul", {a}, [a, s](TensorImpl& o) mutable {
        if (!a.requires_grad()) return;
        const float* g = o.grad.data();
        float* ga = a.grad();
        for (int64_t i = 0; i < a.size(); ++i) ga[i] += g[i] * s;
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    std::vector<float> out(a.size());
    const float* pa = a.data();
    const float* pb = b.data();
    for (int64_t i = 0; i < a.size(); ++i) out[i] = pa[i] * pb[i];
    return make_op_result(a.shape(), std::move(out), "mul", {a, b}, [a, b](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (a.requires_grad()) {
            float* ga = a.grad();
            const float* pb = b.data();
            for (int64_t i = 0; i < a.size(); ++i) ga[i] += g[i] * pb[i];
        }
        if (b.requires_grad()) {
            float* gb = b.grad();
            const float* pa = a.data();
            for (int64_t i = 0; i < b.size(); ++i) gb[i] += g[i] * pa[i];
        }
    });
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw std::invalid_argument("matmul: expects rank-2 tensors, got " + shape_str(a.shape()) +
                                    " and " + shape_str(b.shape()));
    int m = a.dim(0), k = a.dim(1);
    int bk = transpose_b ? b.dim(1) : b.dim(0);
    int n = transpose_b ? b.dim(0) : b.dim(1);
    if (k != bk)
        throw std::invalid_argument("matmul: shape mismatch " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()) + (transpose_b ? " (b transposed)" : ""));
    std::vector<float> out(static_cast<size_t>(m) * n, 0.0f);
    const float* pa = a.data();
    const float* pb = b.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            if (transpose_b) {
                const float* brow = pb + static_cast<size_t>(j) * k;
                for (int t = 0; t < k; ++t) acc += double(pa[i * k + t]) * brow[t];
            } else {
                for (int t = 0; t < k; ++t) acc += double(pa[i * k + t]) * pb[t * n + j];
            }
            out[static_cast<size_t>(i) * n + j] = static_cast<float>(acc);
        }
    return make_op_result({m, n}, std::move(out), "matmul", {a, b},
                          [a, b, m, k, n, transpose_b](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (a.requires_grad()) {
            float* ga = a.grad();
            const float* pb = b.data();
            // dA = G * B^T (or G * B when b was transposed)
            for (int i = 0; i < m; ++i)
                for (int t = 0; t < k; ++t) {
                    double acc = 0.0;
                    for (int j = 0; j < n; ++j)
                        acc += double(g[i * n + j]) *
                               (transpose_b ? pb[static_cast<size_t>(j) * k + t] : pb[t * n + j]);
                    ga[i * k + t] += static_cast<float>(acc);
                }
        }
        if (b.requires_grad()) {
            float* gb = b.grad();
            const float* pa = a.data();
            if (transpose_b) {
                // dB[j,t] = sum_i G[i,j] A[i,t]
                for (int j = 0; j < n; ++j)
                    for (int t = 0; t < k; ++t) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += double(g[i * n + j]) * pa[i * k + t];
                        gb[static_cast<size_t>(j) * k + t] += static_cast<float>(acc);
                    }
            } else {
                for (int t = 0; t < k; ++t)
                    for (int j = 0; j < n; ++j) {
                        double acc = 0.0;
                        for (int i = 0; i < m; ++i) acc += double(g[i * n + j]) * pa[i * k + t];
                        gb[t * n + j] += static_cast<float>(acc);
                    }
            }
        }
    });
}

// ---- conv1d ----

namespace {

// kernel tap i looks at x[t + shift(i)]
inline int conv_shift(int i, int kernel, int dilation, bool causal) {
    int s = -dilation * (kernel - 1 - i);
    if (!causal) s += dilation * (kernel - 1) / 2;
    return s;
}

// accumulate dst[t] += w * src[t + s] over the valid range
inline void tap_axpy(float* dst, const float* src, float wv, int s, int T) {
    int t0 = std::max(0, -s);
    int t1 = std::min(T, T - s);
    const float* ss = src + s;
#pragma omp simd
    for (int t = t0; t < t1; ++t) dst[t] += wv * ss[t];
}

void conv1d_forward_kernel(const float* x, const float* w, const float* bias, float* out, int B,
                           int C, int T, int O, int K, int dilation, bool causal) {
    int s0 = conv_shift(0, K, dilation, causal);
    int s1 = K >= 2 ? conv_shift(1, K, dilation, causal) : 0;
    int s2 = K >= 3 ? conv_shift(2, K, dilation, causal) : 0;
    // range where all three taps are in bounds
    int lo = K == 3 ? std::max({0, -s0, -s1, -s2}) : 0;
    int hi = K == 3 ? std::min({T, T - s0, T - s1, T - s2}) : 0;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < O; ++o) {
            float* orow = out + (static_cast<size_t>(b) * O + o) * T;
            std::fill(orow, orow + T, bias[o]);
            for (int c = 0; c < C; ++c) {
                const float* xrow = x + (static_cast<size_t>(b) * C + c) * T;
                const float* wt = w + (static_cast<size_t>(o) * C + c) * K;
                if (K == 3 && lo < hi) {
                    float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                    const float* p0 = xrow + s0;
                    const float* p1 = xrow + s1;
                    const float* p2 = xrow + s2;
#pragma omp simd
                    for (int t = lo; t < hi; ++t)
                        orow[t] += w0 * p0[t] + w1 * p1[t] + w2 * p2[t];
                    // edges, one tap at a time
                    for (int i = 0; i < 3; ++i) {
                        int s = conv_shift(i, K, dilation, causal);
                        int t0 = std::max(0, -s);
                        int t1 = std::min(T, T - s);
                        for (int t = t0; t < std::min(t1, lo); ++t) orow[t] += wt[i] * xrow[t + s];
                        for (int t = std::max(t0, hi); t < t1; ++t) orow[t] += wt[i] * xrow[t + s];
                    }
                } else {
                    for (int i = 0; i < K; ++i)
                        tap_axpy(orow, xrow, wt[i], conv_shift(i, K, dilation, causal), T);
                }
            }
        }
}

void conv1d_backward_input(const float* g, const float* w, float* gx, int B, int C, int T, int O,
                           int K, int dilation, bool causal) {
    // gx[u] += w[o,c,i] * g[u - s_i]
    int r0 = K >= 1 ? -conv_shift(0, K, dilation, causal) : 0;
    int r1 = K >= 2 ? -conv_shift(1, K, dilation, causal) : 0;
    int r2 = K >= 3 ? -conv_shift(2, K, dilation, causal) : 0;
    int lo = K == 3 ? std::max({0, -r0, -r1, -r2}) : 0;
    int hi = K == 3 ? std::min({T, T - r0, T - r1, T - r2}) : 0;
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            float* gxrow = gx + (static_cast<size_t>(b) * C + c) * T;
            for (int o = 0; o < O; ++o) {
                const float* grow = g + (static_cast<size_t>(b) * O + o) * T;
                const float* wt = w + (static_cast<size_t>(o) * C + c) * K;
                if (K == 3 && lo < hi) {
                    float w0 = wt[0], w1 = wt[1], w2 = wt[2];
                    const float* p0 = grow + r0;
                    const float* p1 = grow + r1;
                    const float* p2 = grow + r2;
#pragma omp simd
                    for (int u = lo; u < hi; ++u)
                        gxrow[u] += w0 * p0[u] + w1 * p1[u] + w2 * p2[u];
                    for (int i = 0; i < 3; ++i) {
                        int r = -conv_shift(i, K, dilation, causal);
                        int u0 = std::max(0, -r);
                        int u1 = std::min(T, T - r);
                        for (int u = u0; u < std::min(u1, lo); ++u) gxrow[u] += wt[i] * grow[u + r];
                        for (int u = std::max(u0, hi); u < u1; ++u) gxrow[u] += wt[i] * grow[u + r];
                    }
                } else {
                    for (int i = 0; i < K; ++i)
                        tap_axpy(gxrow, grow, wt[i], -conv_shift(i, K, dilation, causal), T);
                }
            }
        }
}

void conv1d_backward_weight(const float* g, const float* x, float* gw, int B, int C, int T, int O,
                            int K, int dilation, bool causal) {
    int s0 = K >= 1 ? conv_shift(0, K, dilation, causal) : 0;
    int s1 = K >= 2 ? conv_shift(1, K, dilation, causal) : 0;
    int s2 = K >= 3 ? conv_shift(2, K, dilation, causal) : 0;
    int lo = K == 3 ? std::max({0, -s0, -s1, -s2}) : 0;
    int hi = K == 3 ? std::min({T, T - s0, T - s1, T - s2}) : 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int o = 0; o < O; ++o)
        for (int c = 0; c < C; ++c) {
            const float* wt_base = x + static_cast<size_t>(c) * T;
            (void)wt_base;
            if (K == 3 && lo < hi) {
                float acc0 = 0.0f, acc1 = 0.0f, acc2 = 0.0f;
                for (int b = 0; b < B; ++b) {
                    const float* grow = g + (static_cast<size_t>(b) * O + o) * T;
                    const float* xrow = x + (static_cast<size_t>(b) * C + c) * T;
                    const float* p0 = xrow + s0;
                    const float* p1 = xrow + s1;
                    const float* p2 = xrow + s2;
                    float a0 = 0.0f, a1 = 0.0f, a2 = 0.0f;
#pragma omp simd reduction(+ : a0, a1, a2)
                    for (int t = lo; t < hi; ++t) {
                        float gv = grow[t];
                        a0 += gv * p0[t];
                        a1 += gv * p1[t];
                        a2 += gv * p2[t];
                    }
                    acc0 += a0;
                    acc1 += a1;
                    acc2 += a2;
                    // edges
                    const int shifts[3] = {s0, s1, s2};
                    float* accs[3] = {&acc0, &acc1, &acc2};
                    for (int i = 0; i < 3; ++i) {
                        int s = shifts[i];
                        int t0 = std::max(0, -s);
                        int t1 = std::min(T, T - s);
                        float e = 0.0f;
                        for (int t = t0; t < std::min(t1, lo); ++t) e += grow[t] * xrow[t + s];
                        for (int t = std::max(t0, hi); t < t1; ++t) e += grow[t] * xrow[t + s];
                        *accs[i] += e;
                    }
                }
                gw[(static_cast<size_t>(o) * C + c) * K + 0] += acc0;
                gw[(static_cast<size_t>(o) * C + c) * K + 1] += acc1;
                gw[(static_cast<size_t>(o) * C + c) * K + 2] += acc2;
            } else {
                for (int i = 0; i < K; ++i) {
                    int s = conv_shift(i, K, dilation, causal);
                    int t0 = std::max(0, -s);
                    int t1 = std::min(T, T - s);
                    float acc = 0.0f;
                    for (int b = 0; b < B; ++b) {
                        const float* grow = g + (static_cast<size_t>(b) * O + o) * T;
                        const float* xs = x + (static_cast<size_t>(b) * C + c) * T + s;
                        float a = 0.0f;
#pragma omp simd reduction(+ : a)
                        for (int t = t0; t < t1; ++t) a += grow[t] * xs[t];
                        acc += a;
                    }
                    gw[(static_cast<size_t>(o) * C + c) * K + i] += acc;
                }
            }
        }
}

} // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int dilation, bool causal) {
    if (x.rank() != 3 || w.rank() != 3)
        throw std::invalid_argument("conv1d: expects x [B,C,T] and w [O,C,K], got " +
                                    shape_str(x.shape()) + " and " + shape_str(w.shape()));
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    int O = w.dim(0), K = w.dim(2);
    if (w.dim(1) != C)
        throw std::invalid_argument("conv1d: input channels mismatch, x " + shape_str(x.shape()) +
                                    " vs w " + shape_str(w.shape()));
    if (bias.rank() != 1 || bias.dim(0) != O)
        throw std::invalid_argument("conv1d: bias shape " + shape_str(bias.shape()) +
                                    " does not match out channels " + std::to_string(O));
    if (dilation < 1) throw std::invalid_argument("conv1d: dilation must be >= 1");
    if (!causal && (dilation * (K - 1)) % 2 != 0)
        throw std::invalid_argument("conv1d: symmetric padding needs even d*(K-1)");

    std::vector<float> out(static_cast<size_t>(B) * O * T);
    conv1d_forward_kernel(x.data(), w.data(), bias.data(), out.data(), B, C, T, O, K, dilation,
                          causal);
    return make_op_result({B, O, T}, std::move(out), "conv1d", {x, w, bias},
                          [x, w, bias, B, C, T, O, K, dilation, causal](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (x.requires_grad())
            conv1d_backward_input(g, w.data(), x.grad(), B, C, T, O, K, dilation, causal);
        if (w.requires_grad())
            conv1d_backward_weight(g, x.data(), w.grad(), B, C, T, O, K, dilation, causal);
        if (bias.requires_grad()) {
            float* gb = bias.grad();
            for (int o2 = 0; o2 < O; ++o2) {
                double acc = 0.0;
                for (int b = 0; b < B; ++b) {
                    const float* grow = g + (static_cast<size_t>(b) * O + o2) * T;
                    for (int t = 0; t < T; ++t) acc += grow[t];
                }
                gb[o2] += static_cast<float>(acc);
            }
        }
    });
}

Tensor relu(const Tensor& x) {
    std::vector<float> out(x.size());
    const float* px = x.data();
    elementwise(x.size(), [&](int64_t i) { out[i] = px[i] > 0.0f ? px[i] : 0.0f; });
    return make_op_result(x.shape(), std::move(out), "relu", {x}, [x](TensorImpl& o) mutable {
        if (!x.requires_grad()) return;
        const float* g = o.grad.data();
        const float* px = x.data();
        float* gx = x.grad();
        elementwise(x.size(), [&](int64_t i) {
            if (px[i] > 0.0f) gx[i] += g[i];
        });
    });
}

namespace {
void check_bct(const char* op, const Tensor& x) {
    if (x.rank() != 3)
        throw std::invalid_argument(std::string(op) + ": expects [B,C,T], got " + shape_str(x.shape()));
}
} // namespace

Tensor channel_mean(const Tensor& x) {
    check_bct("channel_mean", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    std::vector<float> out(static_cast<size_t>(C));
    const float* px = x.data();
    double inv = 1.0 / (double(B) * T);
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int b = 0; b < B; ++b) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            for (int t = 0; t < T; ++t) acc += row[t];
        }
        out[c] = static_cast<float>(acc * inv);
    }
    return make_op_result({C}, std::move(out), "channel_mean", {x}, [x, B, C, T](TensorImpl& o) mutable {
        if (!x.requires_grad()) return;
        const float* g = o.grad.data();
        float* gx = x.grad();
        float inv = 1.0f / (float(B) * T);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                float* row = gx + (static_cast<size_t>(b) * C + c) * T;
                float gv = g[c] * inv;
                for (int t = 0; t < T; ++t) row[t] += gv;
            }
    });
}

Tensor channel_var(const Tensor& x, const Tensor& mean) {
    check_bct("channel_var", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (mean.rank() != 1 || mean.dim(0) != C)
        throw std::invalid_argument("channel_var: mean shape " + shape_str(mean.shape()) +
                                    " does not match channels " + std::to_string(C));
    std::vector<float> out(static_cast<size_t>(C));
    const float* px = x.data();
    const float* pm = mean.data();
    double inv = 1.0 / (double(B) * T);
    for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int b = 0; b < B; ++b) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            for (int t = 0; t < T; ++t) {
                double d = double(row[t]) - pm[c];
                acc += d * d;
            }
        }
        out[c] = static_cast<float>(acc * inv);
    }
    return make_op_result({C}, std::move(out), "channel_var", {x, mean},
                          [x, mean, B, C, T](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        const float* px = x.data();
        const float* pm = mean.data();
        float inv = 1.0f / (float(B) * T);
        if (x.requires_grad()) {
            float* gx = x.grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const float* row = px + (static_cast<size_t>(b) * C + c) * T;
                    float* grow = gx + (static_cast<size_t>(b) * C + c) * T;
                    float gv = g[c] * 2.0f * inv;
                    for (int t = 0; t < T; ++t) grow[t] += gv * (row[t] - pm[c]);
                }
        }
        if (mean.requires_grad()) {
            float* gm = mean.grad();
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int b = 0; b < B; ++b) {
                    const float* row = px + (static_cast<size_t>(b) * C + c) * T;
                    for (int t = 0; t < T; ++t) acc += double(row[t]) - pm[c];
                }
                gm[c] += static_cast<float>(-2.0 * inv * acc * g[c]);
            }
        }
    });
}

Tensor broadcast_add_time(const Tensor& x, const Tensor& v) {
    check_bct("broadcast_add_time", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    bool batched = (v.rank() == 2);
    if (batched ? (v.dim(0) != B || v.dim(1) != C) : (v.rank() != 1 || v.dim(0) != C))
        throw std::invalid_argument("broadcast_add_time: x " + shape_str(x.shape()) + " vs v " +
                                    shape_str(v.shape()));
    std::vector<float> out(x.size());
    const float* px = x.data();
    const float* pv = v.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            float* orow = out.data() + (static_cast<size_t>(b) * C + c) * T;
            float add = batched ? pv[b * C + c] : pv[c];
            for (int t = 0; t < T; ++t) orow[t] = row[t] + add;
        }
    return make_op_result(x.shape(), std::move(out), "broadcast_add_time", {x, v},
                          [x, v, B, C, T, batched](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (x.requires_grad()) {
            float* gx = x.grad();
            for (int64_t i = 0; i < x.size(); ++i) gx[i] += g[i];
        }
        if (v.requires_grad()) {
            float* gv = v.grad();
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const float* grow = g + (static_cast<size_t>(b) * C + c) * T;
                    double acc = 0.0;
                    for (int t = 0; t < T; ++t) acc += grow[t];
                    gv[batched ? b * C + c : c] += static_cast<float>(acc);
                }
        }
    });
}

Tensor gap(const Tensor& x) {
    check_bct("gap", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    std::vector<float> out(static_cast<size_t>(B) * C);
    const float* px = x.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            double acc = 0.0;
            for (int t = 0; t < T; ++t) acc += row[t];
            out[static_cast<size_t>(b) * C + c] = static_cast<float>(acc / T);
        }
    return make_op_result({B, C}, std::move(out), "gap", {x}, [x, B, C, T](TensorImpl& o) mutable {
        if (!x.requires_grad()) return;
        const float* g = o.grad.data();
        float* gx = x.grad();
        float inv = 1.0f / float(T);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                float gv = g[b * C + c] * inv;
                float* row = gx + (static_cast<size_t>(b) * C + c) * T;
                for (int t = 0; t < T; ++t) row[t] += gv;
            }
    });
}

Tensor apply_mask(const Tensor& x, std::shared_ptr<const std::vector<float>> mask) {
    if (!mask || static_cast<int64_t>(mask->size()) != x.size())
        throw std::invalid_argument("apply_mask: mask length does not match tensor " +
                                    shape_str(x.shape()));
    std::vector<float> out(x.size());
    const float* px = x.data();
    const float* pm = mask->data();
    elementwise(x.size(), [&](int64_t i) { out[i] = px[i] * pm[i]; });
    return make_op_result(x.shape(), std::move(out), "apply_mask", {x},
                          [x, mask](TensorImpl& o) mutable {
        if (!x.requires_grad()) return;
        const float* g = o.grad.data();
        const float* pm = mask->data();
        float* gx = x.grad();
        elementwise(x.size(), [&](int64_t i) { gx[i] += g[i] * pm[i]; });
    });
}

Tensor sum_of_squares(const Tensor& x) {
    const float* px = x.data();
    double acc = 0.0;
    for (int64_t i = 0; i < x.size(); ++i) acc += double(px[i]) * px[i];
    return make_op_result({1}, {static_cast<float>(acc)}, "sum_of_squares", {x},
                          [x](TensorImpl& o) mutable {
        if (!x.requires_grad()) return;
        float g = o.grad[0];
        const float* px = x.data();
        float* gx = x.grad();
        for (int64_t i = 0; i < x.size(); ++i) gx[i] += 2.0f * g * px[i];
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    if (x.rank() != 2 || w.rank() != 2)
        throw std::invalid_argument("linear: expects x [B,N] and w [M,N], got " +
                                    shape_str(x.shape()) + " and " + shape_str(w.shape()));
    int B = x.dim(0), N = x.dim(1), M = w.dim(0);
    if (w.dim(1) != N || bias.rank() != 1 || bias.dim(0) != M)
        throw std::invalid_argument("linear: shape mismatch x " + shape_str(x.shape()) + ", w " +
                                    shape_str(w.shape()) + ", bias " + shape_str(bias.shape()));
    std::vector<float> out(static_cast<size_t>(B) * M);
    const float* px = x.data();
    const float* pw = w.data();
    const float* pb = bias.data();
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) {
            const float* xrow = px + static_cast<size_t>(b) * N;
            const float* wrow = pw + static_cast<size_t>(m) * N;
            double acc = pb[m];
            for (int n = 0; n < N; ++n) acc += double(xrow[n]) * wrow[n];
            out[static_cast<size_t>(b) * M + m] = static_cast<float>(acc);
        }
    return make_op_result({B, M}, std::move(out), "linear", {x, w, bias},
                          [x, w, bias, B, N, M](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        if (x.requires_grad()) {
            float* gx = x.grad();
            const float* pw = w.data();
            for (int b = 0; b < B; ++b)
                for (int n = 0; n < N; ++n) {
                    double acc = 0.0;
                    for (int m = 0; m < M; ++m)
                        acc += double(g[b * M + m]) * pw[static_cast<size_t>(m) * N + n];
                    gx[static_cast<size_t>(b) * N + n] += static_cast<float>(acc);
                }
        }
        if (w.requires_grad()) {
            float* gw = w.grad();
            const float* px = x.data();
            for (int m = 0; m < M; ++m)
                for (int n = 0; n < N; ++n) {
                    double acc = 0.0;
                    for (int b = 0; b < B; ++b)
                        acc += double(g[b * M + m]) * px[static_cast<size_t>(b) * N + n];
                    gw[static_cast<size_t>(m) * N + n] += static_cast<float>(acc);
                }
        }
        if (bias.requires_grad()) {
            float* gb = bias.grad();
            for (int m = 0; m < M; ++m) {
                double acc = 0.0;
                for (int b = 0; b < B; ++b) acc += g[b * M + m];
                gb[m] += static_cast<float>(acc);
            }
        }
    });
}

Tensor batchnorm_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps,
                       std::vector<float>* batch_mean_out, std::vector<float>* batch_var_out) {
    check_bct("batchnorm_train", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (B < 2)
        throw std::invalid_argument("batchnorm_train: batch size must be >= 2, got " +
                                    std::to_string(B));
    if (gamma.rank() != 1 || gamma.dim(0) != C || beta.rank() != 1 || beta.dim(0) != C)
        throw std::invalid_argument("batchnorm_train: affine shapes " + shape_str(gamma.shape()) +
                                    "/" + shape_str(beta.shape()) + " vs channels " +
                                    std::to_string(C));
    int64_t n = static_cast<int64_t>(B) * T;
    std::vector<float> mean(C), var(C);
    const float* px = x.data();
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int c = 0; c < C; ++c) {
        double s = 0.0, s2 = 0.0;
        for (int b = 0; b < B; ++b) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            double a = 0.0, a2 = 0.0;
#pragma omp simd reduction(+ : a, a2)
            for (int t = 0; t < T; ++t) {
                a += row[t];
                a2 += double(row[t]) * row[t];
            }
            s += a;
            s2 += a2;
        }
        double m = s / double(n);
        mean[c] = static_cast<float>(m);
        var[c] = static_cast<float>(std::max(0.0, s2 / double(n) - m * m));
    }
    if (batch_mean_out) *batch_mean_out = mean;
    if (batch_var_out) *batch_var_out = var;

    auto xhat = std::make_shared<std::vector<float>>(x.size());
    std::vector<float> invstd(C);
    for (int c = 0; c < C; ++c) invstd[c] = 1.0f / std::sqrt(var[c] + eps);
    std::vector<float> out(x.size());
    const float* pg = gamma.data();
    const float* pbta = beta.data();
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            float* hrow = xhat->data() + (static_cast<size_t>(b) * C + c) * T;
            float* orow = out.data() + (static_cast<size_t>(b) * C + c) * T;
            float mu = mean[c], is = invstd[c], gm = pg[c], bt = pbta[c];
#pragma omp simd
            for (int t = 0; t < T; ++t) {
                float h = (row[t] - mu) * is;
                hrow[t] = h;
                orow[t] = gm * h + bt;
            }
        }
    std::vector<float> invstd_copy = invstd;
    return make_op_result(x.shape(), std::move(out), "batchnorm_train", {x, gamma, beta},
                          [x, gamma, beta, xhat, invstd_copy, B, C, T, n](TensorImpl& o) mutable {
        const float* g = o.grad.data();
        const float* ph = xhat->data();
        const float* pg = gamma.data();
        // per-channel reductions shared by all three grads
        std::vector<double> sum_g(C, 0.0), sum_gh(C, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
        for (int c = 0; c < C; ++c)
            for (int b = 0; b < B; ++b) {
                const float* grow = g + (static_cast<size_t>(b) * C + c) * T;
                const float* hrow = ph + (static_cast<size_t>(b) * C + c) * T;
                double a = 0.0, ah = 0.0;
#pragma omp simd reduction(+ : a, ah)
                for (int t = 0; t < T; ++t) {
                    a += grow[t];
                    ah += double(grow[t]) * hrow[t];
                }
                sum_g[c] += a;
                sum_gh[c] += ah;
            }
        if (gamma.requires_grad()) {
            float* gg = gamma.grad();
            for (int c = 0; c < C; ++c) gg[c] += static_cast<float>(sum_gh[c]);
        }
        if (beta.requires_grad()) {
            float* gb = beta.grad();
            for (int c = 0; c < C; ++c) gb[c] += static_cast<float>(sum_g[c]);
        }
        if (x.requires_grad()) {
            float* gx = x.grad();
            double invn = 1.0 / double(n);
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < C; ++c) {
                    const float* grow = g + (static_cast<size_t>(b) * C + c) * T;
                    const float* hrow = ph + (static_cast<size_t>(b) * C + c) * T;
                    float* gxrow = gx + (static_cast<size_t>(b) * C + c) * T;
                    float k = pg[c] * invstd_copy[c];
                    float mg = static_cast<float>(sum_g[c] * invn);
                    float mgh = static_cast<float>(sum_gh[c] * invn);
#pragma omp simd
                    for (int t = 0; t < T; ++t)
                        gxrow[t] += k * (grow[t] - mg - hrow[t] * mgh);
                }
        }
    });
}

Tensor batchnorm_eval(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                      const std::vector<float>& running_mean,
                      const std::vector<float>& running_var, float eps) {
    check_bct("batchnorm_eval", x);
    int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (static_cast<int>(running_mean.size()) != C || static_cast<int>(running_var.size()) != C)
        throw std::invalid_argument("batchnorm_eval: running stats size mismatch for channels " +
                                    std::to_string(C));
    std::vector<float> scale(C), shift(C);
    const float* pg = gamma.data();
    const float* pb = beta.data();
    for (int c = 0; c < C; ++c) {
        scale[c] = pg[c] / std::sqrt(running_var[c] + eps);
        shift[c] = pb[c] - scale[c] * running_mean[c];
    }
    std::vector<float> out(x.size());
    const float* px = x.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const float* row = px + (static_cast<size_t>(b) * C + c) * T;
            float* orow = out.data() + (static_cast<size_t>(b) * C + c) * T;
            for (int t = 0; t < T; ++t) orow[t] = scale[c] * row[t] + shift[c];
        }
    std::vector<float> scale_copy = scale;
    return make_op_result(x.shape(), std::move(out), "batchnorm_eval", {x, gamma, beta},
                          [x, scale_copy, B, C, T](TensorImpl& o) mutable {
        // eval mode treats running stats as constants; gamma/beta grads are
        // not needed on this path (extraction only), input grad supports the
        // causality probes
        if (!x.requires_grad()) return;
        const float* g = o.grad.data();
        float* gx = x.grad();
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const float* grow = g + (static_cast<size_t>(b) * C + c) * T;
                float* gxrow = gx + (static_cast<size_t>(b) * C + c) * T;
                for (int t = 0; t < T; ++t) gxrow[t] += scale_copy[c] * grow[t];
            }
    });
}

Tensor softmax_xent(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2)
        throw std::invalid_argument("softmax_xent: expects [B,K], got " + shape_str(logits.shape()));
    int B = logits.dim(0), K = logits.dim(1);
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("softmax_xent: labels size " + std::to_string(labels.size()) +
                                    " vs batch " + std::to_string(B));
    auto probs = std::make_shared<std::vector<float>>(logits.size());
    const float* pl = logits.data();
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
        const float* row = pl + static_cast<size_t>(b) * K;
        float mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(double(row[k]) - mx);
        for (int k = 0; k < K; ++k)
            (*probs)[static_cast<size_t>(b) * K + k] =
                static_cast<float>(std::exp(double(row[k]) - mx) / z);
        int y = labels[b];
        if (y < 0 || y >= K) throw std::invalid_argument("softmax_xent: label out of range");
        loss -= std::log(std::max(1e-30, double((*probs)[static_cast<size_t>(b) * K + y])));
    }
    std::vector<int> labels_copy = labels;
    return make_op_result({1}, {static_cast<float>(loss)}, "softmax_xent", {logits},
                          [logits, probs, labels_copy, B, K](TensorImpl& o) mutable {
        if (!logits.requires_grad()) return;
        float g = o.grad[0];
        float* gl = logits.grad();
        for (int b = 0; b < B; ++b)
            for (int k = 0; k < K; ++k) {
                float p = (*probs)[static_cast<size_t>(b) * K + k];
                gl[b * K + k] += g * (p - (labels_copy[b] == k ? 1.0f : 0.0f));
            }
    });
}

std::vector<float> softmax_probs(const Tensor& logits) {
    if (logits.rank() != 2)
        throw std::invalid_argument("softmax_probs: expects [B,K], got " + shape_str(logits.shape()));
    int B = logits.dim(0), K = logits.dim(1);
    std::vector<float> probs(logits.size());
    const float* pl = logits.data();
    for (int b = 0; b < B; ++b) {
        const float* row = pl + static_cast<size_t>(b) * K;
        float mx = row[0];
        for (int k = 1; k < K; ++k) mx = std::max(mx, row[k]);
        double z = 0.0;
        for (int k = 0; k < K; ++k) z += std::exp(double(row[k]) - mx);
        for (int k = 0; k < K; ++k)
            probs[static_cast<size_t>(b) * K + k] =
                static_cast<float>(std::exp(double(row[k]) - mx) / z);
    }
    return probs;
}

} // namespace gazerep
