#pragma once

// Naive float64 re-implementations used as independent oracles. These are
// written straight from the math and share no code with the engine.

#include "gazerep/model.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace ref {

using Vec = std::vector<double>;

inline int conv_shift(int i, int kernel, int dilation, bool causal) {
    int s = -dilation * (kernel - 1 - i);
    if (!causal) s += dilation * (kernel - 1) / 2;
    return s;
}

inline Vec conv1d(const Vec& x, const Vec& w, const Vec& bias, int B, int C, int T, int O, int K,
                  int dilation, bool causal) {
    Vec out(static_cast<size_t>(B) * O * T, 0.0);
    for (int b = 0; b < B; ++b)
        for (int o = 0; o < O; ++o)
            for (int t = 0; t < T; ++t) {
                double acc = bias[static_cast<size_t>(o)];
                for (int c = 0; c < C; ++c)
                    for (int i = 0; i < K; ++i) {
                        int src = t + conv_shift(i, K, dilation, causal);
                        if (src < 0 || src >= T) continue;
                        acc += w[(static_cast<size_t>(o) * C + c) * K + i] *
                               x[(static_cast<size_t>(b) * C + c) * T + src];
                    }
                out[(static_cast<size_t>(b) * O + o) * T + t] = acc;
            }
    return out;
}

inline Vec relu(const Vec& x) {
    Vec out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
    return out;
}

inline Vec batchnorm_train(const Vec& x, const Vec& gamma, const Vec& beta, int B, int C, int T,
                           double eps) {
    Vec out(x.size());
    double n = double(B) * T;
    for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) mean += x[(static_cast<size_t>(b) * C + c) * T + t];
        mean /= n;
        double var = 0.0;
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) {
                double d = x[(static_cast<size_t>(b) * C + c) * T + t] - mean;
                var += d * d;
            }
        var /= n;
        double inv = 1.0 / std::sqrt(var + eps);
        for (int b = 0; b < B; ++b)
            for (int t = 0; t < T; ++t) {
                size_t at = (static_cast<size_t>(b) * C + c) * T + t;
                out[at] = gamma[static_cast<size_t>(c)] * (x[at] - mean) * inv +
                          beta[static_cast<size_t>(c)];
            }
    }
    return out;
}

inline Vec gap(const Vec& x, int B, int C, int T) {
    Vec out(static_cast<size_t>(B) * C, 0.0);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            for (int t = 0; t < T; ++t) acc += x[(static_cast<size_t>(b) * C + c) * T + t];
            out[static_cast<size_t>(b) * C + c] = acc / T;
        }
    return out;
}

inline Vec linear(const Vec& x, const Vec& w, const Vec& bias, int B, int N, int M) {
    Vec out(static_cast<size_t>(B) * M, 0.0);
    for (int b = 0; b < B; ++b)
        for (int m = 0; m < M; ++m) {
            double acc = bias[static_cast<size_t>(m)];
            for (int n = 0; n < N; ++n)
                acc += x[static_cast<size_t>(b) * N + n] * w[static_cast<size_t>(m) * N + n];
            out[static_cast<size_t>(b) * M + m] = acc;
        }
    return out;
}

inline Vec broadcast_add_time(const Vec& x, const Vec& v, int B, int C, int T) {
    Vec out(x.size());
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t) {
                size_t at = (static_cast<size_t>(b) * C + c) * T + t;
                out[at] = x[at] + v[static_cast<size_t>(b) * C + c];
            }
    return out;
}

inline double sum_of_squares(const Vec& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return acc;
}

// parameter store keyed by registry name, holding float64 copies
using ParamMap = std::map<std::string, Vec>;

inline ParamMap snapshot_params(const gazerep::ParamRegistry& reg) {
    ParamMap out;
    const auto& names = reg.names();
    const auto& tensors = reg.tensors();
    for (size_t i = 0; i < names.size(); ++i) {
        Vec v(static_cast<size_t>(tensors[i].size()));
        const float* d = tensors[i].data();
        for (size_t j = 0; j < v.size(); ++j) v[j] = d[j];
        out[names[i]] = v;
    }
    return out;
}

// Full micro-macro autoencoder loss in float64, mirroring the published
// architecture: 1x1 stem + 4 non-causal residual blocks with taps after
// blocks 2 and 4, causal decoder conditioned at layers 1 and 5, SSE.
inline double autoencoder_loss(const gazerep::ModelConfig& cfg, const ParamMap& params,
                               const Vec& x, const Vec& mask, int B, int T) {
    auto p = [&params](const std::string& name) -> const Vec& {
        auto it = params.find(name);
        if (it == params.end()) throw std::runtime_error("reference: missing param " + name);
        return it->second;
    };
    int F = cfg.enc_filters;
    double eps = 1e-5;

    auto block = [&](const Vec& input, const std::string& name, int in_ch, int out_ch, int d1,
                     int d2, bool causal, const Vec* cond1) {
        Vec h = conv1d(input, p(name + ".conv1.weight"), p(name + ".conv1.bias"), B, in_ch, T,
                       out_ch, 3, d1, causal);
        if (cond1) h = broadcast_add_time(h, *cond1, B, out_ch, T);
        h = batchnorm_train(relu(h), p(name + ".bn1.gamma"), p(name + ".bn1.beta"), B, out_ch, T,
                            eps);
        h = conv1d(h, p(name + ".conv2.weight"), p(name + ".conv2.bias"), B, out_ch, T, out_ch, 3,
                   d2, causal);
        h = batchnorm_train(relu(h), p(name + ".bn2.gamma"), p(name + ".bn2.beta"), B, out_ch, T,
                            eps);
        Vec skip;
        if (in_ch != out_ch)
            skip = conv1d(input, p(name + ".proj.weight"), p(name + ".proj.bias"), B, in_ch, T,
                          out_ch, 1, 1, causal);
        else
            skip = input;
        for (size_t i = 0; i < h.size(); ++i) h[i] += skip[i];
        return h;
    };

    // encoder
    Vec h = conv1d(x, p("enc.stem.weight"), p("enc.stem.bias"), B, 2, T, F, 1, 1, false);
    h = batchnorm_train(relu(h), p("enc.stem_bn.gamma"), p("enc.stem_bn.beta"), B, F, T, eps);
    int n_blocks = cfg.enc_layers / 2;
    Vec z1, z2;
    for (int b = 0; b < n_blocks; ++b) {
        h = block(h, "enc.block" + std::to_string(b + 1), F, F,
                  cfg.dilations[static_cast<size_t>(2 * b)],
                  cfg.dilations[static_cast<size_t>(2 * b + 1)], false, nullptr);
        if (b + 1 == n_blocks / 2)
            z1 = linear(gap(h, B, F, T), p("enc.z1_fc.weight"), p("enc.z1_fc.bias"), B, F,
                        cfg.z1_dim);
    }
    z2 = linear(gap(h, B, F, T), p("enc.z2_fc.weight"), p("enc.z2_fc.bias"), B, F, cfg.z2_dim);

    // decoder over the destroyed input
    Vec destroyed(x.size());
    for (size_t i = 0; i < x.size(); ++i) destroyed[i] = x[i] * mask[i];

    int first_ch = cfg.dec_spec.front().filters;
    Vec macro_bias = linear(z2, p("dec.cond_z2.weight"), p("dec.cond_z2.bias"), B, cfg.z2_dim,
                            first_ch);
    Vec g = destroyed;
    int in_ch = 2;
    int layer = 0;
    int block_idx = 0;
    for (const auto& stage : cfg.dec_spec)
        for (int bb = 0; bb < stage.layers / 2; ++bb) {
            ++block_idx;
            const Vec* cond = nullptr;
            Vec micro_bias;
            if (block_idx == 1) cond = &macro_bias;
            if (block_idx == 3) {
                micro_bias = linear(z1, p("dec.cond_z1.weight"), p("dec.cond_z1.bias"), B,
                                    cfg.z1_dim, stage.filters);
                cond = &micro_bias;
            }
            int d1 = cfg.dilations[static_cast<size_t>(layer % cfg.dilations.size())];
            int d2 = cfg.dilations[static_cast<size_t>((layer + 1) % cfg.dilations.size())];
            g = block(g, "dec.block" + std::to_string(block_idx), in_ch, stage.filters, d1, d2,
                      true, cond);
            in_ch = stage.filters;
            layer += 2;
        }
    Vec xhat = conv1d(g, p("dec.head.weight"), p("dec.head.bias"), B, in_ch, T, 2, 1, 1, true);

    Vec diff(x.size());
    for (size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - xhat[i];
    return sum_of_squares(diff);
}

// central finite differences of a scalar function
inline Vec central_diff(const std::function<double(const Vec&)>& f, Vec x, double h = 1e-3) {
    Vec grad(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        double keep = x[i];
        x[i] = keep + h;
        double hi = f(x);
        x[i] = keep - h;
        double lo = f(x);
        x[i] = keep;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    return grad;
}

} // namespace ref
