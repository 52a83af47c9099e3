#include "gazerep/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace gazerep {

Tensor ParamRegistry::add(const std::string& name, std::vector<int> shape) {
    for (const auto& n : names_)
        if (n == name) throw std::invalid_argument("params: duplicate name " + name);
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    names_.push_back(name);
    tensors_.push_back(t);
    return t;
}

Tensor& ParamRegistry::at(const std::string& name) {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return tensors_[i];
    throw std::out_of_range("params: no tensor named " + name);
}

const Tensor& ParamRegistry::at(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return tensors_[i];
    throw std::out_of_range("params: no tensor named " + name);
}

int64_t ParamRegistry::param_count() const {
    int64_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

ConvLayer ConvLayer::create(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch,
                            int dilation, bool causal, int kernel) {
    ConvLayer layer;
    layer.in_ch = in_ch;
    layer.out_ch = out_ch;
    layer.dilation = dilation;
    layer.kernel = kernel;
    layer.causal = causal;
    layer.weight = reg.add(name + ".weight", {out_ch, in_ch, kernel});
    layer.bias = reg.add(name + ".bias", {out_ch});
    return layer;
}

Tensor ConvLayer::forward(const Tensor& x) const {
    if (x.dim(1) != in_ch)
        throw std::invalid_argument("conv layer: input has " + std::to_string(x.dim(1)) +
                                    " channels, expected " + std::to_string(in_ch));
    return conv1d(x, weight, bias, dilation, causal);
}

BatchNorm BatchNorm::create(ParamRegistry& reg, const std::string& name, int channels) {
    BatchNorm bn;
    bn.gamma = reg.add(name + ".gamma", {channels});
    bn.beta = reg.add(name + ".beta", {channels});
    bn.running_mean.assign(static_cast<size_t>(channels), 0.0f);
    bn.running_var.assign(static_cast<size_t>(channels), 1.0f);
    return bn;
}

Tensor BatchNorm::forward(const Tensor& x, bool training) {
    if (!training) return batchnorm_eval(x, gamma, beta, running_mean, running_var, eps);
    std::vector<float> mean, var;
    Tensor out = batchnorm_train(x, gamma, beta, eps, &mean, &var);
    // running stats track the unbiased batch variance
    int64_t n = static_cast<int64_t>(x.dim(0)) * x.dim(2);
    float bias_corr = n > 1 ? static_cast<float>(double(n) / double(n - 1)) : 1.0f;
    for (size_t c = 0; c < running_mean.size(); ++c) {
        running_mean[c] = (1.0f - momentum) * running_mean[c] + momentum * mean[c];
        running_var[c] = (1.0f - momentum) * running_var[c] + momentum * var[c] * bias_corr;
    }
    return out;
}

ResidualBlock ResidualBlock::create(ParamRegistry& reg, const std::string& name, int in_ch,
                                    int out_ch, int dilation1, int dilation2, bool causal) {
    ResidualBlock block;
    block.conv1 = ConvLayer::create(reg, name + ".conv1", in_ch, out_ch, dilation1, causal);
    block.bn1 = BatchNorm::create(reg, name + ".bn1", out_ch);
    block.conv2 = ConvLayer::create(reg, name + ".conv2", out_ch, out_ch, dilation2, causal);
    block.bn2 = BatchNorm::create(reg, name + ".bn2", out_ch);
    if (in_ch != out_ch) {
        block.has_projection = true;
        block.projection =
            ConvLayer::create(reg, name + ".proj", in_ch, out_ch, /*dilation=*/1, causal,
                              /*kernel=*/1);
    }
    return block;
}

Tensor ResidualBlock::forward(const Tensor& x, bool training, const Tensor& condition1,
                              const Tensor& condition2) {
    Tensor h = conv1.forward(x);
    if (condition1.defined()) h = broadcast_add_time(h, condition1);
    h = bn1.forward(relu(h), training);
    h = conv2.forward(h);
    if (condition2.defined()) h = broadcast_add_time(h, condition2);
    h = bn2.forward(relu(h), training);
    Tensor skip = has_projection ? projection.forward(x) : x;
    return add(h, skip);
}

int receptive_field(const std::vector<int>& dilations, int layer_index) {
    if (layer_index < 1 || layer_index > static_cast<int>(dilations.size()))
        throw std::out_of_range("receptive_field: layer index " + std::to_string(layer_index) +
                                " out of range 1.." + std::to_string(dilations.size()));
    int rf = 1;
    for (int i = 0; i < layer_index; ++i) rf += 2 * dilations[static_cast<size_t>(i)];
    return rf;
}

Tensor destroy(const Tensor& x, float p, uint64_t key) {
    if (p < 0.0f || p > 1.0f) throw std::invalid_argument("destroy: p must be in [0,1]");
    if (p == 0.0f) return scalar_mul(x, 1.0f);
    CounterRng rng(key);
    auto mask = std::make_shared<std::vector<float>>(static_cast<size_t>(x.size()));
    for (int64_t i = 0; i < x.size(); ++i)
        (*mask)[static_cast<size_t>(i)] =
            rng.uniform_at(static_cast<uint64_t>(i)) < double(p) ? 0.0f : 1.0f;
    return apply_mask(x, std::move(mask));
}

void init_params(ParamRegistry& reg, uint64_t seed) {
    const auto& names = reg.names();
    auto& tensors = reg.tensors();
    for (size_t i = 0; i < names.size(); ++i) {
        Tensor& t = tensors[i];
        const std::string& name = names[i];
        CounterRng rng(CounterRng::mix(seed, 0x6e6e5f696e6974ULL, static_cast<uint64_t>(i)));
        float* d = t.data();
        if (name.ends_with(".gamma")) {
            for (int64_t j = 0; j < t.size(); ++j) d[j] = 1.0f;
        } else if (name.ends_with(".beta")) {
            // stays zero
        } else if (name.ends_with(".weight") && t.rank() >= 2) {
            int64_t fan_in = 1;
            for (int r = 1; r < t.rank(); ++r) fan_in *= t.dim(r);
            float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
            for (int64_t j = 0; j < t.size(); ++j)
                d[j] = static_cast<float>(rng.uniform(-bound, bound));
        } else if (name.ends_with(".bias")) {
            // fan_in of the sibling weight registered just before
            int64_t fan_in = 1;
            if (i > 0 && names[i - 1].ends_with(".weight")) {
                const Tensor& w = tensors[i - 1];
                for (int r = 1; r < w.rank(); ++r) fan_in *= w.dim(r);
            }
            float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
            for (int64_t j = 0; j < t.size(); ++j)
                d[j] = static_cast<float>(rng.uniform(-bound, bound));
        } else {
            for (int64_t j = 0; j < t.size(); ++j)
                d[j] = static_cast<float>(rng.uniform(-0.05, 0.05));
        }
    }
}

} // namespace gazerep
