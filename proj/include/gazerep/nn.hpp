#pragma once

#include "gazerep/rng.hpp"
#include "gazerep/tensor.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gazerep {

// Named registry of learnable tensors. Registration order is the canonical
// parameter order for init, Adam state and checkpoints.
class ParamRegistry {
public:
    Tensor add(const std::string& name, std::vector<int> shape);
    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    const std::vector<std::string>& names() const { return names_; }
    std::vector<Tensor>& tensors() { return tensors_; }
    const std::vector<Tensor>& tensors() const { return tensors_; }
    int64_t param_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

// Dilated 1-D convolution, kernel size 3 everywhere (stride 1). The causal
// variant pads 2*dilation zeros on the left; the non-causal one pads
// dilation per side. Either way T is preserved.
struct ConvLayer {
    int in_ch = 0;
    int out_ch = 0;
    int dilation = 1;
    int kernel = 3;
    bool causal = false;
    Tensor weight; // [out_ch, in_ch, kernel]
    Tensor bias;   // [out_ch]

    static ConvLayer create(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch,
                            int dilation, bool causal, int kernel = 3);
    Tensor forward(const Tensor& x) const;
};

struct BatchNorm {
    Tensor gamma;
    Tensor beta;
    std::vector<float> running_mean;
    std::vector<float> running_var;
    float momentum = 0.1f;
    float eps = 1e-5f;

    static BatchNorm create(ParamRegistry& reg, const std::string& name, int channels);
    // training mode normalizes by batch statistics over (batch, time) and
    // updates the running stats; eval mode uses the running stats only
    Tensor forward(const Tensor& x, bool training);
};

// conv -> relu -> batchnorm, twice, plus a skip connection. The skip is the
// identity when channels match and a learned 1x1 projection otherwise.
struct ResidualBlock {
    ConvLayer conv1;
    BatchNorm bn1;
    ConvLayer conv2;
    BatchNorm bn2;
    bool has_projection = false;
    ConvLayer projection; // 1x1, only when in_ch != out_ch

    static ResidualBlock create(ParamRegistry& reg, const std::string& name, int in_ch, int out_ch,
                                int dilation1, int dilation2, bool causal);
    // condition1/condition2: optional per-channel bias broadcast over time,
    // added to the matching conv's pre-activation ([B,out_ch] or empty)
    Tensor forward(const Tensor& x, bool training, const Tensor& condition1 = {},
                   const Tensor& condition2 = {});
};

// RF after layer L of the standard 8-layer stack with dilations
// (1,1,2,4,8,16,32,64): 1 + sum 2*d_i -> (3,5,9,17,33,65,129,257)
int receptive_field(const std::vector<int>& dilations, int layer_index);

// Randomly zero each scalar with probability p (mask is deterministic in
// the key). Identity at p=0; used on the decoder input during training only.
Tensor destroy(const Tensor& x, float p, uint64_t key);

// Kaiming-uniform init for conv/linear weights, U(+-1/sqrt(fan_in)) biases,
// gamma=1/beta=0 for norms. Walks the registry in order; deterministic.
void init_params(ParamRegistry& reg, uint64_t seed);

} // namespace gazerep
