#pragma once

#include "gazerep/nn.hpp"
#include "gazerep/signal.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gazerep {

struct DecoderStage {
    int filters = 0;
    int layers = 0; // convolutional layers in this stage, even
};

struct ModelConfig {
    Modality modality = Modality::Position;
    int enc_filters = 128;
    int enc_layers = 8;
    std::vector<DecoderStage> dec_spec;
    std::vector<int> dilations = {1, 1, 2, 4, 8, 16, 32, 64};
    int z1_dim = 64;
    int z2_dim = 64;
    float destroy_p = 0.75f;

    // paper-scale presets
    static ModelConfig position();      // 128x8 encoder, 128x4;64x4 decoder, p=0.75
    static ModelConfig velocity();      // 256x8 encoder, 128x8 decoder, p=0.66
    // halved receptive field (161 vs 257) for 250 Hz inputs
    static ModelConfig velocity_250hz();
    // desk-scale variant with the same layout
    static ModelConfig reduced(Modality modality, int filters, int z_dim = 64);

    int z_dim() const { return z1_dim + z2_dim; }
    int decoder_layers() const;
    void validate() const;
};

// Non-causal dilated-conv encoder with a micro-scale tap after layer 4 and
// a macro-scale tap after layer 8. A 1x1 input stem lifts the 2-channel
// signal to the working width so all residual blocks keep identity skips.
struct EncoderTcn {
    ConvLayer stem;
    BatchNorm stem_bn;
    std::vector<ResidualBlock> blocks;
    Tensor z1_weight, z1_bias; // micro bottleneck FC
    Tensor z2_weight, z2_bias; // macro bottleneck FC

    static EncoderTcn create(ParamRegistry& reg, const ModelConfig& cfg);
    // z1/z2 are [B, z_dim]; no forward connection from z1 into z2
    void forward(const Tensor& x, bool training, Tensor& z1, Tensor& z2);
};

// Causal dilated-conv stack over the destroyed signal. The macro code
// biases the first conv layer, the micro code the fifth; a final 1x1 conv
// maps back to 2 channels with no activation.
struct DecoderTcn {
    std::vector<ResidualBlock> blocks;
    Tensor cond_z2_weight, cond_z2_bias; // z2 -> first layer channels
    Tensor cond_z1_weight, cond_z1_bias; // z1 -> fifth layer channels
    ConvLayer head;

    static DecoderTcn create(ParamRegistry& reg, const ModelConfig& cfg);
    Tensor forward(const Tensor& destroyed, const Tensor& z1, const Tensor& z2, bool training);
};

struct Representation {
    std::vector<float> micro; // z1
    std::vector<float> macro; // z2
    std::vector<float> z;     // [z1; z2]
    Modality modality = Modality::Position;
};

struct AuditRow {
    std::string component;
    int64_t count = 0;
};

struct AuditReport {
    std::vector<AuditRow> rows;
    int64_t total = 0;
    std::vector<int> receptive_fields;
    std::string to_text(Modality modality) const; // includes the reference totals
};

class Autoencoder {
public:
    Autoencoder(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }
    ParamRegistry& params() { return params_; }
    const ParamRegistry& params() const { return params_; }
    int64_t param_count() const { return params_.param_count(); }

    // x [B,2,T] -> z1, z2 each [B,64]
    void encode(const Tensor& x, bool training, Tensor& z1, Tensor& z2);
    Tensor decode(const Tensor& destroyed, const Tensor& z1, const Tensor& z2, bool training);
    // summed squared error between x and its reconstruction from the
    // destroyed input; destroy mask drawn from destroy_key
    Tensor reconstruct_loss(const Tensor& x, uint64_t destroy_key);
    // eval mode, full-length 2xT signal, batch of one; destroy disabled
    Representation represent(const std::vector<float>& signal, int length);

    AuditReport audit() const;

    // named running-stat buffers in a stable order
    std::vector<std::pair<std::string, std::vector<float>*>> buffers();

private:
    ModelConfig cfg_;
    ParamRegistry params_;
    EncoderTcn encoder_;
    DecoderTcn decoder_;
};

// same encoder plus an FC+softmax head over z
class TcnClassifier {
public:
    TcnClassifier(ModelConfig cfg, int n_classes, uint64_t seed);
    Tensor logits(const Tensor& x, bool training); // [B, n_classes]
    std::vector<float> probabilities(const Tensor& x); // eval mode, rows sum to 1
    Tensor loss(const Tensor& x, const std::vector<int>& labels); // summed cross-entropy
    ParamRegistry& params() { return params_; }
    int n_classes() const { return n_classes_; }

private:
    ModelConfig cfg_;
    int n_classes_;
    ParamRegistry params_;
    EncoderTcn encoder_;
    Tensor head_weight_, head_bias_;
};

// GZAE checkpoint: config header, learnable parameters in registry order,
// then batchnorm running stats, CRC-terminated.
void save_model(const std::string& path, Autoencoder& model);
Autoencoder load_model(const std::string& path);

AuditReport audit_config(const ModelConfig& cfg);

} // namespace gazerep
