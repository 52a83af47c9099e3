#pragma once

#include "gazerep/model.hpp"
#include "gazerep/signal.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace gazerep {

struct AdamState {
    float lr = 5e-4f;
    float beta1 = 0.9f;
    float beta2 = 0.999f;
    float eps = 1e-8f;
    int64_t step = 0;
    std::vector<std::vector<float>> m; // mirrors the registry
    std::vector<std::vector<float>> v;

    static AdamState create(const ParamRegistry& params);
};

struct TrainConfig {
    int batch_size = 256; // 256 position / 128 velocity
    int epochs = 10;
    uint64_t seed = 0;
    bool shuffle = true;

    void validate() const;
};

// standard bias-corrected Adam update; reads grads, mutates parameters
void adam_step(ParamRegistry& params, AdamState& state);

// One pass over the windows in seeded-shuffle order. Each batch: fresh
// destroy mask keyed by (seed, epoch, step), summed SSE loss, backward,
// Adam step. Tail batches with fewer than 2 samples are dropped. Returns
// the mean per-sample loss.
double train_epoch(Autoencoder& model, const std::vector<SignalWindow>& windows,
                   const TrainConfig& cfg, AdamState& adam, int epoch);

struct EpochLog {
    int epoch = 0;
    double mean_loss = 0.0;
    double wall_s = 0.0;
};

std::vector<EpochLog> train_model(Autoencoder& model, const std::vector<SignalWindow>& windows,
                                  const TrainConfig& cfg, AdamState& adam, int first_epoch = 0);

// Model checkpoint plus a "<path>.opt" sidecar holding the Adam moments, so
// a resumed run replays the uninterrupted loss sequence exactly.
void save_checkpoint(const std::string& path, Autoencoder& model, const AdamState* adam = nullptr);
Autoencoder load_checkpoint(const std::string& path, AdamState* adam = nullptr);

// assemble [B,2,T] from a batch of equally sized windows
Tensor batch_tensor(const std::vector<SignalWindow>& windows, const std::vector<size_t>& indices);

} // namespace gazerep
