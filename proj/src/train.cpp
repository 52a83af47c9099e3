#include "gazerep/train.hpp"

#include "gazerep/checkpoint.hpp"
#include "gazerep/rng.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gazerep {

namespace {
constexpr char kOptMagic[4] = {'G', 'Z', 'O', 'P'};
constexpr uint32_t kOptVersion = 1;
} // namespace

AdamState AdamState::create(const ParamRegistry& params) {
    AdamState state;
    for (const auto& t : params.tensors()) {
        state.m.emplace_back(static_cast<size_t>(t.size()), 0.0f);
        state.v.emplace_back(static_cast<size_t>(t.size()), 0.0f);
    }
    return state;
}

void TrainConfig::validate() const {
    if (batch_size < 2) throw std::invalid_argument("train config: batch_size must be >= 2");
    if (epochs < 1) throw std::invalid_argument("train config: epochs must be >= 1");
}

void adam_step(ParamRegistry& params, AdamState& state) {
    auto& tensors = params.tensors();
    if (state.m.size() != tensors.size())
        throw std::invalid_argument("adam_step: state does not match parameter registry");
    state.step += 1;
    double bc1 = 1.0 - std::pow(double(state.beta1), double(state.step));
    double bc2 = 1.0 - std::pow(double(state.beta2), double(state.step));
    for (size_t i = 0; i < tensors.size(); ++i) {
        Tensor& t = tensors[i];
        float* p = t.data();
        const float* g = t.grad();
        float* m = state.m[i].data();
        float* v = state.v[i].data();
        for (int64_t j = 0; j < t.size(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g[j] * g[j];
            float mhat = static_cast<float>(m[j] / bc1);
            float vhat = static_cast<float>(v[j] / bc2);
            p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

Tensor batch_tensor(const std::vector<SignalWindow>& windows, const std::vector<size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("batch_tensor: empty batch");
    int T = windows[indices[0]].length;
    std::vector<float> data(indices.size() * 2 * static_cast<size_t>(T));
    for (size_t i = 0; i < indices.size(); ++i) {
        const SignalWindow& w = windows[indices[i]];
        if (w.length != T) throw std::invalid_argument("batch_tensor: ragged window lengths");
        std::copy(w.channels.begin(), w.channels.end(),
                  data.begin() + static_cast<long>(i * 2 * static_cast<size_t>(T)));
    }
    return Tensor::from_data({static_cast<int>(indices.size()), 2, T}, std::move(data));
}

double train_epoch(Autoencoder& model, const std::vector<SignalWindow>& windows,
                   const TrainConfig& cfg, AdamState& adam, int epoch) {
    cfg.validate();
    if (windows.empty()) throw std::invalid_argument("train_epoch: empty dataset");

    std::vector<size_t> order(windows.size());
    std::iota(order.begin(), order.end(), 0);
    if (cfg.shuffle) {
        CounterRng rng(CounterRng::mix(cfg.seed, 0x73687566ULL, static_cast<uint64_t>(epoch)));
        for (size_t i = order.size() - 1; i > 0; --i) {
            size_t j = static_cast<size_t>(rng.uniform_int(static_cast<int>(i + 1)));
            std::swap(order[i], order[j]);
        }
    }

    double total_loss = 0.0;
    size_t samples_seen = 0;
    int step = 0;
    for (size_t at = 0; at + 2 <= order.size(); at += static_cast<size_t>(cfg.batch_size)) {
        size_t take = std::min(static_cast<size_t>(cfg.batch_size), order.size() - at);
        if (take < 2) break; // batchnorm needs at least 2 samples
        std::vector<size_t> batch(order.begin() + static_cast<long>(at),
                                  order.begin() + static_cast<long>(at + take));
        Tensor x = batch_tensor(windows, batch);
        uint64_t destroy_key =
            CounterRng::mix(cfg.seed, static_cast<uint64_t>(epoch), static_cast<uint64_t>(step));
        Tensor loss = model.reconstruct_loss(x, destroy_key);
        loss.backward();
        adam_step(model.params(), adam);
        zero_grads(model.params().tensors());
        total_loss += double(loss.item());
        samples_seen += take;
        ++step;
    }
    if (samples_seen == 0) throw std::invalid_argument("train_epoch: no batch of size >= 2");
    return total_loss / static_cast<double>(samples_seen);
}

std::vector<EpochLog> train_model(Autoencoder& model, const std::vector<SignalWindow>& windows,
                                  const TrainConfig& cfg, AdamState& adam, int first_epoch) {
    std::vector<EpochLog> logs;
    for (int e = first_epoch; e < first_epoch + cfg.epochs; ++e) {
        auto start = std::chrono::steady_clock::now();
        EpochLog log;
        log.epoch = e;
        log.mean_loss = train_epoch(model, windows, cfg, adam, e);
        log.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        logs.push_back(log);
    }
    return logs;
}

void save_checkpoint(const std::string& path, Autoencoder& model, const AdamState* adam) {
    save_model(path, model);
    if (!adam) return;
    std::vector<NamedBlob> blobs;
    const auto& names = model.params().names();
    for (size_t i = 0; i < names.size(); ++i) {
        blobs.push_back({"m." + names[i],
                         {static_cast<int>(adam->m[i].size())},
                         adam->m[i]});
        blobs.push_back({"v." + names[i],
                         {static_cast<int>(adam->v[i].size())},
                         adam->v[i]});
    }
    std::vector<uint8_t> header(8, 0);
    uint64_t step = static_cast<uint64_t>(adam->step);
    for (int i = 0; i < 8; ++i) header[static_cast<size_t>(i)] = static_cast<uint8_t>(step >> (8 * i));
    write_blob_file(path + ".opt", kOptMagic, kOptVersion, header, blobs);
}

Autoencoder load_checkpoint(const std::string& path, AdamState* adam) {
    Autoencoder model = load_model(path);
    if (adam) {
        std::vector<uint8_t> header;
        auto blobs = read_blob_file(path + ".opt", kOptMagic, kOptVersion, &header);
        if (header.size() != 8) throw std::runtime_error("optimizer checkpoint: bad header");
        uint64_t step = 0;
        for (int i = 0; i < 8; ++i) step |= static_cast<uint64_t>(header[static_cast<size_t>(i)]) << (8 * i);
        *adam = AdamState::create(model.params());
        adam->step = static_cast<int64_t>(step);
        const auto& names = model.params().names();
        auto find_blob = [&blobs, &path](const std::string& name) -> const NamedBlob& {
            for (const auto& b : blobs)
                if (b.name == name) return b;
            throw std::runtime_error("optimizer checkpoint " + path + ".opt: missing " + name);
        };
        for (size_t i = 0; i < names.size(); ++i) {
            const NamedBlob& mb = find_blob("m." + names[i]);
            const NamedBlob& vb = find_blob("v." + names[i]);
            if (mb.data.size() != adam->m[i].size() || vb.data.size() != adam->v[i].size())
                throw std::runtime_error("optimizer checkpoint: size mismatch at " + names[i]);
            adam->m[i] = mb.data;
            adam->v[i] = vb.data;
        }
    }
    return model;
}

} // namespace gazerep
