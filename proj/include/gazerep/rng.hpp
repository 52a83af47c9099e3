#pragma once

#include <cstdint>
#include <cmath>

namespace gazerep {

// Counter-based RNG built on the splitmix64 finalizer. Streams are keyed,
// stateless and reproducible: value(i) depends only on (key, i), so masks
// and noise can be replayed without storing generator state.
class CounterRng {
public:
    explicit CounterRng(uint64_t key) : key_(key) {}

    static uint64_t mix(uint64_t a, uint64_t b) {
        return finalize(a * 0x9e3779b97f4a7c15ULL + b + 0x2545f4914f6cdd1dULL);
    }
    static uint64_t mix(uint64_t a, uint64_t b, uint64_t c) {
        return mix(mix(a, b), c);
    }

    uint64_t at(uint64_t i) const { return finalize(key_ + i * 0x9e3779b97f4a7c15ULL); }

    // uniform in [0,1), 24-bit resolution
    double uniform_at(uint64_t i) const {
        return static_cast<double>(at(i) >> 40) * (1.0 / 16777216.0);
    }

    // sequential interface
    uint64_t next() { return at(counter_++); }
    double uniform() { return static_cast<double>(next() >> 40) * (1.0 / 16777216.0); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int uniform_int(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }

    // Box-Muller, one value per call
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-12) u1 = 1e-12;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    static uint64_t finalize(uint64_t z) {
        z ^= z >> 30;
        z *= 0xbf58476d1ce4e5b9ULL;
        z ^= z >> 27;
        z *= 0x94d049bb133111ebULL;
        z ^= z >> 31;
        return z;
    }

    uint64_t key_;
    uint64_t counter_ = 0;
};

} // namespace gazerep
