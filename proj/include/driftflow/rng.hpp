#pragma once

#include <cmath>
#include <cstdint>

namespace driftflow {

// Counter-based pseudo-random generator. Each (seed, stream) pair names an
// independent stream, and draws are a pure function of (seed, stream,
// counter), so substreams can be handed to parallel work items without any
// shared mutable state and a run is reproducible bit-for-bit.

struct RngHandle {
    uint64_t seed = 0;
    uint64_t stream = 0;
};

// SplitMix64 finalizer (Steele et al.); full-avalanche 64-bit mix.
inline uint64_t mix64(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
}

inline RngHandle derive_stream(RngHandle h, uint64_t tag) {
    return RngHandle{h.seed, mix64(h.stream + 0x9e3779b97f4a7c15ull * (tag + 1))};
}

class Rng {
public:
    explicit Rng(RngHandle h)
        : handle_(h), key_(mix64(h.seed + 0x9e3779b97f4a7c15ull) ^ mix64(h.stream + 0x3c6ef372fe94f82bull)) {}
    Rng(uint64_t seed, uint64_t stream = 0) : Rng(RngHandle{seed, stream}) {}

    RngHandle handle() const { return handle_; }
    Rng substream(uint64_t tag) const { return Rng(derive_stream(handle_, tag)); }

    uint64_t next_u64() { return mix64(key_ + 0x9e3779b97f4a7c15ull * (++counter_)); }

    // Uniform in [0, 1); 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Index in [0, n).
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller; pairs are generated together and the
    // spare is cached, so draws stay a deterministic function of the counter.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

private:
    RngHandle handle_;
    uint64_t key_ = 0;
    uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace driftflow
