#pragma once

#include <cstdint>

namespace mwdlp {

// Counter-based generator: output i of stream `seed` is a pure function of
// (seed, i), so draws are reproducible regardless of call-site ordering and
// independent streams can be derived without sharing state.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed = 0, uint64_t counter = 0)
        : seed_(seed), counter_(counter) {}

    uint64_t next_u64() {
        uint64_t z = seed_ + 0x9e3779b97f4a7c15ull * (++counter_);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in the open interval (0, 1).
    double next_open01() {
        // 53 random bits, then offset by half an ulp so 0 is excluded.
        const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
        return u + 0x1.0p-54;
    }

    // Standard normal via Box-Muller (one value per call, cached pair dropped).
    double next_normal() {
        double u1 = next_open01();
        double u2 = next_open01();
        return box_muller(u1, u2);
    }

    // Derive an unrelated stream, e.g. per purpose or per step.
    CounterRng fork(uint64_t salt) const {
        uint64_t z = seed_ ^ (0x9e3779b97f4a7c15ull + (salt << 1));
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return CounterRng(z ^ (z >> 31));
    }

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }

private:
    static double box_muller(double u1, double u2);

    uint64_t seed_;
    uint64_t counter_;
};

}  // namespace mwdlp
