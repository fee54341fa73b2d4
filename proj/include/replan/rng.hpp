#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace replan {

// splitmix64. Every sampler below uses only integer ops and IEEE-exact
// floating arithmetic, so a seeded stream reproduces bit-for-bit on any
// conforming platform.
class SplitMix64 {
public:
    explicit SplitMix64(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // dyadic rational in [0,1)
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Irwin-Hall(12) minus 6: zero mean, unit variance, no libm calls.
    double normal() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += uniform01();
        return s - 6.0;
    }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
    }

    bool coin() { return (next() & 1) != 0; }

    double sign() { return coin() ? 1.0 : -1.0; }

private:
    uint64_t state_;
};

uint64_t fnv1a64(const void* data, size_t n, uint64_t seed = 0xcbf29ce484222325ULL);

inline uint64_t fnv1a64(std::string_view s, uint64_t seed = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), seed);
}

// seed derivation for independent substreams
uint64_t hash_mix(uint64_t a, uint64_t b);

} // namespace replan
