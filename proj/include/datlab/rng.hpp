#pragma once

#include <cstdint>
#include <random>

namespace datlab {

// splitmix64; used to derive independent per-purpose seeds from one master seed.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
    uint64_t s = master ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    return splitmix64(s);
}

struct Rng {
    std::mt19937_64 gen;

    explicit Rng(uint64_t seed) : gen(seed) {}

    double normal(double mean = 0.0, double stddev = 1.0) {
        std::normal_distribution<double> d(mean, stddev);
        return d(gen);
    }
    double uniform(double lo = 0.0, double hi = 1.0) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(gen);
    }
    // index in [0, n)
    int index(int n) {
        std::uniform_int_distribution<int> d(0, n - 1);
        return d(gen);
    }
};

}  // namespace datlab
