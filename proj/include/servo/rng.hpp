#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace servo {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(const uint8_t* data, size_t n, uint64_t h = 14695981039346656037ull) {
    for (size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64_str(std::string_view s, uint64_t h = 14695981039346656037ull) {
    return fnv1a64(reinterpret_cast<const uint8_t*>(s.data()), s.size(), h);
}

// Derives an independent child seed from a root seed plus a stable textual tag
// and up to two numeric keys. Used so that every latency stream, bot, and
// handler gets its own reproducible sequence regardless of scheduling order.
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t a = 0, uint64_t b = 0) {
    uint64_t h = fnv1a64_str(tag);
    uint64_t s = root ^ h;
    uint64_t out = splitmix64(s);
    s ^= a + 0x9e3779b97f4a7c15ull;
    out ^= splitmix64(s);
    s ^= b + 0xbf58476d1ce4e5b9ull;
    out ^= splitmix64(s);
    return out;
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [lo, hi], inclusive.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        std::uniform_int_distribution<int64_t> d(lo, hi);
        return d(eng_);
    }

    double normal(double mean, double stddev) {
        std::normal_distribution<double> d(mean, stddev);
        return d(eng_);
    }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

}  // namespace servo
