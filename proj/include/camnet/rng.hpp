#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace camnet {

// Counter-based deterministic RNG. splitmix64 underneath so streams can be
// derived from hashed keys and reproduce bit-exactly across platforms.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hash-combine a list of u64 keys into one stream seed.
inline uint64_t mix_key(std::initializer_list<uint64_t> keys) {
    uint64_t h = 0x2545f4914f6cdd1dULL;
    for (uint64_t k : keys) h = splitmix64(h ^ k);
    return h;
}

class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in (0,1).
    double uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
    }

    /// Standard normal via Box-Muller (cached spare).
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    int uniform_int(int n) {  // in [0, n)
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace camnet
