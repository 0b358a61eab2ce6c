#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace skytrack {

/// Small deterministic generator (splitmix64) with explicit floating-point
/// mappings, so seeded scenes reproduce bit-identically across standard
/// library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0,1).
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(next_u64() % static_cast<uint64_t>(hi - lo + 1));
    }

    /// Gaussian via Box-Muller; consumes two uniforms, caches the second draw.
    double normal(double mean = 0.0, double sigma = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + sigma * spare_;
        }
        double u1 = 1.0 - uniform01(); // (0,1], keeps log finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + sigma * r * std::cos(theta);
    }

    /// Independent stream derived from this seed and a stream tag.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        Rng mix(seed ^ (0x9E3779B97F4A7C15ull * (stream + 1)));
        return mix.next_u64();
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace skytrack
