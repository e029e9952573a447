#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dfa {

// Deterministic random source. All randomness in the library flows through
// this class so that a seed fully determines every draw, independent of
// platform and thread count. Gaussian variates use Box-Muller on explicitly
// constructed 53-bit uniforms; std::normal_distribution is avoided because
// its draw sequence is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    // Derives an independent stream for a parallel unit of work. Trials
    // seeded this way produce identical results in any execution order.
    static Rng derived(std::uint64_t base_seed, std::uint64_t stream) {
        return Rng(splitmix64(base_seed + 0x9E3779B97F4A7C15ULL * (stream + 1)));
    }

    // Uniform on [0, 1).
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0, 1].
    double uniform_pos() {
        return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal variate.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform_pos();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        cached_ = r * std::sin(angle);
        have_cached_ = true;
        return r * std::cos(angle);
    }

private:
    static std::uint64_t splitmix64(std::uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace dfa
