#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dpfilm {

// SplitMix64 (Steele, Lea, Flood 2014). Doubles use the top 53 bits;
// normals use Box-Muller with both outputs consumed in order.
class SplitMix64 {
public:
    using result_type = std::uint64_t;

    explicit SplitMix64(std::uint64_t seed = 0) : s_(seed) {}

    std::uint64_t next()
    {
        std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    std::uint64_t operator()() { return next(); }
    static constexpr std::uint64_t min() { return 0; }
    static constexpr std::uint64_t max() { return ~0ull; }

    // [0, 1)
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double normal()
    {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2 * std::numbers::pi * u2);
        have_spare_ = true;
        return r * std::cos(2 * std::numbers::pi * u2);
    }

private:
    std::uint64_t s_;
    double spare_ = 0;
    bool have_spare_ = false;
};

}  // namespace dpfilm
