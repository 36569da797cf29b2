#pragma once

#include <cstdint>
#include <random>

namespace desos {

// Seeded random source. std::mt19937_64 is fully specified by the standard,
// so sequences are identical across platforms; the distribution helpers are
// hand-rolled because std::uniform_real_distribution is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t draw;
        do {
            draw = eng_();
        } while (draw >= limit);
        return draw % n;
    }

    std::uint64_t bits() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

}  // namespace desos
