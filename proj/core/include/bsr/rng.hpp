#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace bsr {

// Deterministic splitmix64 generator. All randomness in the toolkit flows
// through explicitly seeded instances of this class so that results are
// reproducible across runs and independent of the standard library's
// distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform float in [lo, hi). Returns lo when lo == hi.
    float uniform_float(float lo, float hi) {
        return static_cast<float>(lo + next_double() * (static_cast<double>(hi) - lo));
    }

    // Uniform integer in [0, bound). bound must be positive. Unbiased.
    int uniform_int(int bound) {
        const auto n = static_cast<std::uint64_t>(bound);
        const std::uint64_t limit =
            std::numeric_limits<std::uint64_t>::max() -
            std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= limit);
        return static_cast<int>(r % n);
    }

    // Uniform integer in [lo, hi] inclusive.
    int uniform_int_incl(int lo, int hi) {
        if (hi <= lo) return lo;
        return lo + uniform_int(hi - lo + 1);
    }

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            const int j = uniform_int(i + 1);
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(j)]);
        }
    }

    // Independent stream keyed by (original seed, stream id); does not depend
    // on how far this generator has been advanced.
    Rng derive(std::uint64_t stream) const { return Rng(mix(seed_, stream)); }

    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace bsr
