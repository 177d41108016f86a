#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "errors.hpp"

namespace gridmkt {

// mt19937_64 with hand-rolled draws so results do not depend on the
// standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) by rejection sampling.
    std::size_t index(std::size_t n) {
        if (n == 0) {
            throw ContractViolation("Rng::index: empty range");
        }
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return static_cast<std::size_t>(x % bound);
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string& text) {
        std::istringstream is(text);
        is >> engine_;
        if (!is) {
            throw ParseError("Rng::deserialize: bad engine state");
        }
    }

    friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

private:
    std::mt19937_64 engine_;
};

// Derives independent stream seeds from a run seed (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t run_seed, std::uint64_t stream) {
    std::uint64_t z = run_seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace gridmkt
