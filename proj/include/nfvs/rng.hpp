#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace nfvs {

// Counter-based pseudo-random stream. Every draw is a pure hash of
// (seed, stream, counter), so independent streams can be split off a master
// seed without sharing state, and results do not depend on platform,
// thread schedule, or call interleaving.
class Rng {
public:
    Rng() = default;
    Rng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    /// Derive a child stream. Children with different tags are independent.
    Rng split(std::uint64_t tag) const { return Rng(seed_, mix(stream_ ^ mix(tag))); }
    Rng split(std::string_view tag) const { return split(hash(tag)); }

    std::uint64_t next_u64() { return draw(counter_++); }

    /// Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t next_below(std::uint64_t n) {
        // Rejection sampling keeps the distribution exact.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    /// Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    static std::uint64_t hash(std::string_view s) {
        // FNV-1a, then one mix round to spread low bits.
        std::uint64_t h = 1469598103934665603ull;
        for (const char ch : s) {
            h ^= static_cast<unsigned char>(ch);
            h *= 1099511628211ull;
        }
        return mix(h);
    }

    static std::uint64_t mix(std::uint64_t x) {
        // splitmix64 finalizer.
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    std::uint64_t draw(std::uint64_t counter) const {
        return mix(mix(seed_ ^ mix(stream_)) ^ mix(counter ^ 0xa0761d6478bd642full));
    }

    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace nfvs
