#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ari {

// Deterministic PRNG used everywhere a seed appears. splitmix64 core with
// hand-rolled uniform/normal transforms so streams are reproducible across
// standard libraries and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1) with 53 bits of mantissa.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller, two uniforms per call, no cached spare (keeps stream
    // consumption independent of call parity).
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Unbiased integer in [0, n) via rejection.
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t threshold = (0ull - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent substream derived from a seed and a stream id. Derivation
    // does not advance the parent, so adding a consumer never shifts sibling
    // streams.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        Rng mixer(seed ^ (0x6a09e667f3bcc909ull + stream_id * 0x9e3779b97f4a7c15ull));
        return Rng(mixer.next_u64());
    }

private:
    uint64_t state_;
};

}  // namespace ari
