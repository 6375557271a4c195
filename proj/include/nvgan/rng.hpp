#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "nvgan/errors.hpp"

namespace nvgan {

// PCG32: small, fast, and its whole state is two u64 words, which keeps
// checkpointed RNG state trivial and platform-independent. Distributions are
// implemented here directly; the standard <random> distributions are not
// specified bit-exactly across library implementations.
class Pcg32 {
public:
    Pcg32() : Pcg32(0x853c49e6748fea9bULL) {}
    explicit Pcg32(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL) { reseed(seed, stream); }

    void reseed(uint64_t seed, uint64_t stream = 0xda3e39cb94b95bdbULL) {
        state_ = 0;
        inc_ = (stream << 1u) | 1u;
        next_u32();
        state_ += seed;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform() { return static_cast<float>(next_u32() >> 8) * 0x1.0p-24f; }

    // Uniform in [lo, hi).
    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [0, n) by rejection.
    uint32_t bounded(uint32_t n) {
        if (n == 0) throw StateError("bounded(0) is undefined");
        uint32_t threshold = (-n) % n;
        for (;;) {
            uint32_t r = next_u32();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller. Stateless across calls (no cached spare)
    // so serialized state fully determines the stream.
    float normal() {
        float u1 = 0.0f;
        do {
            u1 = uniform();
        } while (u1 <= 0.0f);
        float u2 = uniform();
        return std::sqrt(-2.0f * std::log(u1)) *
               std::cos(2.0f * std::numbers::pi_v<float> * u2);
    }

    float normal(float mean, float stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = bounded(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::string serialize() const;
    static Pcg32 deserialize(const std::string& text);

    bool operator==(const Pcg32& other) const {
        return state_ == other.state_ && inc_ == other.inc_;
    }

private:
    uint64_t state_ = 0;
    uint64_t inc_ = 0;
};

}  // namespace nvgan
