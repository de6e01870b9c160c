#pragma once

#include <cstdint>
#include <random>

namespace firmgrowth {

// One master seed plus a stream index fully determines every draw.
// Streams with distinct indices are seeded through splitmix64 so that
// their engine states are decorrelated.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t master_seed, std::uint64_t stream_index = 0)
        : engine_(mix_seed(master_seed, stream_index)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in (0,1).
    double uniform() {
        // 53-bit mantissa; offset by half an ulp so 0 is never returned
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_(engine_); }

    double normal(double mean, double stddev) { return mean + stddev * normal_(engine_); }

    double lognormal(double log_mean, double log_sd) {
        return std::exp(log_mean + log_sd * normal_(engine_));
    }

    /// Uniform index in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::uint64_t splitmix64(std::uint64_t& state) {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::seed_seq make_seq(std::uint64_t master, std::uint64_t stream) {
        std::uint64_t s = master ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
        std::uint32_t words[8];
        for (int i = 0; i < 4; ++i) {
            std::uint64_t v = splitmix64(s);
            words[2 * i] = static_cast<std::uint32_t>(v);
            words[2 * i + 1] = static_cast<std::uint32_t>(v >> 32);
        }
        return std::seed_seq(words, words + 8);
    }

    static std::mt19937_64 mix_seed(std::uint64_t master, std::uint64_t stream) {
        auto seq = make_seq(master, stream);
        return std::mt19937_64(seq);
    }

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace firmgrowth
