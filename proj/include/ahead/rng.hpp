#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace ahead {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based stream: output i is a hash of (key, i), where the key mixes
/// the run seed with a path id and a substream tag. Streams for distinct
/// (seed, path, tag) triples are independent of evaluation order, which is
/// what makes Monte Carlo results independent of the worker count.
class StreamRng {
public:
    using result_type = std::uint64_t;

    StreamRng(std::uint64_t seed, std::uint64_t path, std::uint64_t tag = 0)
        : key_(splitmix64(splitmix64(seed) ^ splitmix64(path + 0x632BE59BD9B4E019ULL) ^
                          splitmix64(tag * 0xD1342543DE82EF95ULL + 1))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * counter_++); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open0() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_open0()) / rate; }

    /// Standard normal via Box-Muller; always consumes two outputs.
    double normal() {
        const double u1 = uniform_open0();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace ahead
