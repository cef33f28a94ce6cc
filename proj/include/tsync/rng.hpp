#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tsync
{
    __extension__ using uint128 = unsigned __int128;

    /// SplitMix64 finalizer (Steele, Lea, Flood 2014). Used only to derive
    /// stream seeds, never as the sampling generator.
    inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
    {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    /// Seed for trajectory `index` of an ensemble with master seed `master`:
    ///   splitmix64(splitmix64(master) ^ splitmix64(index + golden))
    /// Distinct indices give unrelated streams; the map is fixed forever so
    /// ensembles are reproducible across machines and thread counts.
    inline constexpr std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) noexcept
    {
        return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632BE59BD9B4E019ULL));
    }

    /// Random stream for one trajectory: std::mt19937_64 seeded through
    /// std::seed_seq with the four 32-bit halves of two derived words.
    ///
    /// All variates are produced by explicit bit conversions below rather
    /// than the <random> distributions, whose algorithms are unspecified by
    /// the standard; a given seed yields the same draws on every platform.
    class Stream
    {
    public:
        explicit Stream(std::uint64_t seed) : engine_(make_engine(seed)) {}

        Stream(std::uint64_t master, std::uint64_t index) : Stream(stream_seed(master, index)) {}

        std::uint64_t next_u64() { return engine_(); }

        /// Uniform on the open interval (0, 1), 52-bit resolution.
        double uniform_open()
        {
            return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
        }

        /// Uniform on [0, 1), 53-bit resolution.
        double uniform()
        {
            return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        }

        /// Strictly positive exponential variate with the given mean.
        double exponential(double mean) { return -mean * std::log(uniform_open()); }

        /// Uniform integer in [0, bound), bound > 0. Lemire's multiply-shift
        /// with rejection, so the result is exactly uniform.
        std::uint64_t below(std::uint64_t bound)
        {
            std::uint64_t x = engine_();
            uint128 m = static_cast<uint128>(x) * bound;
            auto low = static_cast<std::uint64_t>(m);
            if (low < bound)
            {
                const std::uint64_t threshold = (0 - bound) % bound;
                while (low < threshold)
                {
                    x = engine_();
                    m = static_cast<uint128>(x) * bound;
                    low = static_cast<std::uint64_t>(m);
                }
            }
            return static_cast<std::uint64_t>(m >> 64);
        }

        /// Standard normal via Box-Muller (one of the pair is discarded).
        double normal()
        {
            const double u1 = uniform_open();
            const double u2 = uniform();
            return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
        }

    private:
        static std::mt19937_64 make_engine(std::uint64_t seed)
        {
            const std::uint64_t a = splitmix64(seed);
            const std::uint64_t b = splitmix64(a);
            std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                              static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
            return std::mt19937_64(seq);
        }

        std::mt19937_64 engine_;
    };
} // namespace tsync
