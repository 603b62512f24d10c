#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>

namespace mont {

// Seeded random stream. The engine (mt19937_64) has a standard-mandated
// output sequence, and every distribution below is computed by hand, so draw
// sequences are identical across standard libraries and platforms.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(mix(seed, stream)) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n); n > 0
    std::uint64_t below(std::uint64_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

    // uniform integer in [lo, hi]
    int between(int lo, int hi) {
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo) + 1));
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller; the second variate is discarded to keep the state simple.
    double normal(double mean, double sigma) {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
        return mean + sigma * z;
    }

    // Fisher-Yates over any random-access range.
    template <typename Range>
    void shuffle(Range& range) {
        const auto n = static_cast<std::uint64_t>(range.size());
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = below(i);
            using std::swap;
            swap(range[i - 1], range[j]);
        }
    }

    // Derive an independent child stream, e.g. one per offspring or per worker.
    RngStream fork(std::uint64_t child) { return RngStream(next_u64(), child); }

private:
    static std::uint64_t splitmix(std::uint64_t& state) {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
        std::uint64_t state = seed;
        const std::uint64_t a = splitmix(state);
        state ^= stream * 0xd1b54a32d192ed03ULL;
        const std::uint64_t b = splitmix(state);
        return a ^ (b << 1);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

} // namespace mont
