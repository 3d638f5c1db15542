#pragma once

#include <cstdint>

namespace derm {

// Counter-based generator (splitmix64). Identical seeds give identical draw
// sequences on every platform, and split() derives an independent stream per
// work item so parallel augmentation stays deterministic.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1); exactly lo when lo == hi in uniform().
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n); n must be > 0.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Independent child stream for work item `index`.
    SeededRng split(std::uint64_t index) const {
        SeededRng mixer(state_ ^ (0x632BE59BD9B4E019ull * (index + 1)));
        mixer.next_u64();
        return SeededRng(mixer.next_u64());
    }

private:
    std::uint64_t state_;
};

}  // namespace derm
