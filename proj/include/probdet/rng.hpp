#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace probdet {

// Every seeded operation in the library draws from this generator.
//
// The engine is std::mt19937_64, whose output sequence is pinned by the
// C++ standard, and all derived quantities (indices, reals, shuffles) are
// computed here from raw 64-bit draws. std::uniform_int_distribution and
// friends are implementation-defined and must not be used anywhere results
// need to reproduce across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, n) via rejection sampling. n must be > 0.
    std::uint64_t below(std::uint64_t n);

    // Real in [0, 1) with 53 bits of precision.
    double unit_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit_real(); }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(values[i - 1], values[j]);
        }
    }

    // k distinct indices drawn uniformly from [0, n), returned sorted
    // ascending (partial Fisher-Yates selection).
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

private:
    std::mt19937_64 engine_;
};

// Independent child stream for (seed, stream_index), e.g. one stream per
// forest tree. SplitMix64 finalizer over the combined words, so streams are
// decorrelated and the mapping is platform-independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace probdet
