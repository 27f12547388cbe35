#include "probdet/rng.hpp"

#include "probdet/error.hpp"

#include <algorithm>
#include <numeric>

namespace probdet {

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below requires n > 0");
    // Reject draws from the incomplete top interval so every residue is
    // equally likely.
    const std::uint64_t limit = (0 - n) % n;  // 2^64 mod n
    std::uint64_t x = next_u64();
    while (x < limit) x = next_u64();
    return x % n;
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t k) {
    if (k > n) throw Error("Rng::sample_indices: k exceeds population size");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace probdet
