#include "probdet/rng.hpp"

#include "probdet/error.hpp"

#include <doctest.h>

#include <numeric>
#include <set>

using namespace probdet;

TEST_CASE("fixed seeds reproduce the full draw sequence") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("below stays in range and covers it") {
    Rng rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        auto v = rng.below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
    CHECK_THROWS_AS(rng.below(0), Error);
}

TEST_CASE("unit_real lies in the half-open unit interval") {
    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        double v = rng.unit_real();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("shuffle permutes and is seed-deterministic") {
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;
    Rng a(4), b(4);
    a.shuffle(v);
    b.shuffle(w);
    CHECK(v == w);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 20; ++i) CHECK(sorted[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("sample_indices draws distinct sorted indices") {
    Rng rng(5);
    auto sample = rng.sample_indices(50, 12);
    CHECK(sample.size() == 12);
    for (std::size_t i = 1; i < sample.size(); ++i) {
        CHECK(sample[i - 1] < sample[i]);
        CHECK(sample[i] < 50);
    }
    CHECK_THROWS_AS(rng.sample_indices(3, 4), Error);
}

TEST_CASE("derived streams differ per index but are stable") {
    CHECK(derive_seed(42, 0) == derive_seed(42, 0));
    CHECK(derive_seed(42, 0) != derive_seed(42, 1));
    CHECK(derive_seed(42, 0) != derive_seed(43, 0));
}
