#include "probdet/reliability.hpp"

#include "probdet/error.hpp"
#include "probdet/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <optional>
#include <vector>

using namespace probdet;

namespace {

// Independent oracle: enumerate every ordered pair of ratings inside each
// unit with weight 1/(m_u - 1); expected disagreement from ordered pairs of
// the pooled values.
std::optional<double> alpha_by_pair_enumeration(const ReliabilityTable& table) {
    std::vector<std::vector<int>> units;
    for (const auto& [unit_id, ratings] : table.units) {
        if (ratings.size() < 2) continue;
        std::vector<int> values;
        for (const auto& [rater, value] : ratings) values.push_back(value);
        units.push_back(std::move(values));
    }
    if (units.empty()) return std::nullopt;

    double n = 0.0;
    double disagreeing_weighted = 0.0;
    std::vector<int> pooled;
    for (const auto& values : units) {
        const auto m = static_cast<double>(values.size());
        n += m;
        for (std::size_t a = 0; a < values.size(); ++a) {
            for (std::size_t b = 0; b < values.size(); ++b) {
                if (a == b) continue;
                if (values[a] != values[b]) disagreeing_weighted += 1.0 / (m - 1.0);
            }
        }
        pooled.insert(pooled.end(), values.begin(), values.end());
    }
    double d_observed = disagreeing_weighted / n;

    double disagreeing_global = 0.0;
    for (std::size_t a = 0; a < pooled.size(); ++a) {
        for (std::size_t b = 0; b < pooled.size(); ++b) {
            if (a != b && pooled[a] != pooled[b]) disagreeing_global += 1.0;
        }
    }
    double d_expected = disagreeing_global / (n * (n - 1.0));
    if (d_expected == 0.0) return std::nullopt;
    return 1.0 - d_observed / d_expected;
}

ReliabilityTable make_table(const std::vector<std::vector<int>>& units) {
    ReliabilityTable table;
    for (std::size_t u = 0; u < units.size(); ++u) {
        for (std::size_t r = 0; r < units[u].size(); ++r) {
            table.units["u" + std::to_string(u)]["r" + std::to_string(r)] = units[u][r];
        }
    }
    return table;
}

ReliabilityTable random_table(Rng& rng) {
    ReliabilityTable table;
    const auto n_units = 2 + rng.below(9);   // up to 10 units
    const auto n_raters = 2 + rng.below(3);  // up to 4 raters
    for (std::uint64_t u = 0; u < n_units; ++u) {
        for (std::uint64_t r = 0; r < n_raters; ++r) {
            if (rng.unit_real() < 0.3) continue;  // missing rating
            table.units["unit" + std::to_string(u)]["rater" + std::to_string(r)] =
                static_cast<int>(rng.below(2));
        }
    }
    // drop empty units the sparse sampling may have produced
    for (auto it = table.units.begin(); it != table.units.end();) {
        it = it->second.empty() ? table.units.erase(it) : std::next(it);
    }
    return table;
}

}  // namespace

TEST_CASE("alpha on the fixed three-unit example is 4/9") {
    auto table = make_table({{1, 1}, {0, 0}, {1, 0}});
    table.units["single"]["r0"] = 1;  // single ratings are unpairable
    ReliabilityResult r = krippendorff_alpha(table);
    CHECK(r.alpha == doctest::Approx(4.0 / 9.0).epsilon(1e-12));
    CHECK(r.pairable_values == 6);
}

TEST_CASE("full agreement with both values present gives alpha 1") {
    auto table = make_table({{1, 1, 1}, {0, 0}, {1, 1}});
    ReliabilityResult r = krippendorff_alpha(table);
    CHECK(r.alpha == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.observed_disagreement == 0.0);
}

TEST_CASE("systematic disagreement gives alpha -0.5") {
    auto table = make_table({{0, 1}, {1, 0}});
    ReliabilityResult r = krippendorff_alpha(table);
    CHECK(r.alpha == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("no pairable units is an error") {
    ReliabilityTable table;
    table.units["u0"]["r0"] = 1;
    table.units["u1"]["r1"] = 0;
    CHECK_THROWS_WITH_AS(krippendorff_alpha(table),
                         doctest::Contains("insufficient pairs"), Error);
}

TEST_CASE("identical pairable values are a degenerate distribution") {
    auto table = make_table({{1, 1}, {1, 1, 1}});
    CHECK_THROWS_WITH_AS(krippendorff_alpha(table),
                         doctest::Contains("degenerate distribution"), Error);
}

TEST_CASE("alpha matches the pair-enumeration oracle on random tables") {
    Rng rng(20260810);
    int checked = 0;
    while (checked < 200) {
        ReliabilityTable table = random_table(rng);
        auto expected = alpha_by_pair_enumeration(table);
        if (!expected) {
            CHECK_THROWS_AS(krippendorff_alpha(table), Error);
            continue;
        }
        ReliabilityResult r = krippendorff_alpha(table);
        CHECK(std::abs(r.alpha - *expected) < 1e-12);
        ++checked;
    }
}

TEST_CASE("alpha is invariant under unit and rater relabeling") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        ReliabilityTable table = random_table(rng);
        std::optional<double> base;
        try {
            base = krippendorff_alpha(table).alpha;
        } catch (const Error&) {
            continue;
        }
        // relabel ids; std::map iteration order changes with the new names
        ReliabilityTable renamed;
        for (const auto& [unit_id, ratings] : table.units) {
            for (const auto& [rater_id, value] : ratings) {
                renamed.units["zz-" + unit_id + "-x"]["k-" + rater_id] = value;
            }
        }
        CHECK(std::abs(krippendorff_alpha(renamed).alpha - *base) < 1e-12);
    }
}

TEST_CASE("dropping conflicting units raises alpha to exactly 1") {
    auto table = make_table({{1, 1}, {0, 0}, {1, 0}, {0, 1, 1}});
    ReliabilityResult before = krippendorff_alpha(table);
    CHECK(before.alpha < 1.0);
    ReliabilityTable filtered = drop_conflicting_units(table);
    CHECK(filtered.units.size() == 2);
    ReliabilityResult after = krippendorff_alpha(filtered);
    CHECK(after.alpha == 1.0);
}

TEST_CASE("table_from_records groups by comment and rater") {
    std::vector<RawTagRecord> records = {
        {"c1", "s1", "t1", "text", 1},
        {"c1", "s1", "t2", "text", 0},
        {"c2", "s1", "t1", "text", 1},
    };
    ReliabilityTable table = table_from_records(records);
    CHECK(table.units.size() == 2);
    CHECK(table.units.at("c1").size() == 2);
    CHECK(table.units.at("c1").at("t2") == 0);
}
