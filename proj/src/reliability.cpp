#include "probdet/reliability.hpp"

#include "probdet/error.hpp"

#include <array>

namespace probdet {

ReliabilityResult krippendorff_alpha(const ReliabilityTable& table) {
    std::array<std::int64_t, 2> marginals{0, 0};
    std::int64_t n = 0;
    double do_sum = 0.0;

    for (const auto& [unit_id, ratings] : table.units) {
        if (ratings.empty()) throw Error("reliability unit '" + unit_id + "' has no ratings");
        const auto m = static_cast<std::int64_t>(ratings.size());
        if (m < 2) continue;  // single ratings are unpairable
        std::array<std::int64_t, 2> unit_counts{0, 0};
        for (const auto& [rater, value] : ratings) {
            if (value != 0 && value != 1) throw Error("reliability values must be 0 or 1");
            unit_counts[static_cast<std::size_t>(value)] += 1;
        }
        n += m;
        marginals[0] += unit_counts[0];
        marginals[1] += unit_counts[1];
        // sum over ordered pairs of distinct values: n_u0*n_u1 + n_u1*n_u0
        do_sum += 2.0 * static_cast<double>(unit_counts[0]) *
                  static_cast<double>(unit_counts[1]) / static_cast<double>(m - 1);
    }

    if (n == 0) throw Error("insufficient pairs: no unit has two or more ratings");

    ReliabilityResult result;
    result.pairable_values = n;
    result.observed_disagreement = do_sum / static_cast<double>(n);
    result.expected_disagreement = 2.0 * static_cast<double>(marginals[0]) *
                                   static_cast<double>(marginals[1]) /
                                   (static_cast<double>(n) * static_cast<double>(n - 1));
    if (result.expected_disagreement == 0.0) {
        throw Error("degenerate distribution: all pairable values identical");
    }
    result.alpha = 1.0 - result.observed_disagreement / result.expected_disagreement;
    return result;
}

ReliabilityTable table_from_records(const std::vector<RawTagRecord>& records) {
    ReliabilityTable table;
    for (const auto& rec : records) {
        table.units[rec.comment_id][rec.tagger_id] = rec.tag;
    }
    return table;
}

ReliabilityTable drop_conflicting_units(const ReliabilityTable& table) {
    ReliabilityTable filtered;
    for (const auto& [unit_id, ratings] : table.units) {
        bool unanimous = true;
        int first = ratings.begin()->second;
        for (const auto& [rater, value] : ratings) {
            if (value != first) {
                unanimous = false;
                break;
            }
        }
        if (unanimous) filtered.units.emplace(unit_id, ratings);
    }
    return filtered;
}

}  // namespace probdet
