#pragma once

#include "probdet/corpus.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace probdet {

// Ratings grouped by unit (comment) and rater; values are nominal {0,1}.
// Missing ratings are simply absent entries.
struct ReliabilityTable {
    std::map<std::string, std::map<std::string, int>> units;
};

struct ReliabilityResult {
    double alpha = 0.0;
    double observed_disagreement = 0.0;  // Do
    double expected_disagreement = 0.0;  // De
    std::int64_t pairable_values = 0;    // n = sum of m_u over units with m_u >= 2
};

// Krippendorff's alpha for nominal data via the coincidence formulation.
// Units with a single rating contribute nothing. With n_uc = count of value
// c in unit u and m_u ratings in unit u:
//   n  = sum_u m_u                        (units with m_u >= 2 only)
//   Do = (1/n) sum_u sum_{c != k} n_uc * n_uk / (m_u - 1)
//   De = (1/(n(n-1))) sum_{c != k} n_c * n_k
//   alpha = 1 - Do/De
ReliabilityResult krippendorff_alpha(const ReliabilityTable& table);

ReliabilityTable table_from_records(const std::vector<RawTagRecord>& records);

// Removes units whose raters disagree; mirrors the curation step that
// raises alpha to 1 on the remaining data.
ReliabilityTable drop_conflicting_units(const ReliabilityTable& table);

}  // namespace probdet
