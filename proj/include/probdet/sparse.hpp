#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace probdet {

// Sparse feature vector: (index, value) pairs with strictly increasing
// indices, all below dim. Absent indices are exact zeros.
struct SparseVector {
    std::vector<std::pair<std::int32_t, double>> entries;
    std::int32_t dim = 0;

    // Appends an entry; index must exceed the last stored index.
    void push(std::int32_t index, double value);

    double value_at(std::int32_t index) const;
    double dot_dense(const std::vector<double>& dense) const;
    double squared_norm() const;
    double l2_norm() const;
    bool empty() const { return entries.empty(); }
};

}  // namespace probdet
