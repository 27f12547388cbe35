#include "probdet/sparse.hpp"

#include "probdet/error.hpp"

#include <algorithm>
#include <cmath>

namespace probdet {

void SparseVector::push(std::int32_t index, double value) {
    if (index < 0 || index >= dim) throw Error("SparseVector index out of range");
    if (!entries.empty() && entries.back().first >= index) {
        throw Error("SparseVector indices must be strictly increasing");
    }
    if (!std::isfinite(value)) throw Error("SparseVector values must be finite");
    entries.emplace_back(index, value);
}

double SparseVector::value_at(std::int32_t index) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), index,
                               [](const auto& e, std::int32_t i) { return e.first < i; });
    if (it != entries.end() && it->first == index) return it->second;
    return 0.0;
}

double SparseVector::dot_dense(const std::vector<double>& dense) const {
    double acc = 0.0;
    for (const auto& [i, v] : entries) acc += v * dense[static_cast<std::size_t>(i)];
    return acc;
}

double SparseVector::squared_norm() const {
    double acc = 0.0;
    for (const auto& [i, v] : entries) acc += v * v;
    return acc;
}

double SparseVector::l2_norm() const { return std::sqrt(squared_norm()); }

}  // namespace probdet
