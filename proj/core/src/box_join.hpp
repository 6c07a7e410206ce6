#pragma once

// Intersecting-pair enumeration between two box sets.

#include "treeverify/geometry.hpp"

#include <cstddef>
#include <functional>
#include <vector>

namespace treeverify::detail {

/// Boxes as dense row-major bound arrays.
class DenseBoxes {
public:
    DenseBoxes(int dim, std::size_t reserve = 0);

    void push_back(const Box& box);

    [[nodiscard]] std::size_t size() const { return count_; }
    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] double lower(std::size_t i, int f) const { return lower_[i * stride() + static_cast<std::size_t>(f)]; }
    [[nodiscard]] double upper(std::size_t i, int f) const { return upper_[i * stride() + static_cast<std::size_t>(f)]; }

private:
    [[nodiscard]] std::size_t stride() const { return static_cast<std::size_t>(dim_); }

    int dim_;
    std::size_t count_ = 0;
    std::vector<double> lower_;
    std::vector<double> upper_;
};

/// Calls visit(i, j) once for every i in a, j in b whose boxes intersect,
/// in unspecified order. Stops early when visit returns false; the return
/// value says whether the enumeration ran to completion.
bool for_each_intersecting_pair(const DenseBoxes& a, const DenseBoxes& b,
                                const std::function<bool(std::size_t, std::size_t)>& visit);

}  // namespace treeverify::detail
