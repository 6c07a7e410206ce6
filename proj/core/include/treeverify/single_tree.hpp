#pragma once

// Exact l-infinity verification of a single decision tree.

#include "treeverify/ensemble.hpp"
#include "treeverify/geometry.hpp"

#include <optional>
#include <span>
#include <vector>

namespace treeverify {

struct LeafBox {
    NodeId leaf = kNoNode;
    Box box;
    double value = 0.0;
};

/// Leaf records in depth-first, left-before-right order. Leaves whose path
/// constraints are contradictory (an empty box) are dropped.
using LeafBoxTable = std::vector<LeafBox>;

[[nodiscard]] LeafBoxTable compute_leaf_boxes(const Tree& tree, int dim);

/// Which leaf values count as a changed prediction.
///
/// Classification trees compare labels (`v != y0`); regression trees and
/// ensemble members compare signs (`v > 0` vs `v <= 0`).
class FlipCriterion {
public:
    static FlipCriterion label(double y0) { return FlipCriterion(Kind::label, y0); }
    /// Flips are leaves on the other side of 0 from `reference` (v > 0 vs v <= 0).
    static FlipCriterion sign_of(double reference) { return FlipCriterion(Kind::sign, reference > 0.0 ? 1.0 : -1.0); }

    [[nodiscard]] bool flips(double value) const
    {
        if (kind_ == Kind::label)
            return value != reference_;
        return (value > 0.0) != (reference_ > 0.0);
    }

private:
    enum class Kind { label, sign };
    FlipCriterion(Kind kind, double reference) : kind_(kind), reference_(reference) {}

    Kind kind_;
    double reference_;
};

/// min over flipping leaves of the distance from x to the leaf box; +inf if none.
[[nodiscard]] double verify_tree_boxes(const LeafBoxTable& table, std::span<const double> x,
                                       const FlipCriterion& criterion);
[[nodiscard]] double verify_tree_boxes(const Tree& tree, int dim, std::span<const double> x,
                                       const FlipCriterion& criterion);

/// Same result as verify_tree_boxes in one O(n) traversal that carries the
/// running cost and live per-feature bounds.
[[nodiscard]] double verify_tree_linear(const Tree& tree, int dim, std::span<const double> x,
                                        const FlipCriterion& criterion);

/// A concrete input within r* + slack of x (slack from nudging across open
/// lower bounds) that routes to a flipping leaf; nullopt when r* is +inf.
[[nodiscard]] std::optional<std::vector<double>> find_witness(const Tree& tree, int dim, std::span<const double> x,
                                                              const FlipCriterion& criterion);

}  // namespace treeverify
