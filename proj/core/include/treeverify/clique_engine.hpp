#pragma once

// K-partite boxicity graph over tree leaves, K-clique enumeration by
// successive pairwise merging, and the anytime multi-level upper bound on
// the largest leaf-value sum of a valid leaf tuple.
//
// Each tree contributes one part. A vertex is a leaf (or, after merging, a
// clique of leaves from consecutive trees collapsed into a "pseudo node")
// carrying its box and summed value. Two vertices are adjacent iff their
// boxes intersect, and since pairwise intersection of boxes implies a common
// point, a clique across all parts is exactly a leaf tuple some input reaches.

#include "treeverify/ensemble.hpp"
#include "treeverify/geometry.hpp"
#include "treeverify/single_tree.hpp"

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace treeverify {

/// Leaf values indexed by [tree][node id]; shared by every part of one graph
/// so pseudo-node values can be re-summed in tree order.
struct LeafValueTable {
    std::vector<std::vector<double>> by_tree;

    [[nodiscard]] double value(std::size_t tree, NodeId leaf) const
    {
        return by_tree[tree][static_cast<std::size_t>(leaf)];
    }
};

/// Per-tree leaf boxes of an ensemble, computed once and reused per query.
struct EnsembleLeaves {
    int dim = 0;
    std::vector<LeafBoxTable> trees;
    std::shared_ptr<const LeafValueTable> values;
};

[[nodiscard]] EnsembleLeaves index_leaves(const Ensemble& ensemble);

struct PseudoNode {
    /// One leaf id per spanned tree, in tree order.
    std::vector<NodeId> members;
    Box box;
    /// Sum of member leaf values, accumulated left to right in tree order.
    double value = 0.0;
};

/// One part of the (pseudo-)graph: pseudo nodes spanning trees
/// [first_tree, first_tree + tree_count).
struct CliqueSet {
    std::size_t first_tree = 0;
    std::size_t tree_count = 1;
    std::vector<PseudoNode> nodes;
    std::shared_ptr<const LeafValueTable> values;

    [[nodiscard]] bool empty() const { return nodes.empty(); }
    [[nodiscard]] std::size_t size() const { return nodes.size(); }
};

/// Level-0 parts: for every tree, the leaves whose box meets `query_box`,
/// clipped to it. Throws std::logic_error if some tree keeps no leaf.
[[nodiscard]] std::vector<CliqueSet> build_level0(const EnsembleLeaves& leaves, const Box& query_box);

/// Level-0 parts for the closed l-infinity ball: leaves at infimum distance
/// <= eps from x are kept and clipped to the ball.
[[nodiscard]] std::vector<CliqueSet> build_level0_ball(const EnsembleLeaves& leaves, std::span<const double> x,
                                                       double eps);

/// All cliques spanning every given part (which must cover consecutive trees),
/// as one part. Fold order is left to right.
[[nodiscard]] CliqueSet clique_enum(std::span<const CliqueSet> parts);

/// As clique_enum, but gives up (nullopt) once an intermediate or final
/// result would hold more than `cap` pseudo nodes.
[[nodiscard]] std::optional<CliqueSet> clique_enum_capped(std::span<const CliqueSet> parts, std::size_t cap);

enum class BoundMethod { naive, dp, exact };

[[nodiscard]] std::string_view to_string(BoundMethod method);

struct BoundResult {
    double upper_bound = -kInfinity;
    BoundMethod method = BoundMethod::naive;
    int levels_completed = 0;
    std::size_t nodes_at_final_level = 0;
    bool capped = false;
};

struct MultiLevelOptions {
    int group_size = 2;       ///< T: parts merged per group.
    int levels = 1;           ///< L: merge rounds, at most ceil(log_T K).
    std::optional<std::size_t> cap = std::size_t{1'000'000};
    BoundMethod method = BoundMethod::naive;  ///< naive or dp
};

/// ceil(log_T K): merge rounds needed to reduce K parts to one.
[[nodiscard]] int max_levels(std::size_t parts, int group_size);

/// Anytime upper bound on the best clique value. Throws InvalidInput on a
/// bad group size, level count or method.
[[nodiscard]] BoundResult multi_level_bound(std::vector<CliqueSet> parts, const MultiLevelOptions& options);

/// Sum over parts of the largest node value; -inf if a part is empty.
[[nodiscard]] double bound_naive(std::span<const CliqueSet> parts);

/// Best path value through consecutive parts using only consecutive-part
/// edges; -inf if the last part is unreachable.
[[nodiscard]] double bound_dp(std::span<const CliqueSet> parts);

}  // namespace treeverify
