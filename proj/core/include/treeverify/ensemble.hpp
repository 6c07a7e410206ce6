#pragma once

#include "treeverify/geometry.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treeverify {

using NodeId = std::int32_t;

inline constexpr NodeId kNoNode = -1;

class ParseError : public std::runtime_error {
public:
    ParseError(std::string location, const std::string& message)
        : std::runtime_error(location.empty() ? message : location + ": " + message),
          location_(std::move(location))
    {}

    [[nodiscard]] const std::string& location() const { return location_; }

private:
    std::string location_;
};

/// Internal nodes route x left iff x[feature] <= threshold.
struct TreeNode {
    FeatureIndex feature = -1;
    double threshold = 0.0;
    NodeId left = kNoNode;
    NodeId right = kNoNode;
    double value = 0.0;

    [[nodiscard]] bool is_leaf() const { return left == kNoNode; }

    static TreeNode leaf(double value) { return {.value = value}; }
    static TreeNode split(FeatureIndex feature, double threshold, NodeId left, NodeId right)
    {
        return {.feature = feature, .threshold = threshold, .left = left, .right = right};
    }

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Node arena; node ids are indices into `nodes`.
struct Tree {
    std::vector<TreeNode> nodes;
    NodeId root = 0;

    [[nodiscard]] const TreeNode& node(NodeId id) const { return nodes.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] std::size_t leaf_count() const;
    /// Leaf ids in depth-first, left-before-right order.
    [[nodiscard]] std::vector<NodeId> leaves() const;

    /// Throws InvalidInput unless the nodes reachable from root form a tree
    /// whose splits use features < dim.
    void validate(int dim) const;

    friend bool operator==(const Tree&, const Tree&) = default;
};

struct Ensemble {
    std::vector<Tree> trees;
    int dim = 0;
    int num_classes = 2;              ///< 2 means binary.
    std::vector<int> class_of_tree;   ///< One entry per tree; all 0 for binary.
    double base_margin = 0.0;

    [[nodiscard]] bool is_binary() const { return num_classes == 2; }

    /// Binary margin: sum of routed leaf values plus base_margin, summed in tree order.
    [[nodiscard]] double margin(std::span<const double> x) const;
    /// Per-class score for multiclass ensembles (base_margin added to each).
    [[nodiscard]] std::vector<double> class_scores(std::span<const double> x) const;
    /// 0/1 for binary (1 iff margin > 0), argmax class otherwise (first wins ties).
    [[nodiscard]] int predict(std::span<const double> x) const;

    void validate() const;

    friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

[[nodiscard]] NodeId route(const Tree& tree, std::span<const double> x);

struct XgboostOptions {
    std::optional<int> dim;   ///< Inferred as max feature + 1 when absent.
    int num_classes = 2;      ///< Trees are assigned to classes round-robin.
    double base_margin = 0.0;
};

/// XGBoost JSON dump (array of trees). Leaf values are rounded to float32 as
/// XGBoost stores them. A split "float32(x) < t" becomes "x <= threshold" with
/// threshold the largest double for which both agree, so routing matches
/// XGBoost on every input.
[[nodiscard]] Ensemble parse_xgboost_json(std::string_view text, const XgboostOptions& options = {});

[[nodiscard]] Ensemble parse_native_json(std::string_view text);
[[nodiscard]] std::string emit_native_json(const Ensemble& ensemble);

/// Routing convention recorded in reports.
inline constexpr std::string_view kRoutingConvention =
    "left iff x[feature] <= threshold; XGBoost splits (left iff float32(x) < t) are stored as the largest "
    "double threshold with the same decision";

/// Binary ensemble whose margin is score_c - score_target: class-c trees as
/// is, class-target trees with negated leaves.
[[nodiscard]] Ensemble extract_binary_pair(const Ensemble& ensemble, int true_class, int target_class);

/// Every leaf value and the base margin negated.
[[nodiscard]] Ensemble negated(const Ensemble& ensemble);

}  // namespace treeverify
