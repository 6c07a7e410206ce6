#include "treeverify/single_tree.hpp"

#include <algorithm>
#include <cmath>

namespace treeverify {

namespace {

void check_point(std::span<const double> x, int dim)
{
    if (x.size() != static_cast<std::size_t>(dim))
        throw InvalidInput("point has " + std::to_string(x.size()) + " features, model expects " +
                           std::to_string(dim));
}

void collect_leaf_boxes(const Tree& tree, NodeId id, const Box& box, LeafBoxTable& out)
{
    const auto& n = tree.node(id);
    if (n.is_leaf()) {
        out.push_back({id, box, n.value});
        return;
    }
    const Interval current = box.interval(n.feature);
    const Interval left{current.lower, std::min(current.upper, n.threshold)};
    const Interval right{std::max(current.lower, n.threshold), current.upper};
    if (!left.empty())
        collect_leaf_boxes(tree, n.left, box.with_interval(n.feature, left), out);
    if (!right.empty())
        collect_leaf_boxes(tree, n.right, box.with_interval(n.feature, right), out);
}

// Depth-first search with in-place bound mutation; each frame restores the
// one coordinate it tightened before returning.
class LinearSearch {
public:
    LinearSearch(const Tree& tree, std::span<const double> x, const FlipCriterion& criterion)
        : tree_(tree), x_(x), criterion_(criterion), lower_(x.size(), -kInfinity), upper_(x.size(), kInfinity)
    {}

    double run()
    {
        visit(tree_.root, 0.0);
        return best_;
    }

private:
    void visit(NodeId id, double cost)
    {
        const auto& n = tree_.node(id);
        if (n.is_leaf()) {
            if (criterion_.flips(n.value))
                best_ = std::min(best_, cost);
            return;
        }
        if (cost >= best_)
            return;
        const auto t = static_cast<std::size_t>(n.feature);
        const double xt = x_[t];

        const double saved_upper = upper_[t];
        upper_[t] = std::min(upper_[t], n.threshold);
        if (lower_[t] < upper_[t])
            visit(n.left, upper_[t] < xt ? std::max(cost, xt - upper_[t]) : cost);
        upper_[t] = saved_upper;

        const double saved_lower = lower_[t];
        lower_[t] = std::max(lower_[t], n.threshold);
        if (lower_[t] < upper_[t])
            visit(n.right, lower_[t] > xt ? std::max(cost, lower_[t] - xt) : cost);
        lower_[t] = saved_lower;
    }

    const Tree& tree_;
    std::span<const double> x_;
    const FlipCriterion& criterion_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    double best_ = kInfinity;
};

}  // namespace

LeafBoxTable compute_leaf_boxes(const Tree& tree, int dim)
{
    LeafBoxTable out;
    collect_leaf_boxes(tree, tree.root, Box::universal(dim), out);
    return out;
}

double verify_tree_boxes(const LeafBoxTable& table, std::span<const double> x, const FlipCriterion& criterion)
{
    double best = kInfinity;
    for (const auto& leaf : table)
        if (criterion.flips(leaf.value))
            best = std::min(best, linf_distance(x, leaf.box));
    return best;
}

double verify_tree_boxes(const Tree& tree, int dim, std::span<const double> x, const FlipCriterion& criterion)
{
    check_point(x, dim);
    return verify_tree_boxes(compute_leaf_boxes(tree, dim), x, criterion);
}

double verify_tree_linear(const Tree& tree, int dim, std::span<const double> x, const FlipCriterion& criterion)
{
    check_point(x, dim);
    return LinearSearch(tree, x, criterion).run();
}

std::optional<std::vector<double>> find_witness(const Tree& tree, int dim, std::span<const double> x,
                                                const FlipCriterion& criterion)
{
    check_point(x, dim);
    const auto table = compute_leaf_boxes(tree, dim);
    const LeafBox* best = nullptr;
    double best_dist = kInfinity;
    for (const auto& leaf : table) {
        if (!criterion.flips(leaf.value))
            continue;
        const double dist = linf_distance(x, leaf.box);
        if (dist < best_dist) {
            best_dist = dist;
            best = &leaf;
        }
    }
    if (best == nullptr)
        return std::nullopt;

    std::vector<double> witness(x.begin(), x.end());
    for (const auto& c : best->box.constraints()) {
        double& v = witness[static_cast<std::size_t>(c.feature)];
        if (v > c.interval.upper)
            v = c.interval.upper;
        else if (v <= c.interval.lower)
            v = std::nextafter(c.interval.lower, kInfinity);
    }
    return witness;
}

}  // namespace treeverify
