#include "treeverify/clique_engine.hpp"

#include "box_join.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <stdexcept>

namespace treeverify {

namespace {

double member_sum(const LeafValueTable& values, std::size_t first_tree, const std::vector<NodeId>& members)
{
    double sum = values.value(first_tree, members[0]);
    for (std::size_t i = 1; i < members.size(); ++i)
        sum += values.value(first_tree + i, members[i]);
    return sum;
}

double max_value(const CliqueSet& part)
{
    double best = -kInfinity;
    for (const auto& n : part.nodes)
        best = std::max(best, n.value);
    return best;
}

detail::DenseBoxes dense(const CliqueSet& part, int dim)
{
    detail::DenseBoxes out(dim, part.size());
    for (const auto& n : part.nodes)
        out.push_back(n.box);
    return out;
}

int part_dim(const CliqueSet& a, const CliqueSet& b)
{
    const int dim = a.nodes.front().box.dim();
    if (b.nodes.front().box.dim() != dim)
        throw InvalidInput("parts have different dimensions");
    return dim;
}

// Intersecting pairs of two adjacent parts, in left-major order.
std::optional<CliqueSet> merge_pair(const CliqueSet& left, const CliqueSet& right, std::optional<std::size_t> cap)
{
    if (left.first_tree + left.tree_count != right.first_tree)
        throw InvalidInput("clique_enum parts must cover consecutive trees");
    CliqueSet out;
    out.first_tree = left.first_tree;
    out.tree_count = left.tree_count + right.tree_count;
    out.values = left.values;
    if (left.empty() || right.empty())
        return out;

    const int dim = part_dim(left, right);
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    const bool complete = detail::for_each_intersecting_pair(
        dense(left, dim), dense(right, dim), [&](std::size_t i, std::size_t j) {
            pairs.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
            return !cap || pairs.size() <= *cap;
        });
    if (!complete)
        return std::nullopt;
    std::sort(pairs.begin(), pairs.end());

    out.nodes.reserve(pairs.size());
    for (const auto& [i, j] : pairs) {
        const auto& a = left.nodes[i];
        const auto& b = right.nodes[j];
        PseudoNode node;
        node.members.reserve(a.members.size() + b.members.size());
        node.members.insert(node.members.end(), a.members.begin(), a.members.end());
        node.members.insert(node.members.end(), b.members.begin(), b.members.end());
        node.box = *intersect(a.box, b.box);
        node.value = member_sum(*out.values, out.first_tree, node.members);
        out.nodes.push_back(std::move(node));
    }
    return out;
}

std::optional<CliqueSet> fold(std::span<const CliqueSet> parts, std::optional<std::size_t> cap)
{
    if (parts.empty())
        throw InvalidInput("clique_enum needs at least one part");
    CliqueSet acc = parts.front();
    for (std::size_t k = 1; k < parts.size(); ++k) {
        auto merged = merge_pair(acc, parts[k], cap);
        if (!merged)
            return std::nullopt;
        acc = std::move(*merged);
    }
    return acc;
}

struct PartSummary {
    std::size_t count = 0;
    double best = -kInfinity;
};

// clique_enum followed by max_value without materializing the final merge.
std::optional<PartSummary> fold_summary(std::span<const CliqueSet> parts, std::optional<std::size_t> cap)
{
    if (parts.size() == 1)
        return PartSummary{parts[0].size(), max_value(parts[0])};
    auto left = fold(parts.first(parts.size() - 1), cap);
    if (!left)
        return std::nullopt;
    const CliqueSet& right = parts.back();
    if (left->first_tree + left->tree_count != right.first_tree)
        throw InvalidInput("clique_enum parts must cover consecutive trees");
    PartSummary out;
    if (left->empty() || right.empty())
        return out;

    const int dim = part_dim(*left, right);
    const LeafValueTable& values = *left->values;
    const std::size_t right_first = right.first_tree;
    const bool complete = detail::for_each_intersecting_pair(
        dense(*left, dim), dense(right, dim), [&](std::size_t i, std::size_t j) {
            ++out.count;
            if (cap && out.count > *cap)
                return false;
            const auto& a = left->nodes[i].members;
            const auto& b = right.nodes[j].members;
            double sum = values.value(left->first_tree, a[0]);
            for (std::size_t k = 1; k < a.size(); ++k)
                sum += values.value(left->first_tree + k, a[k]);
            for (std::size_t k = 0; k < b.size(); ++k)
                sum += values.value(right_first + k, b[k]);
            out.best = std::max(out.best, sum);
            return true;
        });
    if (!complete)
        return std::nullopt;
    return out;
}

}  // namespace

EnsembleLeaves index_leaves(const Ensemble& ensemble)
{
    EnsembleLeaves out;
    out.dim = ensemble.dim;
    auto values = std::make_shared<LeafValueTable>();
    for (const auto& tree : ensemble.trees) {
        out.trees.push_back(compute_leaf_boxes(tree, ensemble.dim));
        std::vector<double> by_node(tree.nodes.size(), 0.0);
        for (std::size_t i = 0; i < tree.nodes.size(); ++i)
            by_node[i] = tree.nodes[i].value;
        values->by_tree.push_back(std::move(by_node));
    }
    out.values = std::move(values);
    return out;
}

std::vector<CliqueSet> build_level0(const EnsembleLeaves& leaves, const Box& query_box)
{
    if (query_box.dim() != leaves.dim)
        throw InvalidInput("query box dimension mismatch");
    if (query_box.empty())
        throw InvalidInput("query box is empty");
    std::vector<CliqueSet> parts;
    parts.reserve(leaves.trees.size());
    for (std::size_t k = 0; k < leaves.trees.size(); ++k) {
        CliqueSet part{.first_tree = k, .tree_count = 1, .nodes = {}, .values = leaves.values};
        for (const auto& leaf : leaves.trees[k]) {
            auto clipped = intersect(leaf.box, query_box);
            if (clipped)
                part.nodes.push_back({{leaf.leaf}, std::move(*clipped), leaf.value});
        }
        if (part.empty())
            throw std::logic_error("tree " + std::to_string(k) + " has no leaf inside the query box");
        parts.push_back(std::move(part));
    }
    return parts;
}

std::vector<CliqueSet> build_level0_ball(const EnsembleLeaves& leaves, std::span<const double> x, double eps)
{
    if (x.size() != static_cast<std::size_t>(leaves.dim))
        throw InvalidInput("point dimension mismatch");
    if (!(eps >= 0.0))
        throw InvalidInput("eps must be nonnegative");

    std::vector<Constraint> ball;
    ball.reserve(x.size());
    for (std::size_t t = 0; t < x.size(); ++t)
        ball.push_back({static_cast<FeatureIndex>(t),
                        {std::nextafter(x[t] - eps, -kInfinity), std::nextafter(x[t] + eps, kInfinity)}});
    const Box ball_box(leaves.dim, std::move(ball));

    std::vector<CliqueSet> parts;
    parts.reserve(leaves.trees.size());
    for (std::size_t k = 0; k < leaves.trees.size(); ++k) {
        CliqueSet part{.first_tree = k, .tree_count = 1, .nodes = {}, .values = leaves.values};
        for (const auto& leaf : leaves.trees[k]) {
            if (!box_intersects_ball(x, eps, leaf.box))
                continue;
            auto clipped = intersect(leaf.box, ball_box);
            part.nodes.push_back({{leaf.leaf}, clipped ? std::move(*clipped) : leaf.box, leaf.value});
        }
        if (part.empty())
            throw std::logic_error("tree " + std::to_string(k) + " has no leaf near the query point");
        parts.push_back(std::move(part));
    }
    return parts;
}

CliqueSet clique_enum(std::span<const CliqueSet> parts)
{
    return *fold(parts, std::nullopt);
}

std::optional<CliqueSet> clique_enum_capped(std::span<const CliqueSet> parts, std::size_t cap)
{
    return fold(parts, cap);
}

std::string_view to_string(BoundMethod method)
{
    switch (method) {
    case BoundMethod::naive:
        return "naive";
    case BoundMethod::dp:
        return "dp";
    case BoundMethod::exact:
        return "exact";
    }
    return "unknown";
}

int max_levels(std::size_t parts, int group_size)
{
    if (group_size < 2)
        throw InvalidInput("group size T must be at least 2");
    int levels = 0;
    for (std::size_t remaining = parts; remaining > 1; ++levels)
        remaining = (remaining + static_cast<std::size_t>(group_size) - 1) / static_cast<std::size_t>(group_size);
    return levels;
}

double bound_naive(std::span<const CliqueSet> parts)
{
    if (parts.empty())
        return -kInfinity;
    double sum = max_value(parts[0]);
    for (std::size_t k = 1; k < parts.size(); ++k)
        sum += max_value(parts[k]);
    return std::isnan(sum) ? -kInfinity : sum;
}

double bound_dp(std::span<const CliqueSet> parts)
{
    if (parts.empty())
        return -kInfinity;
    std::vector<double> prev;
    prev.reserve(parts[0].size());
    for (const auto& n : parts[0].nodes)
        prev.push_back(n.value);

    for (std::size_t k = 1; k < parts.size(); ++k) {
        std::vector<double> reach(parts[k].size(), -kInfinity);
        if (!parts[k - 1].empty() && !parts[k].empty()) {
            const int dim = part_dim(parts[k - 1], parts[k]);
            detail::for_each_intersecting_pair(dense(parts[k - 1], dim), dense(parts[k], dim),
                                               [&](std::size_t j, std::size_t i) {
                                                   reach[i] = std::max(reach[i], prev[j]);
                                                   return true;
                                               });
        }
        for (std::size_t i = 0; i < reach.size(); ++i)
            if (reach[i] != -kInfinity)
                reach[i] += parts[k].nodes[i].value;
        prev = std::move(reach);
    }
    double best = -kInfinity;
    for (double d : prev)
        best = std::max(best, d);
    return best;
}

BoundResult multi_level_bound(std::vector<CliqueSet> parts, const MultiLevelOptions& options)
{
    if (parts.empty())
        throw InvalidInput("multi_level_bound needs at least one part");
    if (options.method == BoundMethod::exact)
        throw InvalidInput("single-level bound method must be naive or dp");
    const int top = max_levels(parts.size(), options.group_size);
    if (options.levels < 0 || options.levels > top)
        throw InvalidInput("levels L=" + std::to_string(options.levels) + " outside [0, " + std::to_string(top) +
                           "] for " + std::to_string(parts.size()) + " parts and T=" +
                           std::to_string(options.group_size));

    BoundResult result;
    const auto T = static_cast<std::size_t>(options.group_size);
    for (int level = 1; level <= options.levels; ++level) {
        const std::size_t groups = (parts.size() + T - 1) / T;
        auto group_at = [&](std::size_t g) {
            const std::size_t start = g * T;
            return std::span<const CliqueSet>(parts.data() + start, std::min(T, parts.size() - start));
        };

        // The last level only feeds max_value or bound_naive, so its nodes
        // need not be built.
        if (level == options.levels && (groups == 1 || options.method == BoundMethod::naive)) {
            std::vector<PartSummary> summaries;
            for (std::size_t g = 0; g < groups; ++g) {
                auto summary = fold_summary(group_at(g), options.cap);
                if (!summary)
                    break;
                summaries.push_back(*summary);
            }
            if (summaries.size() < groups) {
                result.capped = true;
                break;
            }
            result.levels_completed = level;
            result.method = groups == 1 ? BoundMethod::exact : BoundMethod::naive;
            double sum = summaries[0].best;
            result.nodes_at_final_level = summaries[0].count;
            for (std::size_t g = 1; g < groups; ++g) {
                sum += summaries[g].best;
                result.nodes_at_final_level += summaries[g].count;
            }
            result.upper_bound = std::isnan(sum) ? -kInfinity : sum;
            return result;
        }

        std::vector<CliqueSet> next;
        next.reserve(groups);
        bool capped = false;
        for (std::size_t g = 0; g < groups; ++g) {
            auto merged = options.cap ? clique_enum_capped(group_at(g), *options.cap)
                                      : std::optional(clique_enum(group_at(g)));
            if (!merged) {
                capped = true;
                break;
            }
            next.push_back(std::move(*merged));
        }
        if (capped) {
            result.capped = true;
            break;
        }
        parts = std::move(next);
        result.levels_completed = level;
        if (std::any_of(parts.begin(), parts.end(), [](const CliqueSet& p) { return p.empty(); }))
            break;
    }

    for (const auto& p : parts)
        result.nodes_at_final_level += p.size();

    if (parts.size() == 1) {
        result.method = BoundMethod::exact;
        result.upper_bound = max_value(parts[0]);
    } else if (options.method == BoundMethod::dp) {
        result.method = BoundMethod::dp;
        result.upper_bound = bound_dp(parts);
    } else {
        result.method = BoundMethod::naive;
        result.upper_bound = bound_naive(parts);
    }
    return result;
}

}  // namespace treeverify
