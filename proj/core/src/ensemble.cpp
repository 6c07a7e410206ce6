#include "treeverify/ensemble.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <charconv>
#include <functional>
#include <unordered_map>

namespace treeverify {

using nlohmann::json;

std::size_t Tree::leaf_count() const
{
    return leaves().size();
}

std::vector<NodeId> Tree::leaves() const
{
    std::vector<NodeId> out;
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const auto& n = node(id);
        if (n.is_leaf()) {
            out.push_back(id);
        } else {
            stack.push_back(n.right);
            stack.push_back(n.left);
        }
    }
    return out;
}

void Tree::validate(int dim) const
{
    const auto n = static_cast<NodeId>(nodes.size());
    if (root < 0 || root >= n)
        throw InvalidInput("root id " + std::to_string(root) + " out of range");
    std::vector<char> seen(nodes.size(), 0);
    std::vector<NodeId> stack{root};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        if (seen[static_cast<std::size_t>(id)])
            throw InvalidInput("node " + std::to_string(id) + " reached twice (not a tree)");
        seen[static_cast<std::size_t>(id)] = 1;
        const auto& nd = nodes[static_cast<std::size_t>(id)];
        if (nd.is_leaf()) {
            if (nd.right != kNoNode)
                throw InvalidInput("node " + std::to_string(id) + " has a right child but no left child");
            continue;
        }
        if (nd.feature < 0 || nd.feature >= dim)
            throw InvalidInput("node " + std::to_string(id) + " uses feature " +
                               std::to_string(nd.feature) + " but dim is " + std::to_string(dim));
        for (NodeId child : {nd.left, nd.right}) {
            if (child < 0 || child >= n)
                throw InvalidInput("node " + std::to_string(id) + " has child id " +
                                   std::to_string(child) + " out of range");
            stack.push_back(child);
        }
    }
}

NodeId route(const Tree& tree, std::span<const double> x)
{
    NodeId id = tree.root;
    for (;;) {
        const auto& n = tree.node(id);
        if (n.is_leaf())
            return id;
        id = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
}

double Ensemble::margin(std::span<const double> x) const
{
    double sum = 0.0;
    for (const auto& t : trees)
        sum += t.node(route(t, x)).value;
    return sum + base_margin;
}

std::vector<double> Ensemble::class_scores(std::span<const double> x) const
{
    std::vector<double> scores(static_cast<std::size_t>(num_classes), 0.0);
    for (std::size_t k = 0; k < trees.size(); ++k)
        scores[static_cast<std::size_t>(class_of_tree[k])] += trees[k].node(route(trees[k], x)).value;
    for (auto& s : scores)
        s += base_margin;
    return scores;
}

int Ensemble::predict(std::span<const double> x) const
{
    if (is_binary())
        return margin(x) > 0.0 ? 1 : 0;
    const auto scores = class_scores(x);
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

void Ensemble::validate() const
{
    if (trees.empty())
        throw InvalidInput("ensemble must contain at least one tree");
    if (dim <= 0)
        throw InvalidInput("ensemble dimension must be positive");
    if (num_classes < 2)
        throw InvalidInput("num_classes must be at least 2");
    if (class_of_tree.size() != trees.size())
        throw InvalidInput("class_of_tree must have one entry per tree");
    for (std::size_t k = 0; k < trees.size(); ++k) {
        const int c = class_of_tree[k];
        if (c < 0 || c >= num_classes || (is_binary() && c != 0))
            throw InvalidInput("tree " + std::to_string(k) + " has invalid class " + std::to_string(c));
        try {
            trees[k].validate(dim);
        } catch (const InvalidInput& e) {
            throw InvalidInput("tree " + std::to_string(k) + ": " + e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// XGBoost dump

namespace {

double as_float32(double v)
{
    return static_cast<double>(static_cast<float>(v));
}

// XGBoost goes left iff float(x) < t. The largest double that rounds to a
// float below t is just under the midpoint of t and its lower float
// neighbour (or the midpoint itself when ties round down to an even float).
double xgboost_cut(double threshold)
{
    const float t = static_cast<float>(threshold);
    if (!std::isfinite(t))
        return t;
    const float below = std::nextafter(t, -std::numeric_limits<float>::infinity());
    if (!std::isfinite(below))
        return std::nextafter(static_cast<double>(t), -kInfinity);
    const double mid = (static_cast<double>(below) + static_cast<double>(t)) / 2.0;
    const bool below_even = (std::bit_cast<std::uint32_t>(below) & 1u) == 0;
    return below_even ? mid : std::nextafter(mid, -kInfinity);
}

FeatureIndex parse_feature(const json& split, const std::string& where)
{
    if (split.is_number_integer())
        return split.get<FeatureIndex>();
    if (split.is_string()) {
        const auto s = split.get<std::string>();
        std::string_view digits = s;
        if (!digits.empty() && digits.front() == 'f')
            digits.remove_prefix(1);
        FeatureIndex f = -1;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), f);
        if (ec == std::errc() && ptr == digits.data() + digits.size() && !digits.empty())
            return f;
    }
    throw ParseError(where, "unrecognized split feature " + split.dump());
}

struct XgbBuilder {
    Tree tree;
    std::optional<int> dim;
    int max_feature = -1;

    NodeId add(const json& node, const std::string& where)
    {
        if (!node.is_object())
            throw ParseError(where, "tree node must be an object");
        if (node.contains("leaf")) {
            if (!node["leaf"].is_number())
                throw ParseError(where, "leaf value must be a number");
            tree.nodes.push_back(TreeNode::leaf(as_float32(node["leaf"].get<double>())));
            return static_cast<NodeId>(tree.nodes.size() - 1);
        }
        if (node.contains("categories") || (node.contains("split_type") && node["split_type"] != "numerical"))
            throw ParseError(where, "categorical splits are not supported");
        for (const char* key : {"split", "split_condition", "yes", "no"})
            if (!node.contains(key))
                throw ParseError(where, std::string("missing key \"") + key + "\"");
        if (!node["split_condition"].is_number())
            throw ParseError(where, "split_condition must be a number");
        const auto feature = parse_feature(node["split"], where + "/split");
        if (feature < 0)
            throw ParseError(where, "negative feature index");
        if (dim && feature >= *dim)
            throw ParseError(where, "feature " + std::to_string(feature) + " exceeds declared dim " +
                                        std::to_string(*dim));
        max_feature = std::max(max_feature, static_cast<int>(feature));

        const json* yes = nullptr;
        const json* no = nullptr;
        std::string yes_where, no_where;
        if (node.contains("children")) {
            const auto& children = node["children"];
            if (!children.is_array())
                throw ParseError(where, "children must be an array");
            for (std::size_t i = 0; i < children.size(); ++i) {
                const auto& c = children[i];
                if (!c.is_object() || !c.contains("nodeid"))
                    throw ParseError(where + "/children/" + std::to_string(i), "child without nodeid");
                if (c["nodeid"] == node["yes"]) {
                    yes = &c;
                    yes_where = where + "/children/" + std::to_string(i);
                }
                if (c["nodeid"] == node["no"]) {
                    no = &c;
                    no_where = where + "/children/" + std::to_string(i);
                }
            }
        }
        if (yes == nullptr || no == nullptr || yes == no)
            throw ParseError(where, "yes/no children not found among children");

        const auto self = static_cast<NodeId>(tree.nodes.size());
        tree.nodes.push_back(TreeNode::split(feature, xgboost_cut(node["split_condition"].get<double>()),
                                             kNoNode, kNoNode));
        const NodeId left = add(*yes, yes_where);
        const NodeId right = add(*no, no_where);
        tree.nodes[static_cast<std::size_t>(self)].left = left;
        tree.nodes[static_cast<std::size_t>(self)].right = right;
        return self;
    }
};

json parse_json_text(std::string_view text)
{
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("malformed JSON: ") + e.what());
    }
}

}  // namespace

Ensemble parse_xgboost_json(std::string_view text, const XgboostOptions& options)
{
    const json doc = parse_json_text(text);
    if (!doc.is_array())
        throw ParseError("", "XGBoost dump must be a JSON array of trees");
    if (options.num_classes < 2)
        throw ParseError("", "num_classes must be at least 2");

    Ensemble e;
    e.num_classes = options.num_classes;
    e.base_margin = options.base_margin;
    int max_feature = -1;
    for (std::size_t k = 0; k < doc.size(); ++k) {
        XgbBuilder builder;
        builder.dim = options.dim;
        builder.tree.root = builder.add(doc[k], "/" + std::to_string(k));
        max_feature = std::max(max_feature, builder.max_feature);
        e.trees.push_back(std::move(builder.tree));
        e.class_of_tree.push_back(e.is_binary() ? 0 : static_cast<int>(k % static_cast<std::size_t>(e.num_classes)));
    }
    if (e.trees.empty())
        throw ParseError("", "ensemble must contain at least one tree");
    if (options.dim) {
        e.dim = *options.dim;
    } else {
        e.dim = std::max(1, max_feature + 1);
    }
    if (!e.is_binary() && e.trees.size() % static_cast<std::size_t>(e.num_classes) != 0)
        throw ParseError("", "tree count is not a multiple of num_classes");
    e.validate();
    return e;
}

// ---------------------------------------------------------------------------
// Native schema

namespace {

template <typename T>
T required(const json& obj, const char* key, const std::string& where)
{
    if (!obj.is_object() || !obj.contains(key))
        throw ParseError(where, std::string("missing key \"") + key + "\"");
    const auto& v = obj[key];
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer())
            throw ParseError(where + "/" + key, "expected an integer");
    } else {
        if (!v.is_number())
            throw ParseError(where + "/" + key, "expected a number");
    }
    return v.get<T>();
}

}  // namespace

Ensemble parse_native_json(std::string_view text)
{
    const json doc = parse_json_text(text);
    if (!doc.is_object())
        throw ParseError("", "model must be a JSON object");

    Ensemble e;
    e.dim = required<int>(doc, "dim", "");
    e.num_classes = required<int>(doc, "num_classes", "");
    e.base_margin = doc.contains("base_margin") ? required<double>(doc, "base_margin", "") : 0.0;
    if (e.dim <= 0)
        throw ParseError("/dim", "dimension must be positive");
    if (e.num_classes < 2)
        throw ParseError("/num_classes", "num_classes must be at least 2");
    if (!doc.contains("trees") || !doc["trees"].is_array())
        throw ParseError("/trees", "expected an array");
    const auto& trees = doc["trees"];
    if (trees.empty())
        throw ParseError("/trees", "ensemble must contain at least one tree");

    for (std::size_t k = 0; k < trees.size(); ++k) {
        const std::string tw = "/trees/" + std::to_string(k);
        const auto& t = trees[k];
        const int cls = t.is_object() && t.contains("class") ? required<int>(t, "class", tw) : 0;
        if (cls < 0 || cls >= e.num_classes || (e.num_classes == 2 && cls != 0))
            throw ParseError(tw + "/class", "class " + std::to_string(cls) + " out of range");
        if (!t.contains("nodes") || !t["nodes"].is_array() || t["nodes"].empty())
            throw ParseError(tw + "/nodes", "expected a nonempty array");
        const auto& nodes = t["nodes"];

        Tree tree;
        tree.nodes.resize(nodes.size());
        std::vector<char> defined(nodes.size(), 0);
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const std::string nw = tw + "/nodes/" + std::to_string(i);
            const auto& n = nodes[i];
            const auto id = required<NodeId>(n, "id", nw);
            if (id < 0 || static_cast<std::size_t>(id) >= nodes.size())
                throw ParseError(nw + "/id", "node id " + std::to_string(id) + " out of range");
            if (defined[static_cast<std::size_t>(id)])
                throw ParseError(nw + "/id", "duplicate node id " + std::to_string(id));
            defined[static_cast<std::size_t>(id)] = 1;
            TreeNode node;
            if (n.contains("leaf")) {
                node = TreeNode::leaf(required<double>(n, "leaf", nw));
            } else {
                node = TreeNode::split(required<FeatureIndex>(n, "feature", nw),
                                       required<double>(n, "threshold", nw), required<NodeId>(n, "left", nw),
                                       required<NodeId>(n, "right", nw));
                if (node.feature < 0 || node.feature >= e.dim)
                    throw ParseError(nw + "/feature", "node " + std::to_string(id) + " uses feature " +
                                                          std::to_string(node.feature) + " but dim is " +
                                                          std::to_string(e.dim));
            }
            tree.nodes[static_cast<std::size_t>(id)] = node;
        }
        tree.root = required<NodeId>(t, "root", tw);
        try {
            tree.validate(e.dim);
        } catch (const InvalidInput& err) {
            throw ParseError(tw, err.what());
        }
        e.trees.push_back(std::move(tree));
        e.class_of_tree.push_back(cls);
    }
    e.validate();
    return e;
}

std::string emit_native_json(const Ensemble& ensemble)
{
    nlohmann::ordered_json doc;
    doc["dim"] = ensemble.dim;
    doc["num_classes"] = ensemble.num_classes;
    doc["base_margin"] = ensemble.base_margin;
    auto& trees = doc["trees"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < ensemble.trees.size(); ++k) {
        const auto& t = ensemble.trees[k];
        nlohmann::ordered_json jt;
        jt["class"] = ensemble.class_of_tree[k];
        auto& nodes = jt["nodes"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < t.nodes.size(); ++i) {
            const auto& n = t.nodes[i];
            nlohmann::ordered_json jn;
            jn["id"] = i;
            if (n.is_leaf()) {
                jn["leaf"] = n.value;
            } else {
                jn["feature"] = n.feature;
                jn["threshold"] = n.threshold;
                jn["left"] = n.left;
                jn["right"] = n.right;
            }
            nodes.push_back(std::move(jn));
        }
        jt["root"] = t.root;
        trees.push_back(std::move(jt));
    }
    return doc.dump(1) + "\n";
}

// ---------------------------------------------------------------------------

Ensemble negated(const Ensemble& ensemble)
{
    Ensemble out = ensemble;
    for (auto& t : out.trees)
        for (auto& n : t.nodes)
            if (n.is_leaf())
                n.value = -n.value;
    out.base_margin = -out.base_margin;
    return out;
}

Ensemble extract_binary_pair(const Ensemble& ensemble, int true_class, int target_class)
{
    if (ensemble.is_binary())
        throw InvalidInput("extract_binary_pair requires a multiclass ensemble");
    if (true_class < 0 || true_class >= ensemble.num_classes || target_class < 0 ||
        target_class >= ensemble.num_classes)
        throw InvalidInput("class out of range");
    if (true_class == target_class)
        throw InvalidInput("true and target class must differ");

    Ensemble out;
    out.dim = ensemble.dim;
    out.num_classes = 2;
    out.base_margin = 0.0;  // added to both class scores; cancels in the difference
    for (std::size_t k = 0; k < ensemble.trees.size(); ++k) {
        const int c = ensemble.class_of_tree[k];
        if (c == true_class) {
            out.trees.push_back(ensemble.trees[k]);
        } else if (c == target_class) {
            Tree t = ensemble.trees[k];
            for (auto& n : t.nodes)
                if (n.is_leaf())
                    n.value = -n.value;
            out.trees.push_back(std::move(t));
        } else {
            continue;
        }
        out.class_of_tree.push_back(0);
    }
    return out;
}

}  // namespace treeverify
