#include "treeverify/verifier.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <stdexcept>

namespace treeverify {

std::string_view to_string(SearchMode mode)
{
    return mode == SearchMode::exact ? "exact" : "bound";
}

void VerifyConfig::validate() const
{
    if (group_size < 2)
        throw InvalidInput("T must be at least 2");
    if (levels < 0)
        throw InvalidInput("L must be nonnegative");
    if (search_steps < 1)
        throw InvalidInput("search_steps must be at least 1");
    if (!(eps_max > 0.0))
        throw InvalidInput("eps_max must be positive");
    if (method == BoundMethod::exact)
        throw InvalidInput("bound method must be naive or dp");
    if (cap && *cap == 0)
        throw InvalidInput("cap must be positive");
}

// ---------------------------------------------------------------------------

namespace {

class TupleEnumerator {
public:
    TupleEnumerator(std::span<const CliqueSet> parts) : parts_(parts), chosen_(parts.size(), nullptr) {}

    double run()
    {
        extend(0);
        return best_;
    }

private:
    void extend(std::size_t k)
    {
        if (k == parts_.size()) {
            accept();
            return;
        }
        for (const auto& node : parts_[k].nodes) {
            bool ok = true;
            for (std::size_t j = 0; j < k && ok; ++j)
                ok = intersects(chosen_[j]->box, node.box);
            if (!ok)
                continue;
            chosen_[k] = &node;
            extend(k + 1);
        }
    }

    void accept()
    {
        std::optional<Box> common = chosen_[0]->box;
        for (std::size_t k = 1; k < chosen_.size() && common; ++k)
            common = intersect(*common, chosen_[k]->box);
        if (!common)
            throw std::logic_error("pairwise-intersecting boxes with an empty common intersection");
        double sum = chosen_[0]->value;
        for (std::size_t k = 1; k < chosen_.size(); ++k)
            sum += chosen_[k]->value;
        best_ = std::max(best_, sum);
    }

    std::span<const CliqueSet> parts_;
    std::vector<const PseudoNode*> chosen_;
    double best_ = -kInfinity;
};

}  // namespace

std::optional<double> exact_vstar_oracle(std::span<const CliqueSet> parts, std::size_t limit)
{
    if (parts.empty())
        throw InvalidInput("oracle needs at least one part");
    double tuples = 1.0;
    for (const auto& p : parts) {
        if (p.tree_count != 1)
            throw InvalidInput("oracle expects level-0 parts");
        tuples *= static_cast<double>(p.size());
    }
    if (tuples > static_cast<double>(limit))
        return std::nullopt;
    if (tuples == 0.0)
        return -kInfinity;
    return TupleEnumerator(parts).run();
}

// ---------------------------------------------------------------------------

OrientedModel::OrientedModel(Ensemble ensemble, bool zero_flips)
    : ensemble_(std::move(ensemble)), leaves_(index_leaves(ensemble_)), zero_flips_(zero_flips)
{}

std::vector<CliqueSet> OrientedModel::ball_parts(std::span<const double> x, double eps) const
{
    return build_level0_ball(leaves_, x, eps);
}

std::vector<CliqueSet> OrientedModel::box_parts(const Box& box) const
{
    return build_level0(leaves_, box);
}

Decision OrientedModel::decide(std::vector<CliqueSet> parts, const VerifyConfig& config) const
{
    Decision d;
    double vstar_bound = -kInfinity;
    if (config.mode == SearchMode::exact) {
        if (auto exact = exact_vstar_oracle(parts, config.oracle_limit)) {
            d.method = BoundMethod::exact;
            vstar_bound = *exact;
        } else {
            const int top = max_levels(parts.size(), config.group_size);
            const auto r = multi_level_bound(
                std::move(parts), {.group_size = config.group_size, .levels = top, .cap = config.cap, .method = config.method});
            d.method = r.method;
            d.capped = r.capped;
            vstar_bound = r.upper_bound;
        }
    } else {
        const auto r = multi_level_bound(
            std::move(parts),
            {.group_size = config.group_size, .levels = config.levels, .cap = config.cap, .method = config.method});
        d.method = r.method;
        d.capped = r.capped;
        vstar_bound = r.upper_bound;
    }
    d.upper_bound = vstar_bound + ensemble_.base_margin;
    d.robust = zero_flips_ ? d.upper_bound < 0.0 : d.upper_bound <= 0.0;
    return d;
}

// ---------------------------------------------------------------------------

namespace {

Ensemble checked_binary(Ensemble ensemble, const VerifyConfig& config)
{
    ensemble.validate();
    if (!ensemble.is_binary())
        throw InvalidInput("BinaryVerifier needs a binary ensemble");
    config.validate();
    const int top = max_levels(ensemble.trees.size(), config.group_size);
    if (config.levels > top)
        throw InvalidInput("L=" + std::to_string(config.levels) + " exceeds ceil(log_T K)=" + std::to_string(top) +
                           " for " + std::to_string(ensemble.trees.size()) + " trees");
    return ensemble;
}

double seconds_since(std::chrono::steady_clock::time_point start)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BinaryVerifier::BinaryVerifier(Ensemble ensemble, VerifyConfig config)
    : positive_(checked_binary(std::move(ensemble), config)),
      negative_(negated(positive_.ensemble()), true),
      config_(config)
{}

const OrientedModel& BinaryVerifier::flip_side(int predicted_class) const
{
    if (predicted_class != 0 && predicted_class != 1)
        throw InvalidInput("binary class must be 0 or 1");
    return predicted_class == 0 ? positive_ : negative_;
}

Decision BinaryVerifier::decide_at_eps(std::span<const double> x, double eps, int predicted_class) const
{
    const auto& model = flip_side(predicted_class);
    return model.decide(model.ball_parts(x, eps), config_);
}

Decision BinaryVerifier::decide_box_query(const BoxQuery& query, int y0) const
{
    const auto& model = flip_side(y0);
    return model.decide(model.box_parts(query.box), config_);
}

VerificationReport BinaryVerifier::certify_radius(std::span<const double> x, int label) const
{
    const auto start = std::chrono::steady_clock::now();
    if (x.size() != static_cast<std::size_t>(ensemble().dim))
        throw InvalidInput("point dimension mismatch");
    const int predicted = ensemble().predict(x);
    VerificationReport report;
    if (predicted == label) {
        report = binary_search_radius(config_.eps_max, config_.search_steps,
                                      [&](double eps) { return decide_at_eps(x, eps, predicted); });
    }
    report.label = label;
    report.predicted = predicted;
    report.correct = predicted == label;
    report.wall_seconds = seconds_since(start);
    return report;
}

Box BinaryVerifier::feature_query(std::span<const double> x, FeatureIndex feature, double eps,
                                  const FeatureDomain& domain) const
{
    std::vector<Constraint> cs;
    cs.reserve(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        Interval iv = Interval::point(x[j]);
        if (static_cast<FeatureIndex>(j) == feature) {
            const double lo = std::max(x[j] - eps, domain.lo);
            const double hi = std::min(x[j] + eps, domain.hi);
            if (lo <= hi)
                iv = Interval::closed(lo, hi);
        }
        cs.push_back({static_cast<FeatureIndex>(j), iv});
    }
    return Box(static_cast<int>(x.size()), std::move(cs));
}

std::vector<FeatureRadius> BinaryVerifier::feature_importance(std::span<const double> x, int y0,
                                                              std::span<const FeatureDomain> domain) const
{
    const auto dim = static_cast<std::size_t>(ensemble().dim);
    if (x.size() != dim || domain.size() != dim)
        throw InvalidInput("point/domain dimension mismatch");
    std::vector<FeatureRadius> out(dim);
    if (ensemble().predict(x) != y0)
        return out;
    for (std::size_t i = 0; i < dim; ++i) {
        const double width = domain[i].width();
        if (!(width > 0.0)) {
            out[i] = {0.0, true};
            continue;
        }
        const auto fi = static_cast<FeatureIndex>(i);
        const auto search = binary_search_radius(width, config_.search_steps, [&](double eps) {
            return decide_box_query({feature_query(x, fi, eps, domain[i]), {}}, y0);
        });
        out[i] = {search.radius, search.saturated};
    }
    return out;
}

AnchorResult BinaryVerifier::anchors(std::span<const double> x, int y0, std::span<const FeatureDomain> domain) const
{
    const auto radii = feature_importance(x, y0, domain);
    std::vector<FeatureIndex> order(radii.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](FeatureIndex a, FeatureIndex b) { return radii[a].radius < radii[b].radius; });

    std::vector<char> fixed(radii.size(), 0);
    AnchorResult result;
    for (std::size_t step = 0; step <= order.size(); ++step) {
        std::vector<Constraint> cs;
        for (std::size_t j = 0; j < x.size(); ++j)
            cs.push_back({static_cast<FeatureIndex>(j), fixed[j] ? Interval::point(x[j])
                                                                 : Interval::closed(domain[j].lo, domain[j].hi)});
        const Box query(static_cast<int>(x.size()), std::move(cs));
        if (!query.empty() && decide_box_query({query, {}}, y0).robust) {
            result.robust = true;
            break;
        }
        if (step == order.size())
            break;
        fixed[static_cast<std::size_t>(order[step])] = 1;
        result.anchors.push_back(order[step]);
    }
    return result;
}

// ---------------------------------------------------------------------------

MulticlassVerifier::MulticlassVerifier(Ensemble ensemble, VerifyConfig config)
    : ensemble_(std::move(ensemble)), config_(config)
{
    ensemble_.validate();
    if (ensemble_.is_binary())
        throw InvalidInput("MulticlassVerifier needs more than two classes");
    config_.validate();
    const auto C = static_cast<std::size_t>(ensemble_.num_classes);
    pairs_.resize(C);
    for (std::size_t c = 0; c < C; ++c) {
        pairs_[c].resize(C);
        for (std::size_t t = 0; t < C; ++t)
            if (c != t)
                pairs_[c][t].emplace(extract_binary_pair(ensemble_, static_cast<int>(c), static_cast<int>(t)),
                                     config_);
    }
}

VerificationReport MulticlassVerifier::certify_untargeted(std::span<const double> x, int label) const
{
    const auto start = std::chrono::steady_clock::now();
    if (x.size() != static_cast<std::size_t>(ensemble_.dim))
        throw InvalidInput("point dimension mismatch");
    const int predicted = ensemble_.predict(x);
    VerificationReport best;
    if (predicted == label) {
        bool first = true;
        for (int t = 0; t < ensemble_.num_classes; ++t) {
            if (t == predicted)
                continue;
            // Label 1 in the pair means "score of the true class is larger".
            auto r = pairs_[static_cast<std::size_t>(predicted)][static_cast<std::size_t>(t)]->certify_radius(x, 1);
            if (first || r.radius < best.radius) {
                best = std::move(r);
                best.target_class = t;
                first = false;
            }
        }
    }
    best.label = label;
    best.predicted = predicted;
    best.correct = predicted == label;
    best.wall_seconds = seconds_since(start);
    return best;
}

}  // namespace treeverify
