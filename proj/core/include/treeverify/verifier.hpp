#pragma once

// End-to-end certification of tree ensembles: the robustness decision at a
// fixed radius, binary search for the certified radius, multiclass
// untargeted certification, general box queries and the brute-force oracle.

#include "treeverify/clique_engine.hpp"
#include "treeverify/ensemble.hpp"
#include "treeverify/geometry.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace treeverify {

enum class SearchMode { bound, exact };

[[nodiscard]] std::string_view to_string(SearchMode mode);

struct VerifyConfig {
    int group_size = 2;        ///< T
    int levels = 1;            ///< L
    BoundMethod method = BoundMethod::naive;
    int search_steps = 10;
    double eps_max = 1.0;
    std::optional<std::size_t> cap = std::size_t{1'000'000};
    SearchMode mode = SearchMode::bound;
    std::size_t oracle_limit = 10'000'000;  ///< Max tuple count the exact oracle enumerates.

    /// Throws InvalidInput when an invariant is violated.
    void validate() const;
};

struct Decision {
    bool robust = false;
    double upper_bound = 0.0;   ///< Upper bound on the best flipping margin (base margin included).
    BoundMethod method = BoundMethod::naive;
    bool capped = false;
};

struct TraceStep {
    double eps = 0.0;
    double upper_bound = 0.0;
    bool robust = false;
    bool capped = false;
};

struct VerificationReport {
    std::size_t example_id = 0;
    int label = 0;
    int predicted = 0;
    bool correct = false;
    double radius = 0.0;        ///< certified lower bound on the minimal perturbation
    bool saturated = false;     ///< robust at eps_max
    std::optional<int> target_class;  ///< multiclass: arg-min target
    std::vector<TraceStep> trace;
    double wall_seconds = 0.0;
};

struct BoxQuery {
    Box box;
    std::string description;
};

/// Flip-side view of a binary ensemble: a flip means margin > 0, or
/// margin >= 0 when `zero_flips` (the negated side, since margin 0 is class 0).
class OrientedModel {
public:
    explicit OrientedModel(Ensemble ensemble, bool zero_flips = false);

    [[nodiscard]] const Ensemble& ensemble() const { return ensemble_; }
    [[nodiscard]] const EnsembleLeaves& leaves() const { return leaves_; }

    /// Pruned level-0 parts for a ball or a general box query.
    [[nodiscard]] std::vector<CliqueSet> ball_parts(std::span<const double> x, double eps) const;
    [[nodiscard]] std::vector<CliqueSet> box_parts(const Box& box) const;

    /// Robust iff the bound on max (sum of leaf values) + base_margin is <= 0
    /// (< 0 with zero_flips).
    [[nodiscard]] Decision decide(std::vector<CliqueSet> parts, const VerifyConfig& config) const;

private:
    Ensemble ensemble_;
    EnsembleLeaves leaves_;
    bool zero_flips_ = false;
};

/// Largest leaf-value sum over valid tuples of the given level-0 parts, by
/// enumerating tuples that pass both the pairwise and the K-way intersection
/// test. nullopt when the tuple count exceeds `limit`; -inf if none is valid.
[[nodiscard]] std::optional<double> exact_vstar_oracle(std::span<const CliqueSet> parts, std::size_t limit);

/// Closed range [lo, hi] a feature may take, e.g. [0, 1] for normalized data.
struct FeatureDomain {
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] double width() const { return hi - lo; }
};

struct FeatureRadius {
    double radius = 0.0;
    bool saturated = false;
};

struct AnchorResult {
    std::vector<FeatureIndex> anchors;  ///< fixed features, in the order they were added
    bool robust = false;                ///< robust with every other feature free
};

/// Verifier for a binary ensemble (num_classes == 2).
class BinaryVerifier {
public:
    BinaryVerifier(Ensemble ensemble, VerifyConfig config);

    [[nodiscard]] const VerifyConfig& config() const { return config_; }
    [[nodiscard]] const Ensemble& ensemble() const { return positive_.ensemble(); }

    /// Is there an x' with ||x' - x||_inf <= eps whose predicted class
    /// differs from `predicted_class`? Robust means "provably not".
    [[nodiscard]] Decision decide_at_eps(std::span<const double> x, double eps, int predicted_class) const;

    /// Same question for every point of a general box, relative to class y0.
    [[nodiscard]] Decision decide_box_query(const BoxQuery& query, int y0) const;

    /// Binary search for the certified radius. Misclassified inputs get 0.
    [[nodiscard]] VerificationReport certify_radius(std::span<const double> x, int label) const;

    /// Per-feature certified radius when only that feature moves (inside
    /// `domain`), all others fixed. Saturates at the domain width.
    [[nodiscard]] std::vector<FeatureRadius> feature_importance(std::span<const double> x, int y0,
                                                                std::span<const FeatureDomain> domain) const;

    /// Greedy anchor set: fix features in increasing single-feature radius
    /// order until freeing all remaining features inside `domain` is robust.
    [[nodiscard]] AnchorResult anchors(std::span<const double> x, int y0, std::span<const FeatureDomain> domain) const;

private:
    [[nodiscard]] const OrientedModel& flip_side(int predicted_class) const;
    [[nodiscard]] Box feature_query(std::span<const double> x, FeatureIndex feature, double eps,
                                    const FeatureDomain& domain) const;

    OrientedModel positive_;   // flips are margin > 0 (class 0 examples)
    OrientedModel negative_;   // negated ensemble (class 1 examples), margin 0 flips
    VerifyConfig config_;
};

/// Untargeted certification for multiclass ensembles: the minimum certified
/// radius over all target classes of the pairwise reductions.
class MulticlassVerifier {
public:
    MulticlassVerifier(Ensemble ensemble, VerifyConfig config);

    [[nodiscard]] const Ensemble& ensemble() const { return ensemble_; }
    [[nodiscard]] VerificationReport certify_untargeted(std::span<const double> x, int label) const;

private:
    Ensemble ensemble_;
    VerifyConfig config_;
    /// pairs_[c][t]: reduction for true class c and target t (empty when c == t).
    std::vector<std::vector<std::optional<BinaryVerifier>>> pairs_;
};

/// Binary-search grid: r such that decide(r) was robust, probing eps_max
/// first and then `steps` midpoints. Exposed for reuse and testing.
template <typename Decide>
VerificationReport binary_search_radius(double eps_max, int steps, Decide&& decide)
{
    VerificationReport report;
    const Decision top = decide(eps_max);
    report.trace.push_back({eps_max, top.upper_bound, top.robust, top.capped});
    if (top.robust) {
        report.radius = eps_max;
        report.saturated = true;
        return report;
    }
    double lo = 0.0;
    double hi = eps_max;
    for (int s = 0; s < steps; ++s) {
        const double mid = lo + (hi - lo) / 2.0;
        const Decision d = decide(mid);
        report.trace.push_back({mid, d.upper_bound, d.robust, d.capped});
        if (d.robust)
            lo = mid;
        else
            hi = mid;
    }
    report.radius = lo;
    return report;
}

}  // namespace treeverify
