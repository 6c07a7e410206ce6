#include <treeverify/verifier.hpp>

#include "graphs.hpp"
#include "oracles.hpp"
#include "random_models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace treeverify;

namespace {

const double inf = kInfinity;

Tree stump(FeatureIndex f, double t, double l, double r)
{
    return Tree{{TreeNode::split(f, t, 1, 2), TreeNode::leaf(l), TreeNode::leaf(r)}, 0};
}

Ensemble binary(std::vector<Tree> trees, int dim, double base = 0.0)
{
    Ensemble e;
    e.dim = dim;
    e.trees = std::move(trees);
    e.class_of_tree.assign(e.trees.size(), 0);
    e.base_margin = base;
    return e;
}

VerifyConfig exact_config(int steps = 10, double eps_max = 1.0)
{
    return {.levels = 0, .search_steps = steps, .eps_max = eps_max, .mode = SearchMode::exact};
}

/// Does some valid tuple meeting the box land on the other side of y0?
bool oracle_box_flips(const Ensemble& e, const Box& box, int y0)
{
    const tvtest::Region q = tvtest::region_of(box);
    bool flips = false;
    tvtest::for_each_valid_tuple(e, [&](std::span<const NodeId>, double sum, const tvtest::Region& r) {
        tvtest::Region m = r;
        m.meet(q);
        if (m.empty())
            return;
        const double margin = sum + e.base_margin;
        flips = flips || (y0 == 0 ? margin > 0.0 : margin <= 0.0);
    });
    return flips;
}

}  // namespace

TEST(Config, ValidateRejectsBadValues)
{
    EXPECT_NO_THROW(VerifyConfig{}.validate());
    EXPECT_THROW((VerifyConfig{.group_size = 1}.validate()), InvalidInput);
    EXPECT_THROW((VerifyConfig{.levels = -1}.validate()), InvalidInput);
    EXPECT_THROW((VerifyConfig{.method = BoundMethod::exact}.validate()), InvalidInput);
    EXPECT_THROW((VerifyConfig{.search_steps = 0}.validate()), InvalidInput);
    EXPECT_THROW((VerifyConfig{.eps_max = 0.0}.validate()), InvalidInput);
    EXPECT_THROW((VerifyConfig{.cap = 0}.validate()), InvalidInput);
}

TEST(Config, VerifierRejectsLevelsBeyondTopAndWrongClassCount)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1), stump(0, 0.25, -1, 1), stump(0, 0.75, -1, 1)}, 1);
    EXPECT_NO_THROW(BinaryVerifier(e, {.group_size = 2, .levels = 2}));
    EXPECT_THROW(BinaryVerifier(e, {.group_size = 2, .levels = 3}), InvalidInput);
    Ensemble multi = e;
    multi.num_classes = 3;
    multi.class_of_tree = {0, 1, 2};
    EXPECT_THROW(BinaryVerifier(multi, {}), InvalidInput);
    EXPECT_THROW(MulticlassVerifier(e, {}), InvalidInput);
}

TEST(Oracle, RejectsMergedPartsAndRespectsLimit)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1), stump(0, 0.25, -1, 1)}, 1);
    const auto leaves = index_leaves(e);
    auto parts = build_level0(leaves, Box::universal(1));
    EXPECT_EQ(exact_vstar_oracle(parts, 100), std::optional<double>(2.0));
    EXPECT_FALSE(exact_vstar_oracle(parts, 3));
    EXPECT_THROW((void)exact_vstar_oracle({}, 100), InvalidInput);
    const std::vector<CliqueSet> merged{clique_enum(parts)};
    EXPECT_THROW((void)exact_vstar_oracle(merged, 100), InvalidInput);
}

TEST(Oracle, MatchesTupleEnumeration)
{
    tvtest::Rng rng(51);
    for (int it = 0; it < 300; ++it) {
        const int K = tvtest::uniform_int(rng, 1, 5);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const double eps = tvtest::grid_value(rng, 3) / 2;
        const auto parts = build_level0_ball(index_leaves(e), x, eps);
        EXPECT_EQ(exact_vstar_oracle(parts, 1'000'000), std::optional<double>(tvtest::oracle_vstar_ball(e, x, eps)));
    }
}

TEST(Binary, ZeroRadiusIsRobustAwayFromThresholds)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1), stump(1, 0.25, 0.5, -0.5)}, 2);
    const BinaryVerifier v(e, {.levels = 1});
    const std::vector<double> x{0.3, 0.6};
    const int y = e.predict(x);
    EXPECT_TRUE(v.decide_at_eps(x, 0.0, y).robust);
    // Exactly on a threshold the other side is at infimum distance 0.
    const std::vector<double> on{0.5, 0.6};
    EXPECT_FALSE(v.decide_at_eps(on, 0.0, e.predict(on)).robust);
}

TEST(Binary, MisclassifiedGetsZeroWithoutProbes)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1)}, 1);
    const BinaryVerifier v(e, {.levels = 0});
    const std::vector<double> x{0.25};
    const auto r = v.certify_radius(x, 1);
    EXPECT_FALSE(r.correct);
    EXPECT_EQ(r.predicted, 0);
    EXPECT_EQ(r.radius, 0.0);
    EXPECT_TRUE(r.trace.empty());
}

TEST(Binary, StumpRadiusLandsOnTheSearchGrid)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1)}, 1);
    const BinaryVerifier v(e, {.levels = 0, .search_steps = 10});
    const auto r = v.certify_radius(std::vector<double>{0.25}, 0);
    EXPECT_TRUE(r.correct);
    EXPECT_FALSE(r.saturated);
    EXPECT_EQ(r.trace.size(), 11u);
    EXPECT_LT(r.radius, 0.25);
    EXPECT_GE(r.radius, 0.25 - 1.0 / 1024);
    EXPECT_EQ(r.radius, tvtest::searched_radius(0.25, 1.0, 10));
}

TEST(Binary, UnflippableModelSaturates)
{
    const Ensemble e = binary({stump(0, 0.5, -1, -2)}, 1);
    const BinaryVerifier v(e, {.levels = 0, .eps_max = 0.5});
    const auto r = v.certify_radius(std::vector<double>{0.25}, 0);
    EXPECT_TRUE(r.saturated);
    EXPECT_EQ(r.radius, 0.5);
    EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Binary, ZeroMarginIsClassZero)
{
    // Margin 0 predicts class 0: reaching it is no flip for class 0 but is one for class 1.
    const Ensemble down = binary({stump(0, 0.5, -1, 0)}, 1);
    EXPECT_TRUE(BinaryVerifier(down, {.levels = 0}).certify_radius(std::vector<double>{0.25}, 0).saturated);
    const Ensemble up = binary({stump(0, 0.5, 1, 0)}, 1);
    const auto r = BinaryVerifier(up, {.levels = 0}).certify_radius(std::vector<double>{0.25}, 1);
    EXPECT_FALSE(r.saturated);
    EXPECT_EQ(r.radius, tvtest::searched_radius(0.25, 1.0, 10));
}

TEST(Binary, SingleTreeRadiusMatchesLinearScan)
{
    tvtest::Rng rng(52);
    for (int it = 0; it < 300; ++it) {
        const int d = tvtest::uniform_int(rng, 1, 5);
        const Ensemble e = tvtest::random_ensemble(rng, 1, d, {.max_depth = 5});
        const auto x = tvtest::random_point(rng, d);
        const int y = e.predict(x);
        const BinaryVerifier v(e, {.levels = 0, .search_steps = 12});
        const auto r = v.certify_radius(x, y);
        const double rstar = tvtest::oracle_binary_rstar(e, x, y);
        EXPECT_EQ(r.radius, tvtest::searched_radius(rstar, 1.0, 12));
        if (!r.saturated) {
            EXPECT_LE(r.radius, rstar);
            EXPECT_LE(rstar - r.radius, 1.0 / 4096);
        }
    }
}

TEST(Binary, ExactModeEqualsSearchedOracleRadius)
{
    tvtest::Rng rng(53);
    for (int it = 0; it < 200; ++it) {
        const int K = tvtest::uniform_int(rng, 1, 5);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const int y = e.predict(x);
        const double expected = tvtest::searched_radius(tvtest::oracle_binary_rstar(e, x, y), 1.0, 10);
        EXPECT_EQ(BinaryVerifier(e, exact_config()).certify_radius(x, y).radius, expected);
        // The full-depth bound is exact as well.
        const int top = max_levels(e.trees.size(), 2);
        EXPECT_EQ(BinaryVerifier(e, {.levels = top, .cap = std::nullopt}).certify_radius(x, y).radius, expected);
    }
}

TEST(Binary, ExactModeFallsBackWhenOracleLimitIsExceeded)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1), stump(0, 0.25, -1, 1), stump(0, 0.75, -1, 1)}, 1);
    VerifyConfig cfg = exact_config();
    cfg.oracle_limit = 1;
    const BinaryVerifier v(e, cfg);
    const auto d = v.decide_at_eps(std::vector<double>{0.1}, 1.0, 0);
    EXPECT_NE(d.method, BoundMethod::naive);
    EXPECT_FALSE(d.robust);
}

TEST(Binary, BoundRadiusIsSoundAndImprovesWithLevels)
{
    tvtest::Rng rng(54);
    for (int it = 0; it < 150; ++it) {
        const int K = tvtest::uniform_int(rng, 2, 6);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const int y = e.predict(x);
        const double rstar = tvtest::oracle_binary_rstar(e, x, y);
        for (int T = 2; T <= 3; ++T) {
            double prev = -1.0;
            for (int L = 0; L <= max_levels(e.trees.size(), T); ++L) {
                const VerifyConfig cfg{.group_size = T, .levels = L, .cap = std::nullopt};
                const double naive = BinaryVerifier(e, cfg).certify_radius(x, y).radius;
                VerifyConfig dp_cfg = cfg;
                dp_cfg.method = BoundMethod::dp;
                const double dp = BinaryVerifier(e, dp_cfg).certify_radius(x, y).radius;
                ASSERT_LE(naive, dp);
                ASSERT_TRUE(dp < rstar || dp == 0.0 || (dp == 1.0 && rstar > 1.0));
                ASSERT_GE(naive, prev);
                prev = naive;
            }
        }
    }
}

TEST(Binary, DecisionsAreSound)
{
    tvtest::Rng rng(55);
    for (int it = 0; it < 300; ++it) {
        const int K = tvtest::uniform_int(rng, 2, 5);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const int y = e.predict(x);
        const double eps = tvtest::grid_value(rng, 4) / 2;
        const BinaryVerifier v(e, {.levels = tvtest::uniform_int(rng, 0, max_levels(e.trees.size(), 2))});
        const bool truly_robust = !(tvtest::oracle_binary_rstar(e, x, y) <= eps);
        if (v.decide_at_eps(x, eps, y).robust) {
            EXPECT_TRUE(truly_robust);
        }
        EXPECT_EQ(BinaryVerifier(e, exact_config()).decide_at_eps(x, eps, y).robust, truly_robust);
    }
}

TEST(BoxQuery, PointQueryIsRobustAndUniversalQueryIsNot)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1), stump(1, 0.5, -1, 1)}, 2);
    const BinaryVerifier v(e, {.levels = 1});
    const std::vector<double> x{0.25, 0.25};
    EXPECT_TRUE(v.decide_box_query({Box::point(x), "point"}, e.predict(x)).robust);
    EXPECT_FALSE(v.decide_box_query({Box::universal(2), "all"}, e.predict(x)).robust);
    // Fixing feature 0 low leaves margin at most 0: no flip.
    EXPECT_TRUE(v.decide_box_query({Box(2, {{0, Interval::closed(0.0, 0.5)}}), "f0 low"}, 0).robust);
}

TEST(BoxQuery, ExactDecisionMatchesTupleOracle)
{
    tvtest::Rng rng(56);
    for (int it = 0; it < 300; ++it) {
        const int K = tvtest::uniform_int(rng, 1, 5);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const Box box = tvtest::random_box(rng, d);
        const int y0 = tvtest::coin(rng) ? 1 : 0;
        const bool flips = oracle_box_flips(e, box, y0);
        EXPECT_EQ(BinaryVerifier(e, exact_config()).decide_box_query({box, {}}, y0).robust, !flips);
        const BinaryVerifier bound(e, {.levels = tvtest::uniform_int(rng, 0, max_levels(e.trees.size(), 2))});
        if (bound.decide_box_query({box, {}}, y0).robust) {
            EXPECT_FALSE(flips);
        }
    }
}

TEST(Multiclass, ConstantWinnerSaturates)
{
    Ensemble e;
    e.dim = 2;
    e.num_classes = 3;
    e.trees = {Tree{{TreeNode::leaf(1.0)}, 0}, stump(0, 0.5, 0, 0.5), stump(1, 0.5, 0, 0.5)};
    e.class_of_tree = {0, 1, 2};
    const MulticlassVerifier v(e, {.levels = 0});
    const auto r = v.certify_untargeted(std::vector<double>{0.2, 0.2}, 0);
    EXPECT_TRUE(r.correct);
    EXPECT_TRUE(r.saturated);
    EXPECT_EQ(r.radius, 1.0);
}

TEST(Multiclass, NearestTargetWins)
{
    Ensemble e;
    e.dim = 2;
    e.num_classes = 3;
    e.trees = {Tree{{TreeNode::leaf(1.0)}, 0}, stump(0, 0.625, 0, 2), stump(1, 0.875, 0, 2)};
    e.class_of_tree = {0, 1, 2};
    const MulticlassVerifier v(e, {.levels = 0, .search_steps = 10});
    const std::vector<double> x{0.5, 0.5};
    const auto r = v.certify_untargeted(x, 0);
    ASSERT_TRUE(r.target_class);
    EXPECT_EQ(*r.target_class, 1);
    EXPECT_EQ(r.radius, tvtest::searched_radius(0.125, 1.0, 10));
    EXPECT_LE(0.125 - r.radius, 1.0 / 1024);

    const auto wrong = v.certify_untargeted(x, 2);
    EXPECT_FALSE(wrong.correct);
    EXPECT_EQ(wrong.radius, 0.0);
}

TEST(Importance, MatchesOneFeatureCellScan)
{
    tvtest::Rng rng(57);
    const int steps = 10;
    for (int it = 0; it < 200; ++it) {
        const int K = tvtest::uniform_int(rng, 1, 3);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const int y0 = e.predict(x);
        const std::vector<FeatureDomain> domain(static_cast<std::size_t>(d), FeatureDomain{0.0, 1.0});
        const auto radii = BinaryVerifier(e, exact_config(steps)).feature_importance(x, y0, domain);
        for (int f = 0; f < d; ++f) {
            const double rstar = tvtest::oracle_feature_rstar(e, x, f, 0.0, 1.0, y0);
            const auto& fr = radii[static_cast<std::size_t>(f)];
            EXPECT_EQ(fr.saturated, rstar == inf) << "feature " << f;
            if (fr.saturated) {
                EXPECT_EQ(fr.radius, 1.0);
                continue;
            }
            EXPECT_LE(fr.radius, rstar);
            EXPECT_LE(rstar - fr.radius, 1.0 / (1 << steps));
        }
    }
}

TEST(Importance, MisclassifiedGivesZeros)
{
    const Ensemble e = binary({stump(0, 0.5, -1, 1)}, 1);
    const std::vector<FeatureDomain> domain{{0.0, 1.0}};
    const auto radii = BinaryVerifier(e, {.levels = 0}).feature_importance(std::vector<double>{0.25}, 1, domain);
    EXPECT_EQ(radii[0].radius, 0.0);
    EXPECT_FALSE(radii[0].saturated);
}

TEST(Anchors, FixedFeaturesCertifyTheRest)
{
    tvtest::Rng rng(58);
    for (int it = 0; it < 200; ++it) {
        const int K = tvtest::uniform_int(rng, 1, 4);
        const int d = tvtest::uniform_int(rng, 1, 4);
        const Ensemble e = tvtest::random_ensemble(rng, K, d, {.max_depth = 3});
        const auto x = tvtest::random_point(rng, d);
        const int y0 = e.predict(x);
        const std::vector<FeatureDomain> domain(static_cast<std::size_t>(d), FeatureDomain{0.0, 1.0});
        const BinaryVerifier v(e, exact_config());
        const auto a = v.anchors(x, y0, domain);
        ASSERT_TRUE(a.robust);
        ASSERT_LE(a.anchors.size(), static_cast<std::size_t>(d));

        std::vector<Constraint> cs;
        for (int f = 0; f < d; ++f) {
            const bool fixed = std::find(a.anchors.begin(), a.anchors.end(), f) != a.anchors.end();
            cs.push_back({f, fixed ? Interval::point(x[static_cast<std::size_t>(f)]) : Interval::closed(0.0, 1.0)});
        }
        EXPECT_FALSE(oracle_box_flips(e, Box(d, std::move(cs)), y0));

        // Features are fixed in order of increasing single-feature radius.
        const auto radii = v.feature_importance(x, y0, domain);
        for (std::size_t i = 1; i < a.anchors.size(); ++i)
            EXPECT_LE(radii[static_cast<std::size_t>(a.anchors[i - 1])].radius,
                      radii[static_cast<std::size_t>(a.anchors[i])].radius);
    }
}

TEST(Anchors, ConstantModelNeedsNoAnchors)
{
    const Ensemble e = binary({stump(0, 0.5, -1, -1)}, 1);
    const std::vector<FeatureDomain> domain{{0.0, 1.0}};
    const auto a = BinaryVerifier(e, {.levels = 0}).anchors(std::vector<double>{0.3}, 0, domain);
    EXPECT_TRUE(a.robust);
    EXPECT_TRUE(a.anchors.empty());
}
