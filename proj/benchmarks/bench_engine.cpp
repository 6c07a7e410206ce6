#include <treeverify/verifier.hpp>

#include "random_models.hpp"

#include <benchmark/benchmark.h>

#include <fstream>
#include <sstream>

using namespace treeverify;

namespace {

Ensemble load_diabetes()
{
    std::ifstream in(std::string(TREEVERIFY_DATA_DIR) + "/diabetes.xgb.json");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_xgboost_json(ss.str(), {.dim = 7});
}

void BM_SingleTreeLinear(benchmark::State& state)
{
    tvtest::Rng rng(7);
    const int d = 8;
    const Tree t = tvtest::random_tree(rng, d, {.max_depth = static_cast<int>(state.range(0)), .split_probability = 1.0});
    const auto x = tvtest::random_point(rng, d);
    const auto crit = FlipCriterion::sign_of(t.node(route(t, x)).value);
    for (auto _ : state)
        benchmark::DoNotOptimize(verify_tree_linear(t, d, x, crit));
    state.counters["leaves"] = static_cast<double>(t.leaf_count());
}
BENCHMARK(BM_SingleTreeLinear)->Arg(4)->Arg(7)->Arg(10);

void BM_SingleTreeBoxes(benchmark::State& state)
{
    tvtest::Rng rng(7);
    const int d = 8;
    const Tree t = tvtest::random_tree(rng, d, {.max_depth = static_cast<int>(state.range(0)), .split_probability = 1.0});
    const auto x = tvtest::random_point(rng, d);
    const auto crit = FlipCriterion::sign_of(t.node(route(t, x)).value);
    for (auto _ : state)
        benchmark::DoNotOptimize(verify_tree_boxes(t, d, x, crit));
    state.counters["leaves"] = static_cast<double>(t.leaf_count());
}
BENCHMARK(BM_SingleTreeBoxes)->Arg(4)->Arg(7)->Arg(10);

void BM_CliqueEnumDiabetesPair(benchmark::State& state)
{
    const Ensemble e = load_diabetes();
    const auto leaves = index_leaves(e);
    const std::vector<double> x(7, 0.5);
    const auto parts = build_level0_ball(leaves, x, static_cast<double>(state.range(0)) / 100.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(clique_enum(std::span(parts).first(2)));
}
BENCHMARK(BM_CliqueEnumDiabetesPair)->Arg(10)->Arg(50)->Arg(100);

void BM_MultiLevelDiabetes(benchmark::State& state)
{
    const Ensemble e = load_diabetes();
    const auto leaves = index_leaves(e);
    const std::vector<double> x(7, 0.5);
    const auto parts = build_level0_ball(leaves, x, 0.2);
    const MultiLevelOptions opt{.group_size = 2, .levels = static_cast<int>(state.range(0))};
    for (auto _ : state)
        benchmark::DoNotOptimize(multi_level_bound(parts, opt));
}
BENCHMARK(BM_MultiLevelDiabetes)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
