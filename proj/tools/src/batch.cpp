#include "batch.hpp"

#include <treeverify/single_tree.hpp>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace treeverify::cli {

using ojson = nlohmann::ordered_json;

namespace {

struct ExampleResult {
    VerificationReport report;
    std::vector<FeatureRadius> importance;
    std::optional<AnchorResult> anchor;
};

ojson number(double v)
{
    if (std::isfinite(v))
        return v;
    if (std::isnan(v))
        return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::string csv_number(double v)
{
    if (!std::isfinite(v))
        return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ParseError("", "cannot open model file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Ensemble load_model(const RunConfig& cfg)
{
    const auto text = read_file(cfg.model_path);
    if (cfg.model_format == ModelFormat::native)
        return parse_native_json(text);
    return parse_xgboost_json(text, {.dim = cfg.dim, .num_classes = cfg.num_classes, .base_margin = cfg.base_margin});
}

/// Runs `work(i)` for i in [0, n) on `threads` workers; results land by index.
template <typename Work>
void parallel_for(std::size_t n, int threads, Work&& work)
{
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                work(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                next = n;
                return;
            }
        }
    };
    const auto count = static_cast<std::size_t>(std::max(1, threads));
    if (count == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < std::min(count, n); ++t)
            pool.emplace_back(worker);
    }
    if (failure)
        std::rethrow_exception(failure);
}

Tree with_leaf_offset(Tree tree, double offset)
{
    if (offset != 0.0)
        for (auto& n : tree.nodes)
            if (n.is_leaf())
                n.value += offset;
    return tree;
}

std::vector<ExampleResult> verify_all(const RunConfig& cfg, const Ensemble& model,
                                      const std::vector<LabeledPoint>& points)
{
    std::vector<ExampleResult> results(points.size());
    VerifyConfig vcfg = cfg.verify;
    if (cfg.mode == RunMode::exact)
        vcfg.mode = SearchMode::exact;

    if (cfg.mode == RunMode::single_tree) {
        if (model.trees.size() != 1 || !model.is_binary())
            throw InvalidInput("mode single-tree requires a binary ensemble with exactly one tree");
        const Tree tree = with_leaf_offset(model.trees[0], model.base_margin);
        parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
            const auto start = std::chrono::steady_clock::now();
            const auto& p = points[i];
            auto& r = results[i].report;
            const double margin = model.margin(p.x);
            r.label = p.label;
            r.predicted = margin > 0.0 ? 1 : 0;
            r.correct = r.predicted == p.label;
            r.radius = r.correct ? verify_tree_linear(tree, model.dim, p.x, FlipCriterion::sign_of(margin)) : 0.0;
            r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        });
    } else if (!model.is_binary()) {
        if (cfg.mode != RunMode::verify && cfg.mode != RunMode::exact)
            throw InvalidInput("importance and anchor modes require a binary model");
        const MulticlassVerifier verifier(model, vcfg);
        parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
            results[i].report = verifier.certify_untargeted(points[i].x, points[i].label);
        });
    } else {
        const BinaryVerifier verifier(model, vcfg);
        const std::vector<FeatureDomain> domain(static_cast<std::size_t>(model.dim), cfg.domain);
        parallel_for(points.size(), cfg.threads, [&](std::size_t i) {
            const auto& p = points[i];
            auto& out = results[i];
            switch (cfg.mode) {
            case RunMode::importance: {
                const auto start = std::chrono::steady_clock::now();
                out.importance = verifier.feature_importance(p.x, p.label, domain);
                out.report.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                break;
            }
            case RunMode::anchor: {
                const auto start = std::chrono::steady_clock::now();
                out.anchor = verifier.anchors(p.x, p.label, domain);
                out.report.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
                break;
            }
            default:
                out.report = verifier.certify_radius(p.x, p.label);
                return;
            }
            out.report.label = p.label;
            out.report.predicted = model.predict(p.x);
            out.report.correct = out.report.predicted == p.label;
        });
    }
    for (std::size_t i = 0; i < results.size(); ++i)
        results[i].report.example_id = i;
    return results;
}

ojson config_json(const RunConfig& cfg, const Ensemble& model)
{
    ojson c;
    c["mode"] = to_string(cfg.mode);
    c["model_format"] = cfg.model_format == ModelFormat::native ? "native" : "xgboost";
    c["T"] = cfg.verify.group_size;
    c["L"] = cfg.verify.levels;
    c["method"] = to_string(cfg.verify.method);
    c["search_steps"] = cfg.verify.search_steps;
    c["eps_max"] = cfg.verify.eps_max;
    c["cap"] = cfg.verify.cap ? ojson(*cfg.verify.cap) : ojson(nullptr);
    c["search_mode"] = cfg.mode == RunMode::exact ? "exact" : to_string(cfg.verify.mode);
    c["oracle_limit"] = cfg.verify.oracle_limit;
    c["domain"] = {cfg.domain.lo, cfg.domain.hi};
    ojson m;
    m["trees"] = model.trees.size();
    m["dim"] = model.dim;
    m["num_classes"] = model.num_classes;
    m["base_margin"] = model.base_margin;
    return ojson{{"run", c}, {"model", m}};
}

ojson example_json(const ExampleResult& r, RunMode mode)
{
    const auto& rep = r.report;
    ojson e;
    e["id"] = rep.example_id;
    e["label"] = rep.label;
    e["predicted"] = rep.predicted;
    e["correct"] = rep.correct;
    if (mode == RunMode::importance) {
        ojson radii = ojson::array();
        ojson saturated = ojson::array();
        for (const auto& f : r.importance) {
            radii.push_back(number(f.radius));
            saturated.push_back(f.saturated);
        }
        e["feature_radius"] = std::move(radii);
        e["feature_saturated"] = std::move(saturated);
        return e;
    }
    if (mode == RunMode::anchor) {
        e["anchors"] = r.anchor ? ojson(r.anchor->anchors) : ojson::array();
        e["robust"] = r.anchor && r.anchor->robust;
        return e;
    }
    e["radius"] = number(rep.radius);
    e["saturated"] = rep.saturated;
    if (rep.target_class)
        e["target_class"] = *rep.target_class;
    ojson trace = ojson::array();
    for (const auto& s : rep.trace) {
        ojson step;
        step["eps"] = s.eps;
        step["upper_bound"] = number(s.upper_bound);
        step["robust"] = s.robust;
        if (s.capped)
            step["capped"] = true;
        trace.push_back(std::move(step));
    }
    e["trace"] = std::move(trace);
    return e;
}

ojson summary_json(const std::vector<ExampleResult>& results, RunMode mode, int dim)
{
    ojson s;
    const auto n = results.size();
    std::size_t correct = 0;
    for (const auto& r : results)
        correct += r.report.correct ? 1 : 0;
    s["examples"] = n;
    s["correct"] = correct;

    if (mode == RunMode::importance) {
        ojson avg = ojson::array();
        for (int f = 0; f < dim; ++f) {
            double sum = 0.0;
            std::size_t count = 0;
            for (const auto& r : results) {
                if (!r.report.correct)
                    continue;
                sum += r.importance[static_cast<std::size_t>(f)].radius;
                ++count;
            }
            avg.push_back(count ? number(sum / static_cast<double>(count)) : ojson(nullptr));
        }
        s["avg_feature_radius_correct"] = std::move(avg);
        return s;
    }
    if (mode == RunMode::anchor) {
        double sum = 0.0;
        std::size_t robust = 0;
        for (const auto& r : results) {
            if (r.anchor && r.anchor->robust) {
                sum += static_cast<double>(r.anchor->anchors.size());
                ++robust;
            }
        }
        s["anchored"] = robust;
        s["avg_anchor_size"] = robust ? number(sum / static_cast<double>(robust)) : ojson(nullptr);
        return s;
    }

    double all = 0.0, corr = 0.0;
    std::set<double> grid;
    for (const auto& r : results) {
        all += r.report.radius;
        if (r.report.correct)
            corr += r.report.radius;
        for (const auto& step : r.report.trace)
            grid.insert(step.eps);
    }
    s["avg_radius_all"] = n ? number(all / static_cast<double>(n)) : ojson(nullptr);
    s["avg_radius_correct"] = correct ? number(corr / static_cast<double>(correct)) : ojson(nullptr);
    ojson acc = ojson::array();
    for (double eps : grid) {
        std::size_t ok = 0;
        for (const auto& r : results)
            ok += (r.report.correct && r.report.radius >= eps) ? 1 : 0;
        acc.push_back({{"eps", eps}, {"accuracy", static_cast<double>(ok) / static_cast<double>(n)}});
    }
    s["verified_accuracy"] = std::move(acc);
    return s;
}

std::string render_json(const RunConfig& cfg, const Ensemble& model, const std::vector<ExampleResult>& results,
                        double total_seconds)
{
    ojson doc;
    doc["schema_version"] = 1;
    doc["convention"] = {
        {"routing", std::string(kRoutingConvention)},
        {"ball", "closed l-infinity ball; leaves pruned by infimum distance"},
        {"robust_if", "bound on max margin of the other side <= 0 (class 0) or < 0 (class 1, on the negated model)"},
    };
    doc["config"] = config_json(cfg, model);
    ojson examples = ojson::array();
    for (const auto& r : results)
        examples.push_back(example_json(r, cfg.mode));
    doc["examples"] = std::move(examples);
    doc["summary"] = summary_json(results, cfg.mode, model.dim);

    ojson meta;
    meta["threads"] = cfg.threads;
    meta["timestamp"] = static_cast<long long>(std::time(nullptr));
    meta["total_seconds"] = total_seconds;
    double sum = 0.0;
    ojson times = ojson::array();
    for (const auto& r : results) {
        sum += r.report.wall_seconds;
        times.push_back(r.report.wall_seconds);
    }
    meta["avg_seconds_per_example"] = results.empty() ? 0.0 : sum / static_cast<double>(results.size());
    meta["example_seconds"] = std::move(times);
    doc["metadata"] = std::move(meta);
    return doc.dump(1) + "\n";
}

std::string render_csv(const RunConfig& cfg, const Ensemble& model, const std::vector<ExampleResult>& results)
{
    std::ostringstream out;
    if (cfg.mode == RunMode::importance) {
        // One row per example, one column per feature, in example order.
        for (int f = 0; f < model.dim; ++f)
            out << (f ? "," : "") << 'f' << f;
        out << '\n';
        for (const auto& r : results) {
            for (std::size_t f = 0; f < r.importance.size(); ++f)
                out << (f ? "," : "") << csv_number(r.importance[f].radius);
            out << '\n';
        }
    } else if (cfg.mode == RunMode::anchor) {
        out << "id,label,predicted,robust,anchors\n";
        for (const auto& r : results) {
            out << r.report.example_id << ',' << r.report.label << ',' << r.report.predicted << ','
                << (r.anchor && r.anchor->robust ? 1 : 0) << ',';
            if (r.anchor)
                for (std::size_t i = 0; i < r.anchor->anchors.size(); ++i)
                    out << (i ? " " : "") << r.anchor->anchors[i];
            out << '\n';
        }
    } else {
        out << "id,label,predicted,correct,radius,saturated,target_class,probes\n";
        for (const auto& r : results) {
            const auto& rep = r.report;
            out << rep.example_id << ',' << rep.label << ',' << rep.predicted << ',' << (rep.correct ? 1 : 0) << ','
                << csv_number(rep.radius) << ',' << (rep.saturated ? 1 : 0) << ','
                << (rep.target_class ? std::to_string(*rep.target_class) : "") << ',' << rep.trace.size() << '\n';
        }
    }
    return out.str();
}

}  // namespace

std::string_view to_string(RunMode mode)
{
    switch (mode) {
    case RunMode::verify:
        return "verify";
    case RunMode::importance:
        return "importance";
    case RunMode::anchor:
        return "anchor";
    case RunMode::exact:
        return "exact";
    case RunMode::single_tree:
        return "single-tree";
    }
    return "unknown";
}

void apply_environment(RunConfig& config)
{
    if (const char* env = std::getenv("TREEVERIFY_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0)
            config.threads = static_cast<int>(v);
    }
}

std::vector<unsigned char> importance_pixels(std::span<const FeatureRadius> radii, double domain_width)
{
    std::vector<unsigned char> pixels;
    pixels.reserve(radii.size());
    for (const auto& f : radii) {
        double v = f.saturated ? 255.0 : std::round(255.0 * f.radius / domain_width);
        pixels.push_back(static_cast<unsigned char>(std::clamp(v, 0.0, 255.0)));
    }
    return pixels;
}

void emit_importance_map(std::span<const FeatureRadius> radii, double domain_width, int width, int height,
                         const std::filesystem::path& path)
{
    if (width <= 0 || height <= 0 || static_cast<std::size_t>(width) * static_cast<std::size_t>(height) != radii.size())
        throw InvalidInput("image shape " + std::to_string(width) + "x" + std::to_string(height) +
                           " does not match " + std::to_string(radii.size()) + " features");
    const auto pixels = importance_pixels(radii, domain_width);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out)
        throw std::runtime_error("failed writing " + path.string());
}

int run_batch(const RunConfig& cfg, std::ostream& diag)
{
    Ensemble model;
    try {
        model = load_model(cfg);
    } catch (const std::exception& e) {
        diag << "error: model " << cfg.model_path.string() << ": " << e.what() << '\n';
        return kExitModel;
    }

    try {
        cfg.verify.validate();
        if (cfg.threads < 1)
            throw InvalidInput("threads must be positive");
        if (cfg.image) {
            if (cfg.mode != RunMode::importance)
                throw InvalidInput("--image requires mode importance");
            if (cfg.image->first * cfg.image->second != model.dim)
                throw InvalidInput("image shape does not match model dimension " + std::to_string(model.dim));
        }
        if (!(cfg.domain.hi > cfg.domain.lo))
            throw InvalidInput("feature domain must have positive width");
    } catch (const std::exception& e) {
        diag << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    std::vector<LabeledPoint> points;
    try {
        // A bare XGBoost dump only reveals the features it splits on, so the
        // data decides the width unless --dim was given.
        const bool infer = cfg.model_format == ModelFormat::xgboost && !cfg.dim;
        points = read_libsvm(cfg.data_path, infer ? 0 : model.dim);
        if (infer) {
            if (!points.empty())
                model.dim = std::max(model.dim, static_cast<int>(points.front().x.size()));
            for (auto& p : points)
                p.x.resize(static_cast<std::size_t>(model.dim), 0.0);
        }
        normalize_labels(points, model.num_classes);
        if (cfg.num_examples && points.size() > *cfg.num_examples)
            points.resize(*cfg.num_examples);
    } catch (const std::exception& e) {
        diag << "error: data " << cfg.data_path.string() << ": " << e.what() << '\n';
        return kExitData;
    }

    std::vector<ExampleResult> results;
    const auto start = std::chrono::steady_clock::now();
    try {
        results = verify_all(cfg, model, points);
    } catch (const InvalidInput& e) {
        diag << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        diag << "internal error: " << e.what() << '\n';
        return kExitInternal;
    }
    const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    try {
        const std::string text = cfg.output_format == OutputFormat::csv ? render_csv(cfg, model, results)
                                                                         : render_json(cfg, model, results, total);
        if (cfg.output_path.empty()) {
            std::cout << text;
            std::cout.flush();
        } else {
            std::ofstream out(cfg.output_path, std::ios::binary);
            if (!out)
                throw std::runtime_error("cannot open " + cfg.output_path.string());
            out << text;
            if (!out)
                throw std::runtime_error("failed writing " + cfg.output_path.string());
        }
        if (cfg.image) {
            for (const auto& r : results) {
                if (!r.report.correct)
                    continue;
                auto path = cfg.image_prefix;
                path += "." + std::to_string(r.report.example_id) + ".pgm";
                emit_importance_map(r.importance, cfg.domain.width(), cfg.image->first, cfg.image->second, path);
            }
        }
    } catch (const std::exception& e) {
        diag << "error: output: " << e.what() << '\n';
        return kExitOutput;
    }
    return kExitOk;
}

}  // namespace treeverify::cli
