#include "batch.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

using namespace treeverify;
using namespace treeverify::cli;

int main(int argc, char** argv)
{
    const std::map<std::string, RunMode> modes{{"verify", RunMode::verify},
                                               {"importance", RunMode::importance},
                                               {"anchor", RunMode::anchor},
                                               {"exact", RunMode::exact},
                                               {"single-tree", RunMode::single_tree}};
    RunConfig cfg;
    CLI::App app{"Certify l-infinity robustness of tree ensembles"};

    std::size_t n = 0;
    std::size_t cap = *cfg.verify.cap;
    std::string image;
    std::string format = "xgboost", mode = "verify", method = "naive", out_format = "json";

    app.add_option("--model", cfg.model_path, "Model file")->required();
    app.add_option("--format", format, "Model format")
        ->check(CLI::IsMember({"xgboost", "native"}));
    app.add_option("--data", cfg.data_path, "LIBSVM data file")->required();
    auto* n_opt = app.add_option("--n", n, "Verify only the first N examples");
    app.add_option("--mode", mode, "Run mode")
        ->check(CLI::IsMember({"verify", "importance", "anchor", "exact", "single-tree"}));
    app.add_option("--eps-max", cfg.verify.eps_max, "Largest radius probed");
    app.add_option("--steps", cfg.verify.search_steps, "Binary-search steps after the eps-max probe");
    app.add_option("--T", cfg.verify.group_size, "Parts merged per group");
    app.add_option("--L", cfg.verify.levels, "Merge levels");
    app.add_option("--method", method, "Bound on the remaining parts")
        ->check(CLI::IsMember({"naive", "dp"}));
    auto* cap_opt = app.add_option("--cap", cap, "Per-level pseudo-node cap (0 disables)");
    app.add_option("--oracle-limit", cfg.verify.oracle_limit, "Largest tuple count the exact mode enumerates");
    app.add_option("--threads", cfg.threads, "Worker threads (TREEVERIFY_THREADS overrides)")
        ->check(CLI::PositiveNumber);
    app.add_option("--out", cfg.output_path, "Report path (default stdout)");
    app.add_option("--out-format", out_format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}));

    auto* dim_opt = app.add_option("--dim", "Feature count (XGBoost dumps; inferred if absent)");
    app.add_option("--num-classes", cfg.num_classes, "Classes in an XGBoost dump")->check(CLI::Range(2, 1 << 16));
    app.add_option("--base-margin", cfg.base_margin, "Margin added to every prediction (XGBoost dumps)");
    app.add_option("--domain-lo", cfg.domain.lo, "Feature lower bound for importance/anchor");
    app.add_option("--domain-hi", cfg.domain.hi, "Feature upper bound for importance/anchor");
    app.add_option("--image", image, "Write importance maps of shape WxH as PGM");
    app.add_option("--image-prefix", cfg.image_prefix, "Path prefix of importance maps");

    try {
        app.parse(argc, argv);
        cfg.model_format = format == "native" ? ModelFormat::native : ModelFormat::xgboost;
        cfg.mode = modes.at(mode);
        cfg.verify.method = method == "dp" ? BoundMethod::dp : BoundMethod::naive;
        cfg.output_format = out_format == "csv" ? OutputFormat::csv : OutputFormat::json;
        if (n_opt->count())
            cfg.num_examples = n;
        if (dim_opt->count())
            cfg.dim = dim_opt->as<int>();
        if (cap_opt->count() && cap == 0)
            cfg.verify.cap.reset();
        else
            cfg.verify.cap = cap;
        if (!image.empty()) {
            const auto x = image.find_first_of("xX");
            if (x == std::string::npos)
                throw CLI::ValidationError("--image", "expected WxH");
            cfg.image = std::pair{std::stoi(image.substr(0, x)), std::stoi(image.substr(x + 1))};
        }
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    apply_environment(cfg);
    return run_batch(cfg, std::cerr);
}
