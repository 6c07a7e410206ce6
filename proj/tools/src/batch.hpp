#pragma once

#include "libsvm.hpp"

#include <treeverify/ensemble.hpp>
#include <treeverify/verifier.hpp>

#include <cstddef>
#include <span>
#include <string_view>
#include <utility>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace treeverify::cli {

enum class ModelFormat { xgboost, native };
enum class RunMode { verify, importance, anchor, exact, single_tree };
enum class OutputFormat { json, csv };

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 2,
    kExitModel = 3,
    kExitData = 4,
    kExitOutput = 5,
    kExitInternal = 6,
};

struct RunConfig {
    std::filesystem::path model_path;
    ModelFormat model_format = ModelFormat::xgboost;
    std::filesystem::path data_path;
    std::optional<std::size_t> num_examples;
    RunMode mode = RunMode::verify;
    VerifyConfig verify;
    std::filesystem::path output_path;  ///< empty: stdout
    OutputFormat output_format = OutputFormat::json;
    int threads = 1;

    // XGBoost dumps carry no header; these fill the gaps.
    std::optional<int> dim;
    int num_classes = 2;
    double base_margin = 0.0;

    FeatureDomain domain{0.0, 1.0};
    std::optional<std::pair<int, int>> image;  ///< width x height for PGM maps
    std::filesystem::path image_prefix = "importance";
};

/// Env var TREEVERIFY_THREADS, when set to a positive integer, replaces threads.
void apply_environment(RunConfig& config);

/// Loads model and data, verifies, writes the report. Errors go to `diag`
/// and map to distinct exit codes.
[[nodiscard]] int run_batch(const RunConfig& config, std::ostream& diag);

/// Binary PGM (P5): pixel = round(255 * radius / domain_width), clamped;
/// saturated features are 255.
void emit_importance_map(std::span<const FeatureRadius> radii, double domain_width, int width, int height,
                         const std::filesystem::path& path);

[[nodiscard]] std::vector<unsigned char> importance_pixels(std::span<const FeatureRadius> radii, double domain_width);

[[nodiscard]] std::string_view to_string(RunMode mode);

}  // namespace treeverify::cli
