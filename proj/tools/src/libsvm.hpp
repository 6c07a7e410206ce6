#pragma once

#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeverify::cli {

class DataError : public std::runtime_error {
public:
    DataError(std::size_t line, const std::string& message)
        : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message), line_(line)
    {}

    [[nodiscard]] std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct LabeledPoint {
    int label = 0;
    std::vector<double> x;
};

/// `<label> <index>:<value> ...` per line with 1-based indices; absent
/// features are 0. Blank lines and `#` comments are skipped. With dim <= 0
/// the width is the largest index present.
[[nodiscard]] std::vector<LabeledPoint> parse_libsvm(std::istream& in, int dim);
[[nodiscard]] std::vector<LabeledPoint> read_libsvm(const std::filesystem::path& path, int dim);

/// Binary data may use {0, 1} or {-1, +1}; both map to {0, 1}. Multiclass
/// labels must already be 0-based class ids.
void normalize_labels(std::vector<LabeledPoint>& points, int num_classes);

}  // namespace treeverify::cli
