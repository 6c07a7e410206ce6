#include "libsvm.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cmath>
#include <fstream>
#include <sstream>

namespace treeverify::cli {

namespace {

double parse_double(std::string_view text, std::size_t line, const char* what)
{
    // std::from_chars for double is not available on every toolchain we build with.
    std::string buf(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size() || errno == ERANGE || !std::isfinite(v))
        throw DataError(line, std::string("malformed ") + what + " \"" + buf + "\"");
    return v;
}

}  // namespace

std::vector<LabeledPoint> parse_libsvm(std::istream& in, int dim)
{
    std::vector<LabeledPoint> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        std::istringstream tokens(line);
        std::string token;
        if (!(tokens >> token))
            continue;

        const double label = parse_double(token, line_no, "label");
        if (label != std::trunc(label))
            throw DataError(line_no, "label must be an integer");

        LabeledPoint p;
        p.label = static_cast<int>(label);
        p.x.assign(static_cast<std::size_t>(std::max(dim, 0)), 0.0);
        while (tokens >> token) {
            const auto colon = token.find(':');
            if (colon == std::string::npos)
                throw DataError(line_no, "expected <index>:<value>, got \"" + token + "\"");
            long index = 0;
            const char* first = token.data();
            auto [ptr, ec] = std::from_chars(first, first + colon, index);
            if (ec != std::errc() || ptr != first + colon)
                throw DataError(line_no, "malformed feature index in \"" + token + "\"");
            if (index < 1 || (dim > 0 && index > dim))
                throw DataError(line_no, "feature index " + std::to_string(index) + " outside [1, " +
                                             std::to_string(dim) + "]");
            if (static_cast<std::size_t>(index) > p.x.size())
                p.x.resize(static_cast<std::size_t>(index), 0.0);
            p.x[static_cast<std::size_t>(index - 1)] =
                parse_double(std::string_view(token).substr(colon + 1), line_no, "feature value");
        }
        out.push_back(std::move(p));
    }
    if (dim <= 0) {
        std::size_t width = 0;
        for (const auto& p : out)
            width = std::max(width, p.x.size());
        for (auto& p : out)
            p.x.resize(width, 0.0);
    }
    return out;
}

std::vector<LabeledPoint> read_libsvm(const std::filesystem::path& path, int dim)
{
    std::ifstream in(path);
    if (!in)
        throw DataError(0, "cannot open data file " + path.string());
    return parse_libsvm(in, dim);
}

void normalize_labels(std::vector<LabeledPoint>& points, int num_classes)
{
    if (num_classes == 2) {
        for (auto& p : points) {
            if (p.label == -1)
                p.label = 0;
            else if (p.label != 0 && p.label != 1)
                throw DataError(0, "binary labels must be in {0, 1} or {-1, +1}; got " + std::to_string(p.label));
        }
        return;
    }
    for (const auto& p : points)
        if (p.label < 0 || p.label >= num_classes)
            throw DataError(0, "class label " + std::to_string(p.label) + " outside [0, " +
                                   std::to_string(num_classes) + ")");
}

}  // namespace treeverify::cli
