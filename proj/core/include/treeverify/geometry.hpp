#pragma once

// Half-open interval and sparse axis-aligned box arithmetic.
//
// Every region in this library is a product of half-open intervals (l, r]
// with l, r in the extended reals. A box stores only its constrained
// coordinates; an absent feature means (-inf, +inf].

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeverify {

using FeatureIndex = std::int32_t;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The half-open set (lower, upper]. Nonempty iff lower < upper.
struct Interval {
    double lower = -kInfinity;
    double upper = kInfinity;

    [[nodiscard]] bool empty() const { return !(lower < upper); }
    [[nodiscard]] bool universal() const { return lower == -kInfinity && upper == kInfinity; }
    [[nodiscard]] bool contains(double v) const { return lower < v && v <= upper; }

    /// (nextdown(lo), hi]: the half-open stand-in for the closed interval [lo, hi].
    static Interval closed(double lo, double hi);
    /// (nextdown(v), v]: the half-open stand-in for the single point {v}.
    static Interval point(double v) { return closed(v, v); }

    friend bool operator==(const Interval&, const Interval&) = default;
};

[[nodiscard]] Interval intersect(const Interval& a, const Interval& b);

struct Constraint {
    FeatureIndex feature = 0;
    Interval interval;

    friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Sparse axis-aligned box over `dim` features.
///
/// Constraints are kept sorted by feature with universal intervals removed,
/// so two boxes describing the same set of coordinates compare equal. A box
/// may hold empty intervals; `empty()` reports that.
class Box {
public:
    Box() = default;
    explicit Box(int dim);
    /// Throws InvalidInput on out-of-range or repeated features.
    Box(int dim, std::vector<Constraint> constraints);

    static Box universal(int dim) { return Box(dim); }
    static Box point(std::span<const double> x);

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] std::span<const Constraint> constraints() const { return constraints_; }
    [[nodiscard]] Interval interval(FeatureIndex feature) const;
    [[nodiscard]] bool empty() const;
    [[nodiscard]] bool is_universal() const { return constraints_.empty(); }
    [[nodiscard]] bool contains(std::span<const double> x) const;

    /// Copy with the interval on `feature` replaced (universal drops the entry).
    [[nodiscard]] Box with_interval(FeatureIndex feature, Interval interval) const;

    friend bool operator==(const Box&, const Box&) = default;

private:
    int dim_ = 0;
    std::vector<Constraint> constraints_;
};

/// Coordinatewise intersection; nullopt when some coordinate is empty.
/// Throws InvalidInput when the dimensions differ.
[[nodiscard]] std::optional<Box> intersect(const Box& a, const Box& b);

/// Same emptiness answer as intersect() without materializing the result.
[[nodiscard]] bool intersects(const Box& a, const Box& b);

struct BoxDistance {
    std::vector<double> per_feature;
    double norm = 0.0;
};

/// Per-coordinate minimal move from x into b, with its l-infinity norm.
/// A coordinate on the open lower boundary has distance 0 (infimum).
[[nodiscard]] BoxDistance point_box_distance(std::span<const double> x, const Box& b);

/// Norm only; no allocation.
[[nodiscard]] double linf_distance(std::span<const double> x, const Box& b);

/// True iff the closed l-infinity ball of radius eps around x touches b.
[[nodiscard]] bool box_intersects_ball(std::span<const double> x, double eps, const Box& b);

[[nodiscard]] std::string to_string(const Interval& interval);
[[nodiscard]] std::string to_string(const Box& box);

}  // namespace treeverify
