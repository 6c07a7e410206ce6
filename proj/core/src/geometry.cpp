#include "treeverify/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace treeverify {

namespace {

double coordinate_distance(double x, const Interval& iv)
{
    if (x > iv.upper)
        return x - iv.upper;
    if (x <= iv.lower)
        return iv.lower - x;
    return 0.0;
}

void check_dims(const Box& a, const Box& b)
{
    if (a.dim() != b.dim())
        throw InvalidInput("box dimension mismatch: " + std::to_string(a.dim()) + " vs " +
                           std::to_string(b.dim()));
}

}  // namespace

Interval Interval::closed(double lo, double hi)
{
    return {std::nextafter(lo, -kInfinity), hi};
}

Interval intersect(const Interval& a, const Interval& b)
{
    return {std::max(a.lower, b.lower), std::min(a.upper, b.upper)};
}

Box::Box(int dim) : dim_(dim)
{
    if (dim < 0)
        throw InvalidInput("negative box dimension");
}

Box::Box(int dim, std::vector<Constraint> constraints) : Box(dim)
{
    std::sort(constraints.begin(), constraints.end(),
              [](const Constraint& a, const Constraint& b) { return a.feature < b.feature; });
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto f = constraints[i].feature;
        if (f < 0 || f >= dim)
            throw InvalidInput("feature " + std::to_string(f) + " out of range for dim " +
                               std::to_string(dim));
        if (i > 0 && constraints[i - 1].feature == f)
            throw InvalidInput("feature " + std::to_string(f) + " constrained twice");
    }
    std::erase_if(constraints, [](const Constraint& c) { return c.interval.universal(); });
    constraints_ = std::move(constraints);
}

Box Box::point(std::span<const double> x)
{
    std::vector<Constraint> cs;
    cs.reserve(x.size());
    for (std::size_t t = 0; t < x.size(); ++t)
        cs.push_back({static_cast<FeatureIndex>(t), Interval::point(x[t])});
    return Box(static_cast<int>(x.size()), std::move(cs));
}

Interval Box::interval(FeatureIndex feature) const
{
    auto it = std::lower_bound(constraints_.begin(), constraints_.end(), feature,
                               [](const Constraint& c, FeatureIndex f) { return c.feature < f; });
    if (it != constraints_.end() && it->feature == feature)
        return it->interval;
    return {};
}

bool Box::empty() const
{
    return std::any_of(constraints_.begin(), constraints_.end(),
                       [](const Constraint& c) { return c.interval.empty(); });
}

bool Box::contains(std::span<const double> x) const
{
    if (x.size() != static_cast<std::size_t>(dim_))
        throw InvalidInput("point dimension mismatch");
    return std::all_of(constraints_.begin(), constraints_.end(),
                       [&](const Constraint& c) { return c.interval.contains(x[c.feature]); });
}

Box Box::with_interval(FeatureIndex feature, Interval interval) const
{
    if (feature < 0 || feature >= dim_)
        throw InvalidInput("feature " + std::to_string(feature) + " out of range");
    Box out = *this;
    auto it = std::lower_bound(out.constraints_.begin(), out.constraints_.end(), feature,
                               [](const Constraint& c, FeatureIndex f) { return c.feature < f; });
    const bool present = it != out.constraints_.end() && it->feature == feature;
    if (interval.universal()) {
        if (present)
            out.constraints_.erase(it);
    } else if (present) {
        it->interval = interval;
    } else {
        out.constraints_.insert(it, Constraint{feature, interval});
    }
    return out;
}

std::optional<Box> intersect(const Box& a, const Box& b)
{
    check_dims(a, b);
    const auto ca = a.constraints();
    const auto cb = b.constraints();
    std::vector<Constraint> merged;
    merged.reserve(ca.size() + cb.size());

    std::size_t i = 0, j = 0;
    while (i < ca.size() || j < cb.size()) {
        Constraint next;
        if (j == cb.size() || (i < ca.size() && ca[i].feature < cb[j].feature)) {
            next = ca[i++];
        } else if (i == ca.size() || cb[j].feature < ca[i].feature) {
            next = cb[j++];
        } else {
            next = {ca[i].feature, intersect(ca[i].interval, cb[j].interval)};
            ++i;
            ++j;
        }
        if (next.interval.empty())
            return std::nullopt;
        merged.push_back(next);
    }
    return Box(a.dim(), std::move(merged));
}

bool intersects(const Box& a, const Box& b)
{
    check_dims(a, b);
    const auto ca = a.constraints();
    const auto cb = b.constraints();
    std::size_t i = 0, j = 0;
    while (i < ca.size() && j < cb.size()) {
        if (ca[i].feature < cb[j].feature) {
            if (ca[i++].interval.empty())
                return false;
        } else if (cb[j].feature < ca[i].feature) {
            if (cb[j++].interval.empty())
                return false;
        } else {
            if (intersect(ca[i++].interval, cb[j++].interval).empty())
                return false;
        }
    }
    for (; i < ca.size(); ++i)
        if (ca[i].interval.empty())
            return false;
    for (; j < cb.size(); ++j)
        if (cb[j].interval.empty())
            return false;
    return true;
}

BoxDistance point_box_distance(std::span<const double> x, const Box& b)
{
    if (x.size() != static_cast<std::size_t>(b.dim()))
        throw InvalidInput("point dimension mismatch");
    if (b.empty())
        throw InvalidInput("distance to an empty box");
    BoxDistance out;
    out.per_feature.assign(x.size(), 0.0);
    for (const auto& c : b.constraints()) {
        const double dist = coordinate_distance(x[c.feature], c.interval);
        out.per_feature[c.feature] = dist;
        out.norm = std::max(out.norm, dist);
    }
    return out;
}

double linf_distance(std::span<const double> x, const Box& b)
{
    if (x.size() != static_cast<std::size_t>(b.dim()))
        throw InvalidInput("point dimension mismatch");
    if (b.empty())
        throw InvalidInput("distance to an empty box");
    double norm = 0.0;
    for (const auto& c : b.constraints())
        norm = std::max(norm, coordinate_distance(x[c.feature], c.interval));
    return norm;
}

bool box_intersects_ball(std::span<const double> x, double eps, const Box& b)
{
    if (b.empty())
        return false;
    return linf_distance(x, b) <= eps;
}

std::string to_string(const Interval& interval)
{
    std::ostringstream os;
    os.precision(17);
    os << '(' << interval.lower << ", " << interval.upper << ']';
    return os.str();
}

std::string to_string(const Box& box)
{
    std::string out = "{";
    bool first = true;
    for (const auto& c : box.constraints()) {
        if (!first)
            out += ", ";
        first = false;
        out += "f" + std::to_string(c.feature) + ":" + to_string(c.interval);
    }
    return out + "}";
}

}  // namespace treeverify
