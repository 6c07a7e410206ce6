#include "box_join.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>

namespace treeverify::detail {

DenseBoxes::DenseBoxes(int dim, std::size_t reserve) : dim_(dim)
{
    lower_.reserve(reserve * stride());
    upper_.reserve(reserve * stride());
}

void DenseBoxes::push_back(const Box& box)
{
    const std::size_t base = lower_.size();
    lower_.resize(base + stride(), -kInfinity);
    upper_.resize(base + stride(), kInfinity);
    for (const auto& c : box.constraints()) {
        lower_[base + static_cast<std::size_t>(c.feature)] = c.interval.lower;
        upper_[base + static_cast<std::size_t>(c.feature)] = c.interval.upper;
    }
    ++count_;
}

namespace {

using Index = std::uint32_t;

// Recursive split of space into half-open cells (lo, hi]. A box goes to every
// cell it meets; an intersecting pair is reported only in the cell holding
// the lower corner of its intersection, so each pair is seen once.
class PairJoin {
public:
    PairJoin(const DenseBoxes& a, const DenseBoxes& b, const std::function<bool(std::size_t, std::size_t)>& visit)
        : a_(a), b_(b), visit_(visit), d_(a.dim()),
          lo_(static_cast<std::size_t>(d_), -kInfinity), hi_(static_cast<std::size_t>(d_), kInfinity)
    {}

    bool run()
    {
        std::vector<Index> ai(a_.size()), bi(b_.size());
        for (Index i = 0; i < ai.size(); ++i)
            ai[i] = i;
        for (Index i = 0; i < bi.size(); ++i)
            bi[i] = i;
        return recurse(ai, bi, 0);
    }

private:
    static constexpr std::size_t kBrutePairs = 4096;
    static constexpr int kMaxDepth = 64;

    struct Split {
        int feature = -1;
        double value = 0.0;
        std::size_t cost = 0;
    };

    bool recurse(const std::vector<Index>& ai, const std::vector<Index>& bi, int depth)
    {
        if (ai.empty() || bi.empty())
            return true;
        const std::size_t pairs = ai.size() * bi.size();
        if (pairs <= kBrutePairs || depth >= kMaxDepth)
            return brute(ai, bi);

        const Split s = choose_split(ai, bi);
        if (s.feature < 0 || s.cost >= pairs)
            return brute(ai, bi);

        const auto f = static_cast<std::size_t>(s.feature);
        std::vector<Index> al, bl, ar, br;
        for (Index i : ai) {
            if (a_.lower(i, s.feature) < s.value)
                al.push_back(i);
            if (a_.upper(i, s.feature) > s.value)
                ar.push_back(i);
        }
        for (Index j : bi) {
            if (b_.lower(j, s.feature) < s.value)
                bl.push_back(j);
            if (b_.upper(j, s.feature) > s.value)
                br.push_back(j);
        }

        const double saved_hi = hi_[f];
        hi_[f] = s.value;
        const bool go_on = recurse(al, bl, depth + 1);
        hi_[f] = saved_hi;
        if (!go_on)
            return false;
        al = {};
        bl = {};
        const double saved_lo = lo_[f];
        lo_[f] = s.value;
        const bool done = recurse(ar, br, depth + 1);
        lo_[f] = saved_lo;
        return done;
    }

    Split choose_split(const std::vector<Index>& ai, const std::vector<Index>& bi)
    {
        Split best;
        best.cost = std::numeric_limits<std::size_t>::max();
        std::vector<double> candidates;
        for (int f = 0; f < d_; ++f) {
            const double lo = lo_[static_cast<std::size_t>(f)];
            const double hi = hi_[static_cast<std::size_t>(f)];
            candidates.clear();
            for (Index i : ai)
                if (const double l = a_.lower(i, f); l > lo && l < hi)
                    candidates.push_back(l);
            for (Index j : bi)
                if (const double l = b_.lower(j, f); l > lo && l < hi)
                    candidates.push_back(l);
            if (candidates.empty())
                continue;
            auto mid = candidates.begin() + static_cast<std::ptrdiff_t>(candidates.size() / 2);
            std::nth_element(candidates.begin(), mid, candidates.end());
            const double s = *mid;

            std::size_t al = 0, ar = 0, bl = 0, br = 0;
            for (Index i : ai) {
                al += a_.lower(i, f) < s;
                ar += a_.upper(i, f) > s;
            }
            for (Index j : bi) {
                bl += b_.lower(j, f) < s;
                br += b_.upper(j, f) > s;
            }
            const std::size_t cost = std::max(al * bl, ar * br);
            if (cost < best.cost)
                best = {f, s, cost};
        }
        return best;
    }

    bool brute(const std::vector<Index>& ai, const std::vector<Index>& bi)
    {
        for (Index i : ai) {
            for (Index j : bi) {
                bool hit = true;
                for (int f = 0; f < d_ && hit; ++f) {
                    const double l = std::max(a_.lower(i, f), b_.lower(j, f));
                    const double r = std::min(a_.upper(i, f), b_.upper(j, f));
                    const auto uf = static_cast<std::size_t>(f);
                    hit = l < r && lo_[uf] <= l && l < hi_[uf];
                }
                if (hit && !visit_(i, j))
                    return false;
            }
        }
        return true;
    }

    const DenseBoxes& a_;
    const DenseBoxes& b_;
    const std::function<bool(std::size_t, std::size_t)>& visit_;
    int d_;
    std::vector<double> lo_;
    std::vector<double> hi_;
};

}  // namespace

bool for_each_intersecting_pair(const DenseBoxes& a, const DenseBoxes& b,
                                const std::function<bool(std::size_t, std::size_t)>& visit)
{
    if (a.dim() != b.dim())
        throw InvalidInput("box sets have different dimensions");
    return PairJoin(a, b, visit).run();
}

}  // namespace treeverify::detail
