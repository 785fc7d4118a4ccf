#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "common.hpp"

namespace stint {

/// Enumerates unordered point pairs at distance <= radius using a uniform
/// bucket grid, so near-linear in the pair count rather than O(n^2).
class ClosePairScanner {
public:
    ClosePairScanner(const std::vector<Point>& points, double radius)
        : points_(points), radius_(radius) {
        if (!(radius > 0.0)) throw ValidationError("pair scan radius must be positive");
        buckets_.reserve(points.size());
        for (std::uint32_t i = 0; i < points.size(); ++i)
            buckets_[key_of(points[i])].push_back(i);
    }

    /// Calls f(i, j, distance) once per unordered pair with i < j.
    template <class F>
    void for_each(F&& f) const {
        const double r2 = radius_ * radius_;
        for (const auto& [key, cell] : buckets_) {
            // Within-bucket pairs.
            for (std::size_t a = 0; a < cell.size(); ++a)
                for (std::size_t b = a + 1; b < cell.size(); ++b)
                    emit(cell[a], cell[b], r2, f);
            // Forward half-neighbourhood; each bucket pair visited once.
            std::int64_t bx = unpack_x(key), by = unpack_y(key);
            for (auto [dx, dy] : kForward) {
                auto it = buckets_.find(pack(bx + dx, by + dy));
                if (it == buckets_.end()) continue;
                for (std::uint32_t a : cell)
                    for (std::uint32_t b : it->second)
                        emit(a, b, r2, f);
            }
        }
    }

private:
    static constexpr std::pair<int, int> kForward[4] = {{1, 0}, {-1, 1}, {0, 1}, {1, 1}};

    template <class F>
    void emit(std::uint32_t a, std::uint32_t b, double r2, F&& f) const {
        Point pa = points_[a], pb = points_[b];
        double dx = pa.x - pb.x, dy = pa.y - pb.y;
        double d2 = dx * dx + dy * dy;
        if (d2 > r2) return;
        if (a > b) std::swap(a, b);
        f(a, b, std::sqrt(d2));
    }

    static std::uint64_t pack(std::int64_t x, std::int64_t y) {
        return (static_cast<std::uint64_t>(x + 0x40000000LL) << 32) |
               static_cast<std::uint64_t>(y + 0x40000000LL);
    }
    static std::int64_t unpack_x(std::uint64_t k) {
        return static_cast<std::int64_t>(k >> 32) - 0x40000000LL;
    }
    static std::int64_t unpack_y(std::uint64_t k) {
        return static_cast<std::int64_t>(k & 0xFFFFFFFFULL) - 0x40000000LL;
    }
    std::uint64_t key_of(Point p) const {
        return pack(static_cast<std::int64_t>(std::floor(p.x / radius_)),
                    static_cast<std::int64_t>(std::floor(p.y / radius_)));
    }

    const std::vector<Point>& points_;
    double radius_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
};

/// Number of unordered pairs with |t_i - t_j| <= lag, via a sorted two-pointer
/// sweep. Exact inclusive comparisons.
inline std::uint64_t count_time_close_pairs(std::vector<double> times, double lag) {
    std::sort(times.begin(), times.end());
    std::uint64_t count = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (j < i + 1) j = i + 1;
        while (j < times.size() && times[j] - times[i] <= lag) ++j;
        count += j - i - 1;
    }
    return count;
}

} // namespace stint
