#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "pairs.hpp"

namespace stint {

// ---------------------------------------------------------------------------
// Knox close-pair statistic.

struct KnoxStat {
    double delta = 0.0;
    double tau = 0.0;
    std::uint64_t n = 0;
    std::uint64_t total_pairs = 0; // n(n-1)/2
    std::uint64_t space_close = 0; // spatial margin
    std::uint64_t time_close = 0;  // temporal margin
    std::uint64_t close_close = 0; // the test statistic
    double expected = 0.0;         // space_close * time_close / total_pairs

    std::uint64_t space_close_time_far() const { return space_close - close_close; }
    std::uint64_t time_close_space_far() const { return time_close - close_close; }
    std::uint64_t far_far() const {
        return total_pairs - space_close - time_close + close_close;
    }
};

namespace detail {

inline void require_thresholds(double delta, double tau) {
    if (!(delta > 0.0)) throw ValidationError("delta must be positive");
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
}

} // namespace detail

/// Margin-product expectation for the close-close count under independence
/// of the space and time labels.
inline double knox_expected_count(std::uint64_t space_close, std::uint64_t time_close,
                                  std::uint64_t total_pairs) {
    if (total_pairs == 0) throw ValidationError("knox needs at least 2 events");
    return static_cast<double>(space_close) * static_cast<double>(time_close) /
           static_cast<double>(total_pairs);
}

/// Counts unordered pairs close in space (d <= delta), in time (|dt| <= tau),
/// and in both. The margin product expectation assumes independence.
inline KnoxStat knox_statistic(const PointPattern& pattern, double delta, double tau) {
    detail::require_thresholds(delta, tau);
    std::size_t n = pattern.size();
    if (n < 2) throw ValidationError("knox needs at least 2 events");

    KnoxStat s;
    s.delta = delta;
    s.tau = tau;
    s.n = n;
    s.total_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;

    std::vector<Point> locs(n);
    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) {
        locs[i] = pattern.events[i].location;
        times[i] = pattern.events[i].t;
    }
    ClosePairScanner scan(locs, delta);
    std::uint64_t space = 0, both = 0;
    scan.for_each([&](std::uint32_t i, std::uint32_t j, double) {
        ++space;
        if (std::abs(times[i] - times[j]) <= tau) ++both;
    });
    s.space_close = space;
    s.close_close = both;
    s.time_close = count_time_close_pairs(times, tau);
    s.expected = knox_expected_count(s.space_close, s.time_close, s.total_pairs);
    return s;
}

/// Replicate closure for the Knox permutation test. The spatially close
/// pair list never changes when times are permuted, so it is cached once.
class KnoxPermuter {
public:
    KnoxPermuter(const PointPattern& pattern, double delta, double tau) : tau_(tau) {
        detail::require_thresholds(delta, tau);
        std::vector<Point> locs(pattern.size());
        for (std::size_t i = 0; i < locs.size(); ++i) locs[i] = pattern.events[i].location;
        ClosePairScanner scan(locs, delta);
        scan.for_each([&](std::uint32_t i, std::uint32_t j, double) {
            pairs_.emplace_back(i, j);
        });
    }

    double operator()(const std::vector<double>& times) const {
        std::uint64_t both = 0;
        for (auto [i, j] : pairs_)
            if (std::abs(times[i] - times[j]) <= tau_) ++both;
        return static_cast<double>(both);
    }

    std::size_t cached_pairs() const { return pairs_.size(); }

private:
    double tau_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
};

// ---------------------------------------------------------------------------
// Standardised Mantel statistic: Pearson correlation between the pairwise
// spatial and temporal distance vectors over unordered pairs.

struct MantelStat {
    double r = 0.0;
    std::uint64_t n = 0;
    std::uint64_t pairs = 0;
    double mean_space = 0.0, sd_space = 0.0;
    double mean_time = 0.0, sd_time = 0.0;
};

namespace detail {

struct DistanceMoments {
    double mean = 0.0;
    double sd = 0.0; // divisor m - 1
};

inline DistanceMoments moments_of(const KahanSum& sum, const KahanSum& sumsq, std::uint64_t m) {
    DistanceMoments d;
    d.mean = sum.value() / static_cast<double>(m);
    double ss = sumsq.value() - static_cast<double>(m) * d.mean * d.mean;
    d.sd = std::sqrt(std::max(ss, 0.0) / static_cast<double>(m - 1));
    return d;
}

} // namespace detail

inline MantelStat mantel_statistic(const PointPattern& pattern) {
    std::size_t n = pattern.size();
    if (n < 3) throw ValidationError("mantel needs at least 3 events");
    KahanSum sx, sxx, sy, syy, sxy;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double x = distance(pattern.events[i].location, pattern.events[j].location);
            double y = std::abs(pattern.events[i].t - pattern.events[j].t);
            sx.add(x);
            sxx.add(x * x);
            sy.add(y);
            syy.add(y * y);
            sxy.add(x * y);
        }
    std::uint64_t m = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    auto mx = detail::moments_of(sx, sxx, m);
    auto my = detail::moments_of(sy, syy, m);
    if (!(mx.sd > 0.0))
        throw ValidationError("mantel undefined: all pairwise spatial distances are equal");
    if (!(my.sd > 0.0))
        throw ValidationError("mantel undefined: all pairwise temporal distances are equal");
    MantelStat s;
    s.n = n;
    s.pairs = m;
    s.mean_space = mx.mean;
    s.sd_space = mx.sd;
    s.mean_time = my.mean;
    s.sd_time = my.sd;
    s.r = (sxy.value() - static_cast<double>(m) * mx.mean * my.mean) /
          (static_cast<double>(m - 1) * mx.sd * my.sd);
    return s;
}

/// Replicate closure for the Mantel permutation test. Both distance-vector
/// means and spreads are invariant under time permutation (the multisets do
/// not change), so only the cross sum is recomputed per replicate. Spatial
/// distances are cached when the pair count is moderate.
class MantelPermuter {
public:
    explicit MantelPermuter(const PointPattern& pattern,
                            std::size_t cache_limit = std::size_t{8} << 20) {
        MantelStat obs = mantel_statistic(pattern);
        n_ = obs.n;
        m_ = obs.pairs;
        mean_space_ = obs.mean_space;
        sd_space_ = obs.sd_space;
        mean_time_ = obs.mean_time;
        sd_time_ = obs.sd_time;
        locs_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) locs_[i] = pattern.events[i].location;
        if (m_ <= cache_limit) {
            dist_.reserve(m_);
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    dist_.push_back(distance(locs_[i], locs_[j]));
        }
    }

    double operator()(const std::vector<double>& times) const {
        KahanSum sxy;
        if (!dist_.empty()) {
            std::size_t k = 0;
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    sxy.add(dist_[k++] * std::abs(times[i] - times[j]));
        } else {
            for (std::size_t i = 0; i < n_; ++i)
                for (std::size_t j = i + 1; j < n_; ++j)
                    sxy.add(distance(locs_[i], locs_[j]) * std::abs(times[i] - times[j]));
        }
        return (sxy.value() - static_cast<double>(m_) * mean_space_ * mean_time_) /
               (static_cast<double>(m_ - 1) * sd_space_ * sd_time_);
    }

private:
    std::size_t n_ = 0;
    std::uint64_t m_ = 0;
    double mean_space_ = 0, sd_space_ = 0, mean_time_ = 0, sd_time_ = 0;
    std::vector<Point> locs_;
    std::vector<double> dist_;
};

// ---------------------------------------------------------------------------
// Space-time K surface with Ripley spatial and reflection temporal edge
// corrections, evaluated on a grid of (delta, tau) thresholds.

struct KSurface {
    std::vector<double> deltas; // strictly increasing
    std::vector<double> taus;   // strictly increasing
    std::vector<double> k;      // row-major (delta index major)
    std::vector<double> k_space;
    std::vector<double> k_time;
    std::vector<double> d;      // k - k_space (x) k_time
    double sum_d = 0.0;         // omnibus interaction statistic

    double at(std::size_t di, std::size_t ti, const std::vector<double>& v) const {
        return v[di * taus.size() + ti];
    }
    double at(std::size_t di, std::size_t ti) const { return at(di, ti, k); }
};

namespace detail {

inline void validate_kfun_grid(const std::vector<double>& deltas, const std::vector<double>& taus,
                               const Window& w) {
    if (deltas.empty() || taus.empty())
        throw ValidationError("kfun needs nonempty delta and tau grids");
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        if (!(deltas[i] > 0.0)) throw ValidationError("kfun deltas must be positive");
        if (i && !(deltas[i] > deltas[i - 1]))
            throw ValidationError("kfun deltas must be strictly increasing");
    }
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] > 0.0)) throw ValidationError("kfun taus must be positive");
        if (i && !(taus[i] > taus[i - 1]))
            throw ValidationError("kfun taus must be strictly increasing");
    }
    if (!(taus.back() < w.t_max))
        throw ValidationError("kfun taus must stay below the study-period length");
    double diam = std::hypot(w.bounds.width(), w.bounds.height());
    if (!(deltas.back() <= diam))
        throw ValidationError("kfun deltas exceed the window diameter");
}

/// Index of the smallest grid value >= x, or -1 when x exceeds the grid.
inline int bin_of(const std::vector<double>& grid, double x) {
    auto it = std::lower_bound(grid.begin(), grid.end(), x);
    if (it == grid.end()) return -1;
    return static_cast<int>(it - grid.begin());
}

} // namespace detail

/// Spatially close pair with both ordered Ripley weights, cached for reuse
/// across permutation replicates (weights depend only on locations).
struct WeightedPair {
    std::uint32_t i, j;
    std::uint16_t dbin; // smallest delta index containing the pair
    double w_i, w_j;    // Ripley weights centred at i and at j
};

class KfunEngine {
public:
    KfunEngine(const PointPattern& pattern, std::vector<double> deltas, std::vector<double> taus)
        : deltas_(std::move(deltas)), taus_(std::move(taus)), t_max_(pattern.window.t_max) {
        detail::validate_kfun_grid(deltas_, taus_, pattern.window);
        n_ = pattern.size();
        if (n_ < 2) throw ValidationError("kfun needs at least 2 events");
        area_ = pattern.window.area;
        std::vector<Point> locs(n_);
        times_ = pattern.times();
        for (std::size_t i = 0; i < n_; ++i) locs[i] = pattern.events[i].location;

        ClosePairScanner scan(locs, deltas_.back());
        scan.for_each([&](std::uint32_t i, std::uint32_t j, double dist) {
            int db = detail::bin_of(deltas_, dist);
            if (db < 0) return;
            WeightedPair p;
            p.i = i;
            p.j = j;
            p.dbin = static_cast<std::uint16_t>(db);
            p.w_i = ripley_weight(locs[i], dist, pattern.window);
            p.w_j = ripley_weight(locs[j], dist, pattern.window);
            pairs_.push_back(p);
        });

        // Spatial marginal: permutation-invariant.
        std::vector<double> acc_s(deltas_.size(), 0.0);
        for (const WeightedPair& p : pairs_) acc_s[p.dbin] += p.w_i + p.w_j;
        k_space_.assign(deltas_.size(), 0.0);
        double norm_pairs = static_cast<double>(n_) * static_cast<double>(n_ - 1);
        double cum = 0.0;
        for (std::size_t di = 0; di < deltas_.size(); ++di) {
            cum += acc_s[di];
            k_space_[di] = area_ / norm_pairs * cum;
        }
        // Temporal marginal: invariant too (the time multiset is fixed).
        k_time_ = temporal_k(times_);
    }

    /// K_t on the tau grid for the given times.
    std::vector<double> temporal_k(const std::vector<double>& times) const {
        std::vector<std::size_t> order(times.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });
        std::vector<double> acc(taus_.size(), 0.0);
        double tau_max = taus_.back();
        for (std::size_t a = 0; a < order.size(); ++a) {
            double ta = times[order[a]];
            for (std::size_t b = a + 1; b < order.size(); ++b) {
                double dt = times[order[b]] - ta;
                if (dt > tau_max) break;
                int tb = detail::bin_of(taus_, dt);
                if (tb < 0) break;
                acc[static_cast<std::size_t>(tb)] += temporal_weight(ta, dt, t_max_) +
                                                     temporal_weight(times[order[b]], dt, t_max_);
            }
        }
        std::vector<double> kt(taus_.size(), 0.0);
        double norm_pairs = static_cast<double>(n_) * static_cast<double>(n_ - 1);
        double cum = 0.0;
        for (std::size_t ti = 0; ti < taus_.size(); ++ti) {
            cum += acc[ti];
            kt[ti] = t_max_ / norm_pairs * cum;
        }
        return kt;
    }

    KSurface surface(const std::vector<double>& times) const {
        std::size_t nd = deltas_.size(), nt = taus_.size();
        std::vector<double> acc(nd * nt, 0.0);
        for (const WeightedPair& p : pairs_) {
            double dt = std::abs(times[p.i] - times[p.j]);
            int tb = detail::bin_of(taus_, dt);
            if (tb < 0) continue;
            double joint = p.w_i * temporal_weight(times[p.i], dt, t_max_) +
                           p.w_j * temporal_weight(times[p.j], dt, t_max_);
            acc[p.dbin * nt + static_cast<std::size_t>(tb)] += joint;
        }
        KSurface s;
        s.deltas = deltas_;
        s.taus = taus_;
        s.k.assign(nd * nt, 0.0);
        s.k_space = k_space_;
        s.k_time = k_time_;
        s.d.assign(nd * nt, 0.0);
        double norm = area_ * t_max_ / (static_cast<double>(n_) * static_cast<double>(n_ - 1));
        KahanSum sum_d;
        for (std::size_t di = 0; di < nd; ++di) {
            double row_cum = 0.0;
            for (std::size_t ti = 0; ti < nt; ++ti) {
                row_cum += acc[di * nt + ti];
                double below = di ? s.k[(di - 1) * nt + ti] / norm : 0.0;
                s.k[di * nt + ti] = norm * (row_cum + below);
                s.d[di * nt + ti] = s.k[di * nt + ti] - s.k_space[di] * s.k_time[ti];
                sum_d.add(s.d[di * nt + ti]);
            }
        }
        s.sum_d = sum_d.value();
        return s;
    }

    /// Omnibus statistic: sum of D over the grid under the given times.
    double operator()(const std::vector<double>& times) const { return surface(times).sum_d; }

    const std::vector<double>& observed_times() const { return times_; }
    std::size_t cached_pairs() const { return pairs_.size(); }

private:
    std::vector<double> deltas_, taus_;
    double t_max_ = 0.0;
    double area_ = 0.0;
    std::size_t n_ = 0;
    std::vector<double> times_;
    std::vector<WeightedPair> pairs_;
    std::vector<double> k_space_, k_time_;
};

inline KSurface k_surface(const PointPattern& pattern, std::vector<double> deltas,
                          std::vector<double> taus) {
    KfunEngine eng(pattern, std::move(deltas), std::move(taus));
    return eng.surface(eng.observed_times());
}

} // namespace stint
