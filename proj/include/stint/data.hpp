#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "common.hpp"
#include "geometry.hpp"
#include "rng.hpp"

namespace stint {

struct Event {
    std::string id;
    Point location;
    double t = 0.0;
    std::string mark; // optional free-form label, carried through untouched
};

/// Row-level ingestion outcome: what was kept, what was dropped and why.
struct LoadReport {
    std::size_t accepted = 0;
    std::vector<std::pair<std::size_t, std::string>> rejected; // (1-based data row, reason)
    std::string time_note; // how raw day values were mapped to event times
};

/// Events inside a window, sorted by time (ties keep input order).
struct PointPattern {
    Window window;
    std::vector<Event> events;

    std::size_t size() const { return events.size(); }

    std::vector<double> times() const {
        std::vector<double> t(events.size());
        for (std::size_t i = 0; i < events.size(); ++i) t[i] = events[i].t;
        return t;
    }
};

/// Validates events against the window and study period, drops offenders
/// into `report`, and returns the time-sorted pattern.
inline PointPattern make_pattern(Window window, std::vector<Event> events,
                                 LoadReport* report = nullptr,
                                 const std::vector<std::size_t>* source_rows = nullptr) {
    std::vector<Event> kept;
    kept.reserve(events.size());
    std::unordered_set<std::string> seen_ids;
    seen_ids.reserve(events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        Event& e = events[i];
        std::size_t row = source_rows ? (*source_rows)[i] : i + 1;
        auto reject = [&](const std::string& why) {
            if (report) report->rejected.emplace_back(row, why);
        };
        if (e.id.empty()) { reject("empty event id"); continue; }
        if (!seen_ids.insert(e.id).second) { reject("duplicate event id '" + e.id + "'"); continue; }
        if (!std::isfinite(e.location.x) || !std::isfinite(e.location.y) || !std::isfinite(e.t)) {
            reject("non-finite coordinate or time");
            continue;
        }
        if (!(e.t > 0.0) || e.t > window.t_max) {
            reject("time outside the study period (0, t_max]");
            continue;
        }
        if (!window.contains(e.location)) {
            reject("location outside the observation window");
            continue;
        }
        kept.push_back(std::move(e));
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    if (report) report->accepted = kept.size();
    PointPattern p;
    p.window = std::move(window);
    p.events = std::move(kept);
    return p;
}

/// Subset of the pattern carrying the given mark, order and window unchanged.
/// An empty result is legal (callers may warn); it is not an error.
inline PointPattern filter_by_mark(const PointPattern& pattern, const std::string& mark) {
    PointPattern out;
    out.window = pattern.window;
    for (const Event& e : pattern.events)
        if (e.mark == mark) out.events.push_back(e);
    return out;
}

/// Reassigns the observed times to the observed locations under a random
/// permutation; ids and marks stay attached to their locations. Result is
/// re-sorted by time.
inline PointPattern permute_times(const PointPattern& pattern, RngStream& rng) {
    std::vector<double> t = pattern.times();
    rng.shuffle(t);
    PointPattern out;
    out.window = pattern.window;
    out.events = pattern.events;
    for (std::size_t i = 0; i < t.size(); ++i) out.events[i].t = t[i];
    std::stable_sort(out.events.begin(), out.events.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
    return out;
}

// ---------------------------------------------------------------------------
// Covariate grid: a partition of W into cells crossed with a partition of the
// study period. Carries population offsets and endemic covariates.

struct GridCell {
    std::string id;
    double area = 0.0;       // km^2, renormalised so cell areas sum to |W|
    double population = 0.0;
    std::vector<Ring> rings; // empty means "use the window geometry"
    BBox bounds;
    std::vector<double> covariates;
};

struct GridPeriod {
    std::string id;
    double start = 0.0;
    double end = 0.0;
    std::vector<double> covariates;
    double duration() const { return end - start; }
};

struct CovariateGrid {
    std::vector<GridCell> cells;
    std::vector<GridPeriod> periods;
    std::vector<std::string> covariate_names; // cell covariates then period covariates
    double t_max = 0.0;

    std::size_t n_rows() const { return cells.size() * periods.size(); }
    std::size_t row(std::size_t k, std::size_t l) const { return k * periods.size() + l; }

    /// Covariate vector for (cell k, period l), in covariate_names order.
    std::vector<double> covariate_row(std::size_t k, std::size_t l) const {
        std::vector<double> z = cells[k].covariates;
        z.insert(z.end(), periods[l].covariates.begin(), periods[l].covariates.end());
        return z;
    }

    /// Index of the cell containing p, or -1. With single-cell grids the
    /// window itself is the cell.
    int cell_of(Point p, const Window& w) const {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const GridCell& c = cells[k];
            if (c.rings.empty()) {
                if (w.contains(p)) return static_cast<int>(k);
                continue;
            }
            if (!c.bounds.contains(p)) continue;
            bool inside = false;
            for (const Ring& r : c.rings)
                if (point_in_ring(p, r)) inside = !inside;
            if (inside) return static_cast<int>(k);
        }
        return -1;
    }

    /// Index of the period containing t, i.e. start < t <= end. Returns -1
    /// outside the study period.
    int period_of(double t) const {
        if (!(t > 0.0) || t > t_max) return -1;
        // Periods are contiguous and sorted; binary search on end times.
        std::size_t lo = 0, hi = periods.size();
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (periods[mid].end < t) lo = mid + 1; else hi = mid;
        }
        if (lo == periods.size()) return -1;
        return t > periods[lo].start ? static_cast<int>(lo) : -1;
    }
};

/// Assembles and validates a grid. Cell areas must match |W| within 0.1%
/// and are then renormalised to sum to |W| exactly. Periods must tile
/// (0, t_max] without gaps.
inline CovariateGrid make_grid(std::vector<GridCell> cells, std::vector<GridPeriod> periods,
                               std::vector<std::string> covariate_names, const Window& window) {
    if (cells.empty()) throw ValidationError("grid needs at least one cell");
    if (periods.empty()) throw ValidationError("grid needs at least one period");

    std::unordered_set<std::string> ids;
    double pop_total = 0.0;
    KahanSum area_sum;
    for (GridCell& c : cells) {
        if (!ids.insert(c.id).second)
            throw ValidationError("duplicate cell_id '" + c.id + "'");
        if (!(c.area > 0.0))
            throw ValidationError("cell '" + c.id + "' has nonpositive area");
        if (c.population < 0.0)
            throw ValidationError("cell '" + c.id + "' has negative population");
        if (c.rings.empty() && cells.size() > 1)
            throw ValidationError("cell '" + c.id + "' lacks geometry; multi-cell grids need polygons");
        c.bounds = BBox{};
        for (const Ring& r : c.rings)
            for (Point p : r) c.bounds.expand(p);
        pop_total += c.population;
        area_sum.add(c.area);
    }
    if (!(pop_total > 0.0)) throw ValidationError("total population must be positive");
    double declared = area_sum.value();
    if (!nearly_equal(declared, window.area, 1e-3))
        throw ValidationError("cell areas sum to " + std::to_string(declared) +
                              " but the window measures " + std::to_string(window.area));
    double scale = window.area / declared;
    for (GridCell& c : cells) c.area *= scale;

    std::sort(periods.begin(), periods.end(),
              [](const GridPeriod& a, const GridPeriod& b) { return a.start < b.start; });
    double tol = 1e-9 * std::max(1.0, window.t_max);
    if (std::abs(periods.front().start) > tol)
        throw ValidationError("first period must start at day 0");
    for (std::size_t l = 0; l < periods.size(); ++l) {
        if (!(periods[l].duration() > 0.0))
            throw ValidationError("period '" + periods[l].id + "' has nonpositive duration");
        if (l + 1 < periods.size() && std::abs(periods[l].end - periods[l + 1].start) > tol)
            throw ValidationError("periods '" + periods[l].id + "' and '" + periods[l + 1].id +
                                  "' do not tile the study span");
    }
    if (std::abs(periods.back().end - window.t_max) > 1e-6 * std::max(1.0, window.t_max))
        throw ValidationError("last period must end at t_max");
    // Snap the endpoints so period lookup is exact at the seams.
    periods.front().start = 0.0;
    periods.back().end = window.t_max;

    std::size_t n_cov = covariate_names.size();
    for (const GridCell& c : cells) {
        if (c.covariates.size() != cells.front().covariates.size())
            throw ValidationError("cell '" + c.id + "' has a different covariate count");
        for (double v : c.covariates)
            if (!std::isfinite(v)) throw ValidationError("cell '" + c.id + "' has non-finite covariate");
    }
    for (const GridPeriod& p : periods) {
        if (p.covariates.size() != periods.front().covariates.size())
            throw ValidationError("period '" + p.id + "' has a different covariate count");
        for (double v : p.covariates)
            if (!std::isfinite(v)) throw ValidationError("period '" + p.id + "' has non-finite covariate");
    }
    std::size_t have = cells.front().covariates.size() + periods.front().covariates.size();
    if (have != n_cov)
        throw ValidationError("covariate name count does not match covariate columns");

    CovariateGrid g;
    g.cells = std::move(cells);
    g.periods = std::move(periods);
    g.covariate_names = std::move(covariate_names);
    g.t_max = window.t_max;
    return g;
}

} // namespace stint
