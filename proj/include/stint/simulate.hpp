#pragma once

#include <cstdint>
#include <cstdio>
#include <deque>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace stint {

struct SimulationConfig {
    std::vector<std::string> endemic_covariates; // subset of grid covariate names
    Eigen::VectorXd beta;                        // intercept first, then covariates
    double gamma0 = 0.0;
    double delta = 0.0;
    double tau = 0.0;
    std::uint64_t seed = 0;
    int max_generations = 100;
};

struct Provenance {
    std::string id;
    std::string parent; // empty for immigrants
    int generation = 0; // immigrants are generation 0
};

struct SimulatedPattern {
    PointPattern pattern;
    std::vector<Provenance> provenance; // aligned with pattern.events
    std::uint64_t immigrants = 0;
    std::uint64_t offspring = 0;
    double reproduction = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Uniform sampler over a cell's polygons: triangulated proposals with
/// even-odd rejection so holes are handled exactly. Falls back to
/// bounding-box rejection when triangulation fails or no polygon exists.
class RegionSampler {
public:
    RegionSampler(const std::vector<Ring>& rings, const Window& window) : window_(&window) {
        const std::vector<Ring>& src = rings.empty() ? window.rings : rings;
        rings_ = &src;
        if (src.empty()) {
            // Raster-only window: propose from its bounds.
            box_ = window.bounds;
            use_box_ = true;
            return;
        }
        for (const Ring& r : src)
            for (Point p : r) box_.expand(p);
        for (const Ring& r : src) {
            if (ring_signed_area(r) <= 0.0) continue; // holes are not proposal regions
            std::vector<Triangle> tris = triangulate_ring(r);
            if (tris.empty()) { triangles_.clear(); use_box_ = true; break; }
            for (const Triangle& t : tris) {
                triangles_.push_back(t);
                cum_area_ += t.area();
                cum_.push_back(cum_area_);
            }
        }
        if (triangles_.empty()) use_box_ = true;
    }

    Point draw(RngStream& rng) const {
        for (int attempt = 0; attempt < 1000000; ++attempt) {
            Point p = use_box_ ? propose_box_(rng) : propose_triangle_(rng);
            if (inside_(p)) return p;
        }
        throw ComputeError("region sampling failed to land inside the cell");
    }

private:
    Point propose_box_(RngStream& rng) const {
        return {rng.uniform(box_.xmin, box_.xmax), rng.uniform(box_.ymin, box_.ymax)};
    }
    Point propose_triangle_(RngStream& rng) const {
        double u = rng.uniform01() * cum_area_;
        std::size_t lo = 0, hi = cum_.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi) / 2;
            if (cum_[mid] < u) lo = mid + 1; else hi = mid;
        }
        const Triangle& t = triangles_[lo];
        double a = rng.uniform01(), b = rng.uniform01();
        if (a + b > 1.0) { a = 1.0 - a; b = 1.0 - b; }
        return t.a + a * (t.b - t.a) + b * (t.c - t.a);
    }
    bool inside_(Point p) const {
        if (rings_ && !rings_->empty()) {
            bool in = false;
            for (const Ring& r : *rings_)
                if (point_in_ring(p, r)) in = !in;
            return in && window_->contains(p);
        }
        return window_->contains(p);
    }

    const Window* window_;
    const std::vector<Ring>* rings_ = nullptr;
    std::vector<Triangle> triangles_;
    std::vector<double> cum_;
    double cum_area_ = 0.0;
    BBox box_;
    bool use_box_ = false;
};

} // namespace detail

/// Draws one parent's offspring: count ~ Poisson(gamma0 * |disc ∩ W| * span)
/// with span = min(tau, t_max - parent_time), locations uniform on the disc
/// clipped to the window, times uniform on (parent_time, parent_time + span].
/// A parent at or after t_max produces no offspring. The ids are left empty;
/// callers assign them once the whole pattern is known.
inline std::vector<Event> simulate_offspring(Point parent, double parent_time, double t_max,
                                             const Window& window, const SimulationConfig& cfg,
                                             RngStream& rng) {
    std::vector<Event> children;
    double span = std::min(cfg.tau, t_max - parent_time);
    if (span <= 0.0) return children;
    double area = disc_window_area(parent, cfg.delta, window);
    std::uint64_t count = rng.poisson(cfg.gamma0 * area * span);
    children.reserve(count);
    for (std::uint64_t c = 0; c < count; ++c) {
        Point child_s;
        bool placed = false;
        for (int attempt = 0; attempt < 1000000; ++attempt) {
            double ang = 2.0 * kPi * rng.uniform01();
            double rad = cfg.delta * std::sqrt(rng.uniform01());
            child_s = {parent.x + rad * std::cos(ang), parent.y + rad * std::sin(ang)};
            if (window.contains(child_s)) { placed = true; break; }
        }
        if (!placed)
            throw ComputeError("offspring placement failed: disc barely meets the window");
        Event e;
        e.location = child_s;
        e.t = parent_time + span * rng.uniform_open0();
        children.push_back(std::move(e));
    }
    return children;
}

/// Simulates the endemic-epidemic process on (0, t_max] x W as a marked
/// branching process: immigrants from the loglinear endemic rate, then
/// Poisson offspring uniform on the clipped disc and lag window of each
/// parent. Deterministic for a given seed: the endemic layer and every
/// immigrant cascade draw from their own counter streams.
inline SimulatedPattern simulate_process(const CovariateGrid& grid, const Window& window,
                                         const SimulationConfig& cfg) {
    if (!(cfg.gamma0 >= 0.0)) throw ValidationError("gamma0 must be nonnegative");
    bool epidemic = cfg.gamma0 > 0.0;
    if (epidemic && (!(cfg.delta > 0.0) || !(cfg.tau > 0.0)))
        throw ValidationError("epidemic simulation needs positive delta and tau");
    Eigen::Index p = static_cast<Eigen::Index>(1 + cfg.endemic_covariates.size());
    if (cfg.beta.size() != p)
        throw ValidationError("beta length does not match 1 + number of covariates");

    std::vector<int> cols;
    for (const std::string& name : cfg.endemic_covariates) {
        auto it = std::find(grid.covariate_names.begin(), grid.covariate_names.end(), name);
        if (it == grid.covariate_names.end())
            throw ValidationError("unknown endemic covariate '" + name + "'");
        cols.push_back(static_cast<int>(it - grid.covariate_names.begin()));
    }

    SimulatedPattern out;
    out.reproduction = reproduction_number(cfg.gamma0, cfg.delta, cfg.tau);
    if (epidemic && out.reproduction >= 1.0)
        out.warnings.push_back("offspring mean is supercritical; generation cap will truncate cascades");

    struct Raw {
        Point s;
        double t;
        std::int64_t parent; // index into raw list, -1 for immigrants
        int generation;
    };
    std::vector<Raw> raw;

    // Endemic immigrants, cell by cell and period by period.
    RngStream endemic_rng(cfg.seed, 0);
    std::vector<detail::RegionSampler> samplers;
    samplers.reserve(grid.cells.size());
    for (const GridCell& c : grid.cells) samplers.emplace_back(c.rings, window);
    for (std::size_t k = 0; k < grid.cells.size(); ++k) {
        const GridCell& cell = grid.cells[k];
        if (cell.population <= 0.0) continue;
        for (std::size_t l = 0; l < grid.periods.size(); ++l) {
            const GridPeriod& per = grid.periods[l];
            std::vector<double> z = grid.covariate_row(k, l);
            double eta = cfg.beta(0);
            for (std::size_t c = 0; c < cols.size(); ++c)
                eta += cfg.beta(static_cast<Eigen::Index>(c + 1)) *
                       z[static_cast<std::size_t>(cols[c])];
            double mean = cell.population * per.duration() * std::exp(eta);
            std::uint64_t count = endemic_rng.poisson(mean);
            for (std::uint64_t e = 0; e < count; ++e) {
                Raw ev;
                ev.s = samplers[k].draw(endemic_rng);
                ev.t = per.start + per.duration() * endemic_rng.uniform_open0();
                ev.parent = -1;
                ev.generation = 0;
                raw.push_back(ev);
            }
        }
    }
    out.immigrants = raw.size();

    // Epidemic cascades: one independent stream per immigrant, breadth-first
    // within each cascade so the draw order is well defined.
    bool hit_generation_cap = false;
    if (epidemic) {
        std::size_t n_imm = raw.size();
        for (std::size_t i = 0; i < n_imm; ++i) {
            RngStream cascade_rng(cfg.seed, 1 + static_cast<std::uint64_t>(i));
            std::deque<std::size_t> queue{i};
            while (!queue.empty()) {
                std::size_t parent = queue.front();
                queue.pop_front();
                if (raw[parent].generation >= cfg.max_generations) {
                    hit_generation_cap = true;
                    continue;
                }
                std::vector<Event> kids = simulate_offspring(raw[parent].s, raw[parent].t,
                                                             grid.t_max, window, cfg, cascade_rng);
                for (const Event& k : kids) {
                    Raw child;
                    child.s = k.location;
                    child.t = k.t;
                    child.parent = static_cast<std::int64_t>(parent);
                    child.generation = raw[parent].generation + 1;
                    raw.push_back(child);
                    queue.push_back(raw.size() - 1);
                }
            }
        }
    }
    out.offspring = raw.size() - out.immigrants;
    if (hit_generation_cap)
        out.warnings.push_back("some cascades were truncated at the generation cap");

    // Time order determines the published ids; parents resolve through it.
    std::vector<std::size_t> order(raw.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return raw[a].t < raw[b].t; });
    std::vector<std::string> id_of(raw.size());
    char buf[32];
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        std::snprintf(buf, sizeof buf, "e%06zu", rank + 1);
        id_of[order[rank]] = buf;
    }

    std::vector<Event> events;
    events.reserve(raw.size());
    out.provenance.reserve(raw.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
        const Raw& r = raw[order[rank]];
        Event e;
        e.id = id_of[order[rank]];
        e.location = r.s;
        e.t = r.t;
        events.push_back(std::move(e));
        Provenance pv;
        pv.id = id_of[order[rank]];
        pv.parent = r.parent >= 0 ? id_of[static_cast<std::size_t>(r.parent)] : "";
        pv.generation = r.generation;
        out.provenance.push_back(std::move(pv));
    }
    out.pattern = make_pattern(window, std::move(events));
    if (out.pattern.size() != raw.size())
        throw ComputeError("simulated events failed their own window validation");
    return out;
}

/// Immigrant layer only: the same endemic draws as simulate_process with the
/// epidemic component switched off, so the two agree bitwise when gamma0 = 0.
inline SimulatedPattern simulate_endemic(const CovariateGrid& grid, const Window& window,
                                         SimulationConfig cfg) {
    cfg.gamma0 = 0.0;
    cfg.delta = 0.0;
    cfg.tau = 0.0;
    return simulate_process(grid, window, cfg);
}

} // namespace stint
