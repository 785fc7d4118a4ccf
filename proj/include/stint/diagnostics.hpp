#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "model.hpp"

namespace stint {

/// Pearson residuals (observed - expected) / sqrt(expected) of the fitted
/// intensity on a pixel grid over the window's bounding box. Expected mass
/// is distributed exactly: pixel sums reproduce the fitted integral.
struct PixelResidualGrid {
    double x0 = 0.0, y0 = 0.0;
    double pixel = 0.0;
    int nx = 0, ny = 0;
    std::vector<double> expected; // row-major, y index major
    std::vector<double> observed;
    std::vector<double> pearson; // 0 where expected = observed = 0; +inf where
                                 // events fall on zero expected mass
    double expected_total = 0.0;
    double observed_total = 0.0;

    std::size_t at(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) +
               static_cast<std::size_t>(ix);
    }
};

inline PixelResidualGrid pixel_residuals(const PointPattern& pattern, const CovariateGrid& grid,
                                         const ModelSpec& spec, const ModelEngine& engine,
                                         const Eigen::VectorXd& beta, double gamma0,
                                         double pixel) {
    if (!(pixel > 0.0)) throw ValidationError("pixel size must be positive");
    const Window& w = pattern.window;
    PixelResidualGrid out;
    out.pixel = pixel;
    out.x0 = w.bounds.xmin;
    out.y0 = w.bounds.ymin;
    out.nx = std::max(1, static_cast<int>(std::ceil(w.bounds.width() / pixel - 1e-12)));
    out.ny = std::max(1, static_cast<int>(std::ceil(w.bounds.height() / pixel - 1e-12)));
    std::size_t cells = static_cast<std::size_t>(out.nx) * static_cast<std::size_t>(out.ny);
    out.expected.assign(cells, 0.0);
    out.observed.assign(cells, 0.0);
    out.pearson.assign(cells, 0.0);

    // Endemic mass per cell, spread across pixels by geometric overlap. The
    // divisor is the cell's geometric area so the pixel masses add up to the
    // cell total exactly, whatever the declared area was.
    Eigen::VectorXd rate = engine.endemic_row_rates(beta);
    for (std::size_t k = 0; k < grid.cells.size(); ++k) {
        const GridCell& cell = grid.cells[k];
        double cell_mass = 0.0;
        for (std::size_t l = 0; l < grid.periods.size(); ++l)
            cell_mass += cell.population * grid.periods[l].duration() *
                         rate(static_cast<Eigen::Index>(grid.row(k, l)));
        if (cell_mass == 0.0) continue;
        const std::vector<Ring>& rings = cell.rings.empty() ? w.rings : cell.rings;
        double geom_area;
        BBox box;
        if (!rings.empty()) {
            KahanSum a;
            for (const Ring& r : rings) {
                a.add(ring_signed_area(r));
                for (Point p : r) box.expand(p);
            }
            geom_area = a.value();
        } else {
            geom_area = w.area; // raster window, single cell
            box = w.bounds;
        }
        if (!(geom_area > 0.0)) throw ComputeError("cell geometry has nonpositive area");
        int ix0 = std::max(0, static_cast<int>(std::floor((box.xmin - out.x0) / pixel)));
        int ix1 = std::min(out.nx - 1, static_cast<int>(std::floor((box.xmax - out.x0) / pixel)));
        int iy0 = std::max(0, static_cast<int>(std::floor((box.ymin - out.y0) / pixel)));
        int iy1 = std::min(out.ny - 1, static_cast<int>(std::floor((box.ymax - out.y0) / pixel)));
        for (int iy = iy0; iy <= iy1; ++iy)
            for (int ix = ix0; ix <= ix1; ++ix) {
                double px0 = out.x0 + ix * pixel, py0 = out.y0 + iy * pixel;
                double overlap;
                if (!rings.empty()) {
                    KahanSum acc;
                    for (const Ring& r : rings)
                        acc.add(ring_signed_area(clip_ring_to_rect(r, px0, py0,
                                                                   px0 + pixel, py0 + pixel)));
                    overlap = acc.value();
                } else {
                    overlap = window_rect_area(w, px0, py0, px0 + pixel, py0 + pixel);
                }
                if (overlap > 0.0)
                    out.expected[out.at(ix, iy)] += cell_mass * overlap / geom_area;
            }
    }

    // Epidemic mass per event, spread by clipped-disc overlap with each pixel.
    // gamma0 may be negative under the identity link; the mass bookkeeping is
    // the same either way.
    if (spec.epidemic && gamma0 != 0.0) {
        const std::vector<double>& areas = engine.disc_areas();
        for (std::size_t j = 0; j < pattern.size(); ++j) {
            double span = std::min(spec.tau, w.t_max - pattern.events[j].t);
            if (span <= 0.0 || areas[j] <= 0.0) continue;
            Point c = pattern.events[j].location;
            int ix0 = std::max(0, static_cast<int>(std::floor((c.x - spec.delta - out.x0) / pixel)));
            int ix1 = std::min(out.nx - 1,
                               static_cast<int>(std::floor((c.x + spec.delta - out.x0) / pixel)));
            int iy0 = std::max(0, static_cast<int>(std::floor((c.y - spec.delta - out.y0) / pixel)));
            int iy1 = std::min(out.ny - 1,
                               static_cast<int>(std::floor((c.y + spec.delta - out.y0) / pixel)));
            for (int iy = iy0; iy <= iy1; ++iy)
                for (int ix = ix0; ix <= ix1; ++ix) {
                    double px0 = out.x0 + ix * pixel, py0 = out.y0 + iy * pixel;
                    double a = disc_window_rect_area(c, spec.delta, w, px0, py0, px0 + pixel,
                                                     py0 + pixel);
                    if (a != 0.0) out.expected[out.at(ix, iy)] += gamma0 * span * a;
                }
        }
    }

    for (const Event& e : pattern.events) {
        int ix = std::min(out.nx - 1,
                          std::max(0, static_cast<int>(std::floor((e.location.x - out.x0) / pixel))));
        int iy = std::min(out.ny - 1,
                          std::max(0, static_cast<int>(std::floor((e.location.y - out.y0) / pixel))));
        out.observed[out.at(ix, iy)] += 1.0;
    }

    KahanSum etot, otot;
    for (std::size_t c = 0; c < cells; ++c) {
        etot.add(out.expected[c]);
        otot.add(out.observed[c]);
        if (out.expected[c] > 0.0)
            out.pearson[c] = (out.observed[c] - out.expected[c]) / std::sqrt(out.expected[c]);
        else if (out.observed[c] > 0.0)
            out.pearson[c] = std::numeric_limits<double>::infinity();
    }
    out.expected_total = etot.value();
    out.observed_total = otot.value();
    return out;
}

/// Temporal residuals: the fitted cumulative intensity rescaled to (0, 1]
/// at each event time. Under a correct model these behave like sorted
/// uniforms; the KS distance against uniformity comes with the usual 5%
/// reference bound 1.358 / sqrt(n).
struct TemporalResiduals {
    std::vector<double> u;  // nondecreasing, in (0, 1]
    double ks = 0.0;        // sup distance to the uniform cdf
    double bound = 0.0;     // 1.358 / sqrt(n)
};

inline TemporalResiduals temporal_residuals(const PointPattern& pattern,
                                            const CovariateGrid& grid, const ModelSpec& spec,
                                            const ModelEngine& engine,
                                            const Eigen::VectorXd& beta, double gamma0) {
    std::size_t n = pattern.size();
    if (n == 0) throw ValidationError("temporal residuals need at least one event");
    Eigen::VectorXd rate = engine.endemic_row_rates(beta);

    // Endemic cumulative intensity is piecewise linear in t with slope
    // sum_k pop_k exp(x_kl' beta) on period l.
    std::size_t n_per = grid.periods.size();
    std::vector<double> slope(n_per, 0.0);
    for (std::size_t l = 0; l < n_per; ++l) {
        KahanSum s;
        for (std::size_t k = 0; k < grid.cells.size(); ++k)
            s.add(grid.cells[k].population * rate(static_cast<Eigen::Index>(grid.row(k, l))));
        slope[l] = s.value();
    }
    std::vector<double> cum_at_end(n_per, 0.0);
    double acc = 0.0;
    for (std::size_t l = 0; l < n_per; ++l) {
        acc += slope[l] * grid.periods[l].duration();
        cum_at_end[l] = acc;
    }
    auto endemic_cum = [&](double t) {
        int l = grid.period_of(t);
        if (l < 0) {
            if (t <= 0.0) return 0.0;
            return cum_at_end.back();
        }
        double before = l > 0 ? cum_at_end[static_cast<std::size_t>(l) - 1] : 0.0;
        return before + slope[static_cast<std::size_t>(l)] *
                            (t - grid.periods[static_cast<std::size_t>(l)].start);
    };

    const std::vector<double>& areas = engine.disc_areas();
    std::vector<double> times = pattern.times();
    auto total_cum = [&](double t) {
        double v = endemic_cum(t);
        if (spec.epidemic && gamma0 > 0.0) {
            KahanSum epi;
            for (std::size_t j = 0; j < n; ++j) {
                if (times[j] >= t) break; // times are sorted
                double span = std::min(spec.tau, grid.t_max - times[j]);
                double active = std::min(t - times[j], span);
                if (active > 0.0) epi.add(areas[j] * active);
            }
            v += gamma0 * epi.value();
        }
        return v;
    };

    double total = total_cum(grid.t_max);
    if (!(total > 0.0)) throw ComputeError("fitted cumulative intensity is not positive");
    TemporalResiduals out;
    out.u.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.u[i] = total_cum(times[i]) / total;
    double nn = static_cast<double>(n);
    double ks = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ks = std::max(ks, out.u[i] - static_cast<double>(i) / nn);
        ks = std::max(ks, static_cast<double>(i + 1) / nn - out.u[i]);
    }
    out.ks = ks;
    out.bound = 1.358 / std::sqrt(nn);
    return out;
}

} // namespace stint
