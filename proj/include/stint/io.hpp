#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"

namespace stint {

// ---------------------------------------------------------------------------
// CSV primitives. Plain comma-separated text, no quoting; fields are trimmed.

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
    int require_column(const std::string& name, const std::string& file_kind) const {
        int c = column(name);
        if (c < 0)
            throw ValidationError(file_kind + " file is missing required column '" + name + "'");
        return c;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return out;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && s.size() > 0;
}

} // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split_csv_line(line);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    if (!have_header) throw ValidationError("file '" + path + "' is empty");
    return t;
}

// ---------------------------------------------------------------------------
// Events CSV: columns id,x,y,t and an optional mark column.

struct EventLoadOptions {
    double coord_scale = 1.0; // 1e-3 converts metre inputs to kilometres
    enum class DayAnchor { MidInterval, Jitter, AsIs } anchor = DayAnchor::MidInterval;
    std::uint64_t jitter_seed = 0;
};

struct LoadedEvents {
    PointPattern pattern;
    LoadReport report;
};

/// Reads events, applies the day-to-time convention, validates against the
/// window, and returns the sorted pattern plus a per-row rejection report.
///
/// Whole-number times are treated as 0-based day indices covering the
/// interval (d, d+1]. MidInterval places each at d + 0.5; Jitter draws
/// d + U(0,1]; AsIs keeps values untouched. Patterns with any fractional
/// time are always kept as-is.
inline LoadedEvents load_events_csv(const std::string& path, const Window& window,
                                    const EventLoadOptions& opts = {}) {
    CsvTable t = read_csv(path);
    int c_id = t.require_column("id", "events");
    int c_x = t.require_column("x", "events");
    int c_y = t.require_column("y", "events");
    int c_t = t.require_column("t", "events");
    int c_mark = t.column("mark");

    LoadedEvents out;
    std::vector<Event> events;
    std::vector<std::size_t> rows;
    bool all_integral = true;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& f = t.rows[r];
        std::size_t row_no = r + 1;
        std::size_t need = static_cast<std::size_t>(std::max({c_id, c_x, c_y, c_t, c_mark})) + 1;
        if (f.size() < need) {
            out.report.rejected.emplace_back(row_no, "too few fields");
            continue;
        }
        Event e;
        e.id = f[static_cast<std::size_t>(c_id)];
        double x, y, tv;
        if (!detail::parse_double(f[static_cast<std::size_t>(c_x)], x) ||
            !detail::parse_double(f[static_cast<std::size_t>(c_y)], y) ||
            !detail::parse_double(f[static_cast<std::size_t>(c_t)], tv)) {
            out.report.rejected.emplace_back(row_no, "unparsable numeric field");
            continue;
        }
        e.location = {x * opts.coord_scale, y * opts.coord_scale};
        e.t = tv;
        if (c_mark >= 0) e.mark = f[static_cast<std::size_t>(c_mark)];
        if (tv != std::floor(tv)) all_integral = false;
        events.push_back(std::move(e));
        rows.push_back(row_no);
    }

    if (all_integral && !events.empty() && opts.anchor != EventLoadOptions::DayAnchor::AsIs) {
        if (opts.anchor == EventLoadOptions::DayAnchor::MidInterval) {
            for (Event& e : events) e.t += 0.5;
            out.report.time_note = "whole-number day indices mapped to day + 0.5";
        } else {
            RngStream rng(opts.jitter_seed, 0xA11CEULL);
            for (Event& e : events) e.t += rng.uniform_open0();
            out.report.time_note = "whole-number day indices jittered uniformly within their day";
        }
    } else {
        out.report.time_note = "times used as given";
    }

    out.pattern = make_pattern(window, std::move(events), &out.report, &rows);
    return out;
}

inline void write_events_csv(const std::string& path, const PointPattern& pattern) {
    std::ofstream outf(path);
    if (!outf) throw ValidationError("cannot write file '" + path + "'");
    bool any_mark = false;
    for (const Event& e : pattern.events) any_mark |= !e.mark.empty();
    outf << (any_mark ? "id,x,y,t,mark\n" : "id,x,y,t\n");
    char buf[96];
    for (const Event& e : pattern.events) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g", e.location.x, e.location.y, e.t);
        outf << e.id << ',' << buf;
        if (any_mark) outf << ',' << e.mark;
        outf << '\n';
    }
    if (!outf) throw ValidationError("failed writing file '" + path + "'");
}

// ---------------------------------------------------------------------------
// GeoJSON: window polygons and per-cell polygons.

namespace detail {

inline Ring json_ring(const nlohmann::json& arr, double scale) {
    Ring r;
    for (const auto& pt : arr) {
        if (!pt.is_array() || pt.size() < 2)
            throw ValidationError("GeoJSON ring coordinate is not an [x, y] pair");
        r.push_back({pt[0].get<double>() * scale, pt[1].get<double>() * scale});
    }
    return r;
}

inline void collect_polygons(const nlohmann::json& geom, double scale,
                             std::vector<PolygonRings>& out) {
    std::string type = geom.value("type", "");
    if (type == "Polygon") {
        PolygonRings poly;
        for (const auto& ring : geom.at("coordinates")) poly.push_back(json_ring(ring, scale));
        out.push_back(std::move(poly));
    } else if (type == "MultiPolygon") {
        for (const auto& polyj : geom.at("coordinates")) {
            PolygonRings poly;
            for (const auto& ring : polyj) poly.push_back(json_ring(ring, scale));
            out.push_back(std::move(poly));
        }
    } else if (type == "Feature") {
        collect_polygons(geom.at("geometry"), scale, out);
    } else if (type == "FeatureCollection") {
        for (const auto& f : geom.at("features")) collect_polygons(f, scale, out);
    } else if (type == "GeometryCollection") {
        for (const auto& g : geom.at("geometries")) collect_polygons(g, scale, out);
    } else {
        throw ValidationError("GeoJSON geometry type '" + type + "' is not a polygon");
    }
}

} // namespace detail

/// Reads every polygon in a GeoJSON document.
inline std::vector<PolygonRings> load_polygons_geojson(const std::string& path,
                                                       double coord_scale = 1.0) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("file '" + path + "' is not valid JSON: " + e.what());
    }
    std::vector<PolygonRings> polys;
    detail::collect_polygons(j, coord_scale, polys);
    if (polys.empty()) throw ValidationError("file '" + path + "' contains no polygons");
    return polys;
}

/// Reads every polygon in a GeoJSON document as the observation region.
inline Window load_window_geojson(const std::string& path, double t_max,
                                  double coord_scale = 1.0) {
    return make_window(load_polygons_geojson(path, coord_scale), t_max);
}

/// Reads per-cell polygons keyed by a `cell_id` (or `id`) feature property.
inline std::unordered_map<std::string, std::vector<Ring>>
load_cell_geometry_geojson(const std::string& path, double coord_scale = 1.0) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("file '" + path + "' is not valid JSON: " + e.what());
    }
    if (j.value("type", "") != "FeatureCollection")
        throw ValidationError("cell geometry must be a GeoJSON FeatureCollection");
    std::unordered_map<std::string, std::vector<Ring>> out;
    for (const auto& f : j.at("features")) {
        const auto& props = f.at("properties");
        std::string id;
        if (props.contains("cell_id"))
            id = props.at("cell_id").is_string() ? props.at("cell_id").get<std::string>()
                                                 : props.at("cell_id").dump();
        else if (props.contains("id"))
            id = props.at("id").is_string() ? props.at("id").get<std::string>()
                                            : props.at("id").dump();
        else
            throw ValidationError("cell feature lacks a cell_id property");
        std::vector<PolygonRings> polys;
        detail::collect_polygons(f.at("geometry"), coord_scale, polys);
        std::vector<Ring>& rings = out[id];
        for (PolygonRings& poly : polys)
            for (std::size_t k = 0; k < poly.size(); ++k) {
                Ring ring = poly[k];
                detail::normalize_ring(ring, k == 0, k == 0 ? "cell outer" : "cell hole");
                rings.push_back(std::move(ring));
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ESRI ASCII raster mask. Nonzero, non-NODATA cells are inside W.

inline RasterMask load_raster_ascii(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file '" + path + "'");
    RasterMask m;
    double nodata = -9999.0;
    bool centre_x = false, centre_y = false;
    std::string key;
    // Header: key/value pairs until the first purely numeric row token.
    for (int i = 0; i < 6; ++i) {
        std::streampos pos = in.tellg();
        if (!(in >> key)) throw ValidationError("raster '" + path + "' has a truncated header");
        std::string lower;
        for (char c : key) lower.push_back(static_cast<char>(std::tolower(c)));
        if (lower == "ncols") in >> m.ncols;
        else if (lower == "nrows") in >> m.nrows;
        else if (lower == "xllcorner") in >> m.xll;
        else if (lower == "yllcorner") in >> m.yll;
        else if (lower == "xllcenter") { in >> m.xll; centre_x = true; }
        else if (lower == "yllcenter") { in >> m.yll; centre_y = true; }
        else if (lower == "cellsize") in >> m.cell;
        else if (lower == "nodata_value") { in >> nodata; --i; continue; }
        else { in.seekg(pos); break; }
        if (!in) throw ValidationError("raster '" + path + "' has an unreadable header value");
    }
    // NODATA may follow the six mandatory keys.
    std::streampos pos = in.tellg();
    if (in >> key) {
        std::string lower;
        for (char c : key) lower.push_back(static_cast<char>(std::tolower(c)));
        if (lower == "nodata_value") in >> nodata;
        else in.seekg(pos);
    }
    in.clear();
    if (m.ncols <= 0 || m.nrows <= 0 || !(m.cell > 0))
        throw ValidationError("raster '" + path + "' has invalid dimensions");
    if (centre_x) m.xll -= 0.5 * m.cell;
    if (centre_y) m.yll -= 0.5 * m.cell;
    m.inside.assign(static_cast<std::size_t>(m.ncols) * m.nrows, 0);
    // Data rows run north to south; row 0 of the mask is the southernmost.
    for (int r = 0; r < m.nrows; ++r) {
        int row = m.nrows - 1 - r;
        for (int c = 0; c < m.ncols; ++c) {
            double v;
            if (!(in >> v))
                throw ValidationError("raster '" + path + "' has too few data values");
            if (v != nodata && v != 0.0)
                m.inside[static_cast<std::size_t>(row) * m.ncols + c] = 1;
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Grid assembly from cells/periods CSV plus optional cell polygons.

inline CovariateGrid load_grid_csv(const std::string& cells_path, const std::string& periods_path,
                                   const Window& window,
                                   const std::optional<std::string>& cells_geojson = std::nullopt,
                                   double coord_scale = 1.0) {
    CsvTable ct = read_csv(cells_path);
    int c_id = ct.require_column("cell_id", "cells");
    int c_area = ct.require_column("area_km2", "cells");
    int c_pop = ct.require_column("population", "cells");
    std::vector<int> cell_cov_cols;
    std::vector<std::string> cov_names;
    for (std::size_t i = 0; i < ct.header.size(); ++i) {
        int ii = static_cast<int>(i);
        if (ii == c_id || ii == c_area || ii == c_pop) continue;
        cell_cov_cols.push_back(ii);
        cov_names.push_back(ct.header[i]);
    }

    CsvTable pt = read_csv(periods_path);
    int p_id = pt.require_column("period_id", "periods");
    int p_start = pt.require_column("start_day", "periods");
    int p_end = pt.require_column("end_day", "periods");
    std::vector<int> period_cov_cols;
    for (std::size_t i = 0; i < pt.header.size(); ++i) {
        int ii = static_cast<int>(i);
        if (ii == p_id || ii == p_start || ii == p_end) continue;
        period_cov_cols.push_back(ii);
        cov_names.push_back(pt.header[i]);
    }

    std::unordered_map<std::string, std::vector<Ring>> geom;
    if (cells_geojson) geom = load_cell_geometry_geojson(*cells_geojson, coord_scale);

    auto grab = [](const std::vector<std::string>& row, int col, const char* what,
                   const std::string& where) {
        double v;
        if (static_cast<std::size_t>(col) >= row.size() ||
            !detail::parse_double(row[static_cast<std::size_t>(col)], v))
            throw ValidationError(std::string("cannot parse ") + what + " in " + where);
        return v;
    };

    std::vector<GridCell> cells;
    for (std::size_t r = 0; r < ct.rows.size(); ++r) {
        const auto& row = ct.rows[r];
        GridCell c;
        if (static_cast<std::size_t>(c_id) >= row.size() || row[static_cast<std::size_t>(c_id)].empty())
            throw ValidationError("cells row " + std::to_string(r + 1) + " lacks a cell_id");
        c.id = row[static_cast<std::size_t>(c_id)];
        std::string where = "cells row '" + c.id + "'";
        c.area = grab(row, c_area, "area_km2", where);
        c.population = grab(row, c_pop, "population", where);
        for (int col : cell_cov_cols) c.covariates.push_back(grab(row, col, "covariate", where));
        if (auto it = geom.find(c.id); it != geom.end()) c.rings = it->second;
        else if (!geom.empty())
            throw ValidationError("cell '" + c.id + "' has no polygon in the geometry file");
        cells.push_back(std::move(c));
    }

    std::vector<GridPeriod> periods;
    for (std::size_t r = 0; r < pt.rows.size(); ++r) {
        const auto& row = pt.rows[r];
        GridPeriod p;
        if (static_cast<std::size_t>(p_id) >= row.size() || row[static_cast<std::size_t>(p_id)].empty())
            throw ValidationError("periods row " + std::to_string(r + 1) + " lacks a period_id");
        p.id = row[static_cast<std::size_t>(p_id)];
        std::string where = "periods row '" + p.id + "'";
        p.start = grab(row, p_start, "start_day", where);
        p.end = grab(row, p_end, "end_day", where);
        for (int col : period_cov_cols) p.covariates.push_back(grab(row, col, "covariate", where));
        periods.push_back(std::move(p));
    }

    return make_grid(std::move(cells), std::move(periods), std::move(cov_names), window);
}

} // namespace stint
