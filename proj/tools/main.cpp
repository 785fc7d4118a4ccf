// Command line for the spatio-temporal interaction tests: classical
// permutation tests (knox, mantel, kfun), endemic-epidemic model fitting
// and testing (fit, epitest), and the matching simulator (simulate).
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid input or usage.
// Reports are deterministic for a given manifest; wall-clock details go to
// run.log only, so reruns stay byte-identical.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <stint/stint.hpp>

namespace fs = std::filesystem;
using stint::ordered_json;

namespace {

struct CommonArgs {
    std::string events;
    std::string window_geojson;
    std::string window_raster;
    double t_max = 0.0;
    std::string units = "km";
    std::string day_anchor = "mid";
    std::string mark;
    std::uint64_t seed = 0;
    std::string out_dir;
    int threads = 1;
};

struct TestArgs {
    std::uint64_t replicates = 999;
    bool replicates_csv = false;
};

struct GridArgs {
    std::string cells;
    std::string periods;
    std::string cell_geometry;
    std::vector<std::string> covariates;
};

double coord_scale(const std::string& units) {
    if (units == "km") return 1.0;
    if (units == "m") return 1e-3;
    throw stint::ValidationError("units must be 'km' or 'm'");
}

stint::Window load_window(const CommonArgs& c) {
    if (!(c.t_max > 0.0)) throw stint::ValidationError("--t-max must be positive");
    bool has_poly = !c.window_geojson.empty();
    bool has_raster = !c.window_raster.empty();
    if (!has_poly && !has_raster)
        throw stint::ValidationError("provide --window (GeoJSON) or --raster (ESRI ASCII)");
    double scale = coord_scale(c.units);
    std::optional<stint::RasterMask> mask;
    if (has_raster) {
        mask = stint::load_raster_ascii(c.window_raster);
        if (scale != 1.0) {
            mask->xll *= scale;
            mask->yll *= scale;
            mask->cell *= scale;
        }
    }
    std::vector<stint::PolygonRings> polys;
    if (has_poly) polys = stint::load_polygons_geojson(c.window_geojson, scale);
    // With both sources the polygons define W and the raster is checked
    // against them for area agreement inside make_window.
    return stint::make_window(polys, c.t_max, std::move(mask));
}

stint::LoadedEvents load_events(const CommonArgs& c, const stint::Window& w) {
    stint::EventLoadOptions opts;
    opts.coord_scale = coord_scale(c.units);
    if (c.day_anchor == "mid") opts.anchor = stint::EventLoadOptions::DayAnchor::MidInterval;
    else if (c.day_anchor == "jitter") opts.anchor = stint::EventLoadOptions::DayAnchor::Jitter;
    else if (c.day_anchor == "asis") opts.anchor = stint::EventLoadOptions::DayAnchor::AsIs;
    else throw stint::ValidationError("--day-anchor must be mid, jitter, or asis");
    opts.jitter_seed = c.seed;
    stint::LoadedEvents loaded = stint::load_events_csv(c.events, w, opts);
    if (!loaded.report.rejected.empty()) {
        std::cerr << "note: dropped " << loaded.report.rejected.size() << " of "
                  << loaded.report.rejected.size() + loaded.report.accepted << " event rows\n";
        for (std::size_t i = 0; i < loaded.report.rejected.size() && i < 10; ++i)
            std::cerr << "  row " << loaded.report.rejected[i].first << ": "
                      << loaded.report.rejected[i].second << "\n";
    }
    if (!c.mark.empty()) {
        loaded.pattern = stint::filter_by_mark(loaded.pattern, c.mark);
        if (loaded.pattern.events.empty())
            std::cerr << "warning: no events carry mark '" << c.mark << "'\n";
    }
    return loaded;
}

ordered_json common_manifest(const std::string& sub, const CommonArgs& c) {
    ordered_json m;
    m["tool"] = "stint";
    m["version"] = stint::kVersion;
    m["subcommand"] = sub;
    ordered_json p;
    if (!c.events.empty()) p["events"] = c.events;
    if (!c.window_geojson.empty()) p["window"] = c.window_geojson;
    if (!c.window_raster.empty()) p["raster"] = c.window_raster;
    p["t_max"] = c.t_max;
    p["units"] = c.units;
    p["day_anchor"] = c.day_anchor;
    if (!c.mark.empty()) p["mark"] = c.mark;
    p["seed"] = c.seed;
    m["parameters"] = p;
    return m;
}

void ensure_out_dir(const std::string& dir) {
    if (dir.empty()) throw stint::ValidationError("--out directory is required");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw stint::ValidationError("cannot create output directory '" + dir + "'");
}

std::string iso_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

class RunLog {
public:
    RunLog(const std::string& out_dir, const std::string& command_line)
        : path_(out_dir + "/run.log"), start_(std::chrono::steady_clock::now()) {
        std::ofstream log(path_, std::ios::app);
        log << iso_now() << " start " << command_line << "\n";
    }
    ~RunLog() {
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        std::ofstream log(path_, std::ios::app);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3f", secs);
        log << iso_now() << " done wall_seconds=" << buf << "\n";
    }

private:
    std::string path_;
    std::chrono::steady_clock::time_point start_;
};

// Grid entries are plain numbers or start:stop:step ranges (stop inclusive),
// combined with commas: "0.05:0.25:0.05" or "0.1,0.2,0.5".
void append_grid_token(std::vector<double>& vals, const std::string& tok, const char* what) {
    auto bad = [&]() -> void {
        throw stint::ValidationError(std::string("cannot parse ") + what + " entry '" + tok +
                                     "' (expect a number or start:stop:step)");
    };
    if (tok.find(':') == std::string::npos) {
        try {
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) bad();
            vals.push_back(v);
        } catch (const stint::ValidationError&) {
            throw;
        } catch (...) {
            bad();
        }
        return;
    }
    double part[3];
    int k = 0;
    std::stringstream ss(tok);
    std::string piece;
    while (std::getline(ss, piece, ':')) {
        if (k >= 3) bad();
        try {
            part[k++] = std::stod(piece);
        } catch (...) {
            bad();
        }
    }
    if (k != 3) bad();
    double start = part[0], stop = part[1], step = part[2];
    if (!(step > 0.0) || stop < start)
        throw stint::ValidationError(std::string(what) + " range '" + tok +
                                     "' needs stop >= start and step > 0");
    // Slack absorbs the rounding of (stop - start) / step so the stop value
    // itself lands on the grid.
    auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
    for (long long i = 0; i <= count; ++i) vals.push_back(start + static_cast<double>(i) * step);
}

std::vector<double> parse_grid_list(const std::string& text, const char* what) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) append_grid_token(vals, tok, what);
    if (vals.empty()) throw stint::ValidationError(std::string(what) + " list is empty");
    return vals;
}

// ---------------------------------------------------------------------------
// Subcommand runners. Each takes fully resolved arguments so that manifest
// reruns share the same entry points.

void run_knox(const CommonArgs& c, const TestArgs& ta, double delta, double tau) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::LoadedEvents loaded = load_events(c, w);
    stint::PermutationPlan plan{ta.replicates, c.seed, c.threads};
    stint::KnoxTest t = stint::run_knox_test(loaded.pattern, delta, tau, plan);

    ordered_json manifest = common_manifest("knox", c);
    manifest["parameters"]["delta"] = delta;
    manifest["parameters"]["tau"] = tau;
    manifest["parameters"]["replicates"] = ta.replicates;
    manifest["parameters"]["replicates_csv"] = ta.replicates_csv;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);
    stint::write_json_file(c.out_dir + "/knox_report.json", stint::knox_json(t, manifest));
    if (ta.replicates_csv)
        stint::write_replicates_csv(c.out_dir + "/knox_replicates.csv", t.mc);

    std::cout << "knox: n=" << t.observed.n << " close_pairs=" << t.observed.close_close
              << " expected=" << t.observed.expected << " p=" << t.mc.p_value << "\n";
}

void run_mantel(const CommonArgs& c, const TestArgs& ta) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::LoadedEvents loaded = load_events(c, w);
    stint::PermutationPlan plan{ta.replicates, c.seed, c.threads};
    stint::MantelTest t = stint::run_mantel_test(loaded.pattern, plan);

    ordered_json manifest = common_manifest("mantel", c);
    manifest["parameters"]["replicates"] = ta.replicates;
    manifest["parameters"]["replicates_csv"] = ta.replicates_csv;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);
    stint::write_json_file(c.out_dir + "/mantel_report.json", stint::mantel_json(t, manifest));
    if (ta.replicates_csv)
        stint::write_replicates_csv(c.out_dir + "/mantel_replicates.csv", t.mc);

    std::cout << "mantel: n=" << t.observed.n << " r=" << t.observed.r << " p=" << t.mc.p_value
              << "\n";
}

void run_kfun(const CommonArgs& c, const TestArgs& ta, const std::string& deltas_text,
              const std::string& taus_text) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::LoadedEvents loaded = load_events(c, w);
    std::vector<double> deltas = parse_grid_list(deltas_text, "delta");
    std::vector<double> taus = parse_grid_list(taus_text, "tau");
    stint::PermutationPlan plan{ta.replicates, c.seed, c.threads};
    stint::KfunTest t = stint::run_kfun_test(loaded.pattern, deltas, taus, plan);

    ordered_json manifest = common_manifest("kfun", c);
    manifest["parameters"]["deltas"] = deltas_text;
    manifest["parameters"]["taus"] = taus_text;
    manifest["parameters"]["replicates"] = ta.replicates;
    manifest["parameters"]["replicates_csv"] = ta.replicates_csv;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);
    stint::write_json_file(c.out_dir + "/kfun_report.json", stint::kfun_json(t, manifest));
    stint::write_kfun_csv(c.out_dir + "/kfun_surface.csv", t.observed);
    if (ta.replicates_csv)
        stint::write_replicates_csv(c.out_dir + "/kfun_replicates.csv", t.mc);

    std::cout << "kfun: n=" << loaded.pattern.size() << " sum_d=" << t.observed.sum_d
              << " p=" << t.mc.p_value << "\n";
}

stint::CovariateGrid load_grid(const CommonArgs& c, const GridArgs& g, const stint::Window& w) {
    if (g.cells.empty() || g.periods.empty())
        throw stint::ValidationError("--cells and --periods are required");
    std::optional<std::string> geom;
    if (!g.cell_geometry.empty()) geom = g.cell_geometry;
    return stint::load_grid_csv(g.cells, g.periods, w, geom, coord_scale(c.units));
}

void grid_manifest(ordered_json& manifest, const GridArgs& g) {
    manifest["parameters"]["cells"] = g.cells;
    manifest["parameters"]["periods"] = g.periods;
    if (!g.cell_geometry.empty()) manifest["parameters"]["cell_geometry"] = g.cell_geometry;
    manifest["parameters"]["covariates"] = g.covariates;
}

void run_fit(const CommonArgs& c, const GridArgs& g, bool epidemic, double delta, double tau,
             double pixel_size, bool temporal) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::LoadedEvents loaded = load_events(c, w);
    stint::CovariateGrid grid = load_grid(c, g, w);
    stint::ModelSpec spec;
    spec.endemic_covariates = g.covariates;
    spec.epidemic = epidemic;
    spec.delta = delta;
    spec.tau = tau;
    stint::ModelEngine engine(loaded.pattern, grid, spec);
    stint::FitResult fit = engine.fit();

    ordered_json manifest = common_manifest("fit", c);
    grid_manifest(manifest, g);
    manifest["parameters"]["epidemic"] = epidemic;
    if (epidemic) {
        manifest["parameters"]["delta"] = delta;
        manifest["parameters"]["tau"] = tau;
    }
    if (pixel_size > 0.0) manifest["parameters"]["pixel_residuals"] = pixel_size;
    if (temporal) manifest["parameters"]["temporal_residuals"] = true;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);

    ordered_json rep = stint::fit_json(fit, manifest);
    if (pixel_size > 0.0 || temporal) {
        ordered_json resid = ordered_json::object();
        if (pixel_size > 0.0) {
            stint::PixelResidualGrid px = stint::pixel_residuals(
                loaded.pattern, grid, spec, engine, fit.beta, fit.gamma0, pixel_size);
            resid["pixel"] = stint::pixel_residual_json(px);
            stint::write_pixel_residuals_csv(c.out_dir + "/pixel_residuals.csv", px);
        }
        if (temporal) {
            stint::TemporalResiduals tr = stint::temporal_residuals(loaded.pattern, grid, spec,
                                                                    engine, fit.beta, fit.gamma0);
            resid["temporal"] = stint::temporal_residual_json(tr);
            stint::write_temporal_residuals_csv(c.out_dir + "/temporal_residuals.csv",
                                                loaded.pattern, tr);
        }
        rep["residuals"] = resid;
    }
    stint::write_json_file(c.out_dir + "/fit_report.json", rep);

    std::cout << "fit: loglik=" << fit.loglik;
    if (epidemic)
        std::cout << " gamma0=" << fit.gamma0 << " R=" << fit.reproduction
                  << " lr=" << fit.lr_stat;
    std::cout << (fit.converged ? " (converged)" : " (NOT converged)") << "\n";
    for (const std::string& w2 : fit.warnings) std::cerr << "warning: " << w2 << "\n";
}

void run_epitest(const CommonArgs& c, const GridArgs& g, const TestArgs& ta, double delta,
                 double tau, const std::string& statistic) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::LoadedEvents loaded = load_events(c, w);
    stint::CovariateGrid grid = load_grid(c, g, w);
    stint::ModelSpec spec;
    spec.endemic_covariates = g.covariates;
    spec.epidemic = true;
    spec.delta = delta;
    spec.tau = tau;
    // Canonical statistic tokens are tr (reproduction number) and lrd
    // (likelihood ratio); the long spellings stay accepted.
    stint::ModelStatistic stat;
    std::string canonical;
    if (statistic == "tr" || statistic == "reproduction") {
        stat = stint::ModelStatistic::Reproduction;
        canonical = "tr";
    } else if (statistic == "lrd" || statistic == "lr") {
        stat = stint::ModelStatistic::LikelihoodRatio;
        canonical = "lrd";
    } else {
        throw stint::ValidationError("--statistic must be 'tr' or 'lrd'");
    }
    stint::PermutationPlan plan{ta.replicates, c.seed, c.threads};
    stint::ModelTest t = stint::run_model_test(loaded.pattern, grid, spec, plan, stat);

    ordered_json manifest = common_manifest("epitest", c);
    grid_manifest(manifest, g);
    manifest["parameters"]["delta"] = delta;
    manifest["parameters"]["tau"] = tau;
    manifest["parameters"]["statistic"] = canonical;
    manifest["parameters"]["replicates"] = ta.replicates;
    manifest["parameters"]["replicates_csv"] = ta.replicates_csv;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);
    stint::write_json_file(c.out_dir + "/epitest_report.json", stint::epitest_json(t, manifest));
    if (ta.replicates_csv)
        stint::write_model_replicates_csv(c.out_dir + "/epitest_replicates.csv", t);

    std::cout << "epitest: gamma0=" << t.observed_fit.gamma0
              << " R=" << t.observed_fit.reproduction << " lr=" << t.observed_fit.lr_stat
              << " p=" << t.mc.p_value << "\n";
}

void run_simulate(const CommonArgs& c, const GridArgs& g, const std::string& beta_text,
                  double gamma0, double delta, double tau, int max_generations) {
    ensure_out_dir(c.out_dir);
    stint::Window w = load_window(c);
    stint::CovariateGrid grid = load_grid(c, g, w);
    stint::SimulationConfig cfg;
    cfg.endemic_covariates = g.covariates;
    std::vector<double> beta = parse_grid_list(beta_text, "beta");
    cfg.beta = Eigen::Map<Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    cfg.gamma0 = gamma0;
    cfg.delta = delta;
    cfg.tau = tau;
    cfg.seed = c.seed;
    cfg.max_generations = max_generations;
    // A supercritical cascade would only stop at the generation cap, so the
    // command refuses it outright rather than emitting a truncated pattern.
    double offspring_mean = stint::reproduction_number(gamma0, delta, tau);
    if (offspring_mean >= 1.0) {
        char mbuf[48];
        std::snprintf(mbuf, sizeof mbuf, "%.6g", offspring_mean);
        throw stint::ValidationError(std::string("offspring mean ") + mbuf +
                                     " is supercritical (needs gamma0*pi*delta^2*tau < 1)");
    }
    stint::SimulatedPattern sim = stint::simulate_process(grid, w, cfg);

    ordered_json manifest = common_manifest("simulate", c);
    grid_manifest(manifest, g);
    manifest["parameters"]["beta"] = beta_text;
    manifest["parameters"]["gamma0"] = gamma0;
    manifest["parameters"]["delta"] = delta;
    manifest["parameters"]["tau"] = tau;
    manifest["parameters"]["max_generations"] = max_generations;
    stint::write_json_file(c.out_dir + "/manifest.json", manifest);
    stint::write_json_file(c.out_dir + "/simulate_report.json",
                           stint::simulate_json(sim, manifest));
    stint::write_events_csv(c.out_dir + "/events.csv", sim.pattern);
    stint::write_provenance_csv(c.out_dir + "/provenance.csv", sim);

    std::cout << "simulate: events=" << sim.pattern.size() << " immigrants=" << sim.immigrants
              << " offspring=" << sim.offspring << " R=" << sim.reproduction << "\n";
    for (const std::string& w2 : sim.warnings) std::cerr << "warning: " << w2 << "\n";
}

// ---------------------------------------------------------------------------
// Manifest rerun: rebuild the argument structs from a recorded manifest and
// dispatch. --out and --threads may be overridden; nothing else changes.

void rerun_manifest(const std::string& path, const std::string& out_override, int threads) {
    std::ifstream in(path);
    if (!in) throw stint::ValidationError("cannot open manifest '" + path + "'");
    ordered_json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw stint::ValidationError(std::string("manifest is not valid JSON: ") + e.what());
    }
    ordered_json m = doc.contains("manifest") ? doc["manifest"] : doc;
    if (m.value("tool", "") != "stint")
        throw stint::ValidationError("manifest was not produced by this tool");
    std::string sub = m.value("subcommand", "");
    const ordered_json& p = m.at("parameters");

    CommonArgs c;
    c.events = p.value("events", "");
    c.window_geojson = p.value("window", "");
    c.window_raster = p.value("raster", "");
    c.t_max = p.value("t_max", 0.0);
    c.units = p.value("units", "km");
    c.day_anchor = p.value("day_anchor", "mid");
    c.mark = p.value("mark", "");
    c.seed = p.value("seed", std::uint64_t{0});
    c.out_dir = out_override;
    c.threads = threads;

    GridArgs g;
    g.cells = p.value("cells", "");
    g.periods = p.value("periods", "");
    g.cell_geometry = p.value("cell_geometry", "");
    if (p.contains("covariates")) g.covariates = p["covariates"].get<std::vector<std::string>>();

    TestArgs ta;
    ta.replicates = p.value("replicates", std::uint64_t{999});
    ta.replicates_csv = p.value("replicates_csv", false);

    if (sub == "knox") {
        run_knox(c, ta, p.at("delta").get<double>(), p.at("tau").get<double>());
    } else if (sub == "mantel") {
        run_mantel(c, ta);
    } else if (sub == "kfun") {
        run_kfun(c, ta, p.at("deltas").get<std::string>(), p.at("taus").get<std::string>());
    } else if (sub == "fit") {
        run_fit(c, g, p.value("epidemic", false), p.value("delta", 0.0), p.value("tau", 0.0),
                p.value("pixel_residuals", 0.0), p.value("temporal_residuals", false));
    } else if (sub == "epitest") {
        run_epitest(c, g, ta, p.at("delta").get<double>(), p.at("tau").get<double>(),
                    p.value("statistic", "tr"));
    } else if (sub == "simulate") {
        run_simulate(c, g, p.at("beta").get<std::string>(), p.value("gamma0", 0.0),
                     p.value("delta", 0.0), p.value("tau", 0.0), p.value("max_generations", 100));
    } else {
        throw stint::ValidationError("manifest has unknown subcommand '" + sub + "'");
    }
}

void add_common(CLI::App* app, CommonArgs& c, bool with_events = true) {
    if (with_events) app->add_option("--events", c.events, "events CSV (id,x,y,t[,mark])");
    app->add_option("--window", c.window_geojson, "observation window GeoJSON");
    app->add_option("--raster", c.window_raster, "observation window ESRI ASCII mask");
    app->add_option("--t-max", c.t_max, "study period length in days");
    app->add_option("--units", c.units, "coordinate units: km (default) or m");
    app->add_option("--day-anchor", c.day_anchor,
                    "whole-number day handling: mid (default), jitter, asis");
    if (with_events)
        app->add_option("--mark", c.mark, "keep only events carrying this mark");
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--threads", c.threads, "worker threads for replicates");
    app->add_option("--out", c.out_dir, "output directory")->required();
}

void add_test(CLI::App* app, TestArgs& t, std::uint64_t default_replicates) {
    t.replicates = default_replicates;
    app->add_option("--B,--replicates", t.replicates, "Monte Carlo permutation count");
    app->add_flag("--replicates-csv", t.replicates_csv, "write replicate statistics CSV");
}

void add_grid(CLI::App* app, GridArgs& g) {
    app->add_option("--cells", g.cells, "cells CSV (cell_id,area_km2,population,covariates...)");
    app->add_option("--periods", g.periods, "periods CSV (period_id,start_day,end_day,covariates...)");
    app->add_option("--cell-geometry", g.cell_geometry, "per-cell polygons GeoJSON");
    app->add_option("--covariates", g.covariates, "endemic covariate names")
        ->delimiter(',');
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"spatio-temporal interaction tests for point patterns"};
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", std::string("stint ") + stint::kVersion);

    std::string manifest_path, manifest_out = "stint_out";
    int manifest_threads = 1;
    app.add_option("--manifest", manifest_path, "rerun a recorded manifest");
    app.add_option("--out", manifest_out, "output directory for the manifest rerun");
    app.add_option("--threads", manifest_threads, "worker threads for the manifest rerun");

    CommonArgs c_knox, c_mantel, c_kfun, c_fit, c_epi, c_sim;
    TestArgs t_knox, t_mantel, t_kfun, t_epi;
    GridArgs g_fit, g_epi, g_sim;
    double knox_delta = 0, knox_tau = 0, epi_delta = 0, epi_tau = 0;
    std::string kfun_deltas, kfun_taus;
    std::string fit_epidemic = "off";
    double fit_delta = 0, fit_tau = 0, fit_pixel = 0;
    bool fit_temporal = false;
    std::string epi_statistic = "tr";
    std::string sim_beta;
    double sim_gamma0 = 0, sim_delta = 0, sim_tau = 0;
    int sim_maxgen = 100;

    CLI::App* knox = app.add_subcommand("knox", "close-pair contingency permutation test");
    add_common(knox, c_knox);
    add_test(knox, t_knox, 999);
    knox->add_option("--delta-km,--delta", knox_delta, "spatial closeness threshold (km)")
        ->required();
    knox->add_option("--tau-days,--tau", knox_tau, "temporal closeness threshold (days)")
        ->required();

    CLI::App* mantel = app.add_subcommand("mantel", "distance-correlation permutation test");
    add_common(mantel, c_mantel);
    add_test(mantel, t_mantel, 999);

    CLI::App* kfun = app.add_subcommand("kfun", "space-time K surface permutation test");
    add_common(kfun, c_kfun);
    add_test(kfun, t_kfun, 999);
    kfun->add_option("--deltas", kfun_deltas,
                     "spatial thresholds: numbers or start:stop:step, comma separated")
        ->required();
    kfun->add_option("--taus", kfun_taus,
                     "temporal thresholds: numbers or start:stop:step, comma separated")
        ->required();

    CLI::App* fitc = app.add_subcommand("fit", "endemic-epidemic intensity fit");
    add_common(fitc, c_fit);
    add_grid(fitc, g_fit);
    fitc->add_option("--epidemic", fit_epidemic, "epidemic component: on or off (default)");
    fitc->add_option("--delta-km,--delta", fit_delta, "epidemic spatial range (km)");
    fitc->add_option("--tau-days,--tau", fit_tau, "epidemic temporal range (days)");
    fitc->add_option("--pixel-residuals", fit_pixel,
                     "write spatial residuals on pixels of this size (km)");
    fitc->add_flag("--temporal-residuals", fit_temporal, "write temporal residual diagnostics");

    CLI::App* epi = app.add_subcommand("epitest", "model-based epidemic permutation test");
    add_common(epi, c_epi);
    add_grid(epi, g_epi);
    add_test(epi, t_epi, 199);
    epi->add_option("--delta-km,--delta", epi_delta, "epidemic spatial range (km)")->required();
    epi->add_option("--tau-days,--tau", epi_tau, "epidemic temporal range (days)")->required();
    epi->add_option("--statistic", epi_statistic, "test statistic: tr (default) or lrd");

    CLI::App* sim = app.add_subcommand("simulate", "simulate the endemic-epidemic process");
    add_common(sim, c_sim, false);
    add_grid(sim, g_sim);
    sim->add_option("--beta", sim_beta, "endemic coefficients, intercept first")->required();
    sim->add_option("--gamma0", sim_gamma0, "epidemic rate per active predecessor");
    sim->add_option("--delta-km,--delta", sim_delta, "epidemic spatial range (km)");
    sim->add_option("--tau-days,--tau", sim_tau, "epidemic temporal range (days)");
    sim->add_option("--max-generations", sim_maxgen, "cascade generation cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Bad flags and malformed values are input validation failures.
        return app.exit(e) == 0 ? 0 : 2;
    }

    std::string command_line;
    for (int i = 0; i < argc; ++i) {
        if (i) command_line += ' ';
        command_line += argv[i];
    }

    try {
        if (!manifest_path.empty()) {
            if (app.get_subcommands().size() > 0)
                throw stint::ValidationError("--manifest excludes other subcommands");
            ensure_out_dir(manifest_out);
            RunLog log(manifest_out, command_line);
            rerun_manifest(manifest_path, manifest_out, manifest_threads);
            return 0;
        }
        if (knox->parsed()) {
            ensure_out_dir(c_knox.out_dir);
            RunLog log(c_knox.out_dir, command_line);
            run_knox(c_knox, t_knox, knox_delta, knox_tau);
        } else if (mantel->parsed()) {
            ensure_out_dir(c_mantel.out_dir);
            RunLog log(c_mantel.out_dir, command_line);
            run_mantel(c_mantel, t_mantel);
        } else if (kfun->parsed()) {
            ensure_out_dir(c_kfun.out_dir);
            RunLog log(c_kfun.out_dir, command_line);
            run_kfun(c_kfun, t_kfun, kfun_deltas, kfun_taus);
        } else if (fitc->parsed()) {
            bool epidemic_on;
            if (fit_epidemic == "on") epidemic_on = true;
            else if (fit_epidemic == "off") epidemic_on = false;
            else throw stint::ValidationError("--epidemic must be 'on' or 'off'");
            ensure_out_dir(c_fit.out_dir);
            RunLog log(c_fit.out_dir, command_line);
            run_fit(c_fit, g_fit, epidemic_on, fit_delta, fit_tau, fit_pixel, fit_temporal);
        } else if (epi->parsed()) {
            ensure_out_dir(c_epi.out_dir);
            RunLog log(c_epi.out_dir, command_line);
            run_epitest(c_epi, g_epi, t_epi, epi_delta, epi_tau, epi_statistic);
        } else if (sim->parsed()) {
            ensure_out_dir(c_sim.out_dir);
            RunLog log(c_sim.out_dir, command_line);
            run_simulate(c_sim, g_sim, sim_beta, sim_gamma0, sim_delta, sim_tau, sim_maxgen);
        } else {
            std::cerr << app.help() << "\n";
            return 2;
        }
    } catch (const stint::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const stint::ComputeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
