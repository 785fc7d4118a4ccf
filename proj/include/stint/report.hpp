#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "classical.hpp"
#include "common.hpp"
#include "diagnostics.hpp"
#include "model.hpp"
#include "permute.hpp"
#include "simulate.hpp"

namespace stint {

using ordered_json = nlohmann::ordered_json;

// Reports must be byte-stable across reruns and thread counts, so nothing
// volatile (timestamps, durations, host names) belongs in them. Timing goes
// to the run log instead.

inline void write_json_file(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

inline ordered_json summary_of(const std::vector<double>& values) {
    ordered_json j;
    j["count"] = values.size();
    if (values.empty()) return j;
    KahanSum s;
    for (double v : values) s.add(v);
    double mean = s.value() / static_cast<double>(values.size());
    KahanSum ss;
    for (double v : values) ss.add((v - mean) * (v - mean));
    double sd = values.size() > 1
                    ? std::sqrt(ss.value() / static_cast<double>(values.size() - 1))
                    : 0.0;
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    j["mean"] = mean;
    j["sd"] = sd;
    j["min"] = lo;
    j["max"] = hi;
    return j;
}

inline ordered_json mc_json(const PermutationResult& mc) {
    ordered_json j;
    j["observed"] = mc.observed;
    j["p_value"] = mc.p_value;
    j["resolution"] = mc.resolution;
    j["alternative"] = "upper";
    j["replicates_requested"] = mc.requested;
    j["replicates_failed"] = mc.failed;
    j["replicate_summary"] = summary_of(mc.replicates);
    return j;
}

inline ordered_json knox_json(const KnoxTest& t, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "knox";
    j["manifest"] = manifest;
    j["n"] = t.observed.n;
    j["delta"] = t.observed.delta;
    j["tau"] = t.observed.tau;
    ordered_json table;
    table["close_close"] = t.observed.close_close;
    table["close_space_only"] = t.observed.space_close_time_far();
    table["close_time_only"] = t.observed.time_close_space_far();
    table["far_far"] = t.observed.far_far();
    j["pair_table"] = table;
    j["space_close"] = t.observed.space_close;
    j["time_close"] = t.observed.time_close;
    j["total_pairs"] = t.observed.total_pairs;
    j["expected_close_close"] = t.observed.expected;
    j["test"] = mc_json(t.mc);
    return j;
}

inline ordered_json mantel_json(const MantelTest& t, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "mantel";
    j["manifest"] = manifest;
    j["n"] = t.observed.n;
    j["pairs"] = t.observed.pairs;
    j["r"] = t.observed.r;
    j["mean_space"] = t.observed.mean_space;
    j["sd_space"] = t.observed.sd_space;
    j["mean_time"] = t.observed.mean_time;
    j["sd_time"] = t.observed.sd_time;
    j["test"] = mc_json(t.mc);
    return j;
}

inline ordered_json kfun_json(const KfunTest& t, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "kfun";
    j["manifest"] = manifest;
    j["deltas"] = t.observed.deltas;
    j["taus"] = t.observed.taus;
    j["sum_d"] = t.observed.sum_d;
    j["test"] = mc_json(t.mc);
    return j;
}

inline void write_kfun_csv(const std::string& path, const KSurface& s) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "delta,tau,K,Ks,Kt,D\n";
    char buf[192];
    for (std::size_t di = 0; di < s.deltas.size(); ++di)
        for (std::size_t ti = 0; ti < s.taus.size(); ++ti) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                          s.deltas[di], s.taus[ti], s.at(di, ti, s.k), s.k_space[di],
                          s.k_time[ti], s.at(di, ti, s.d));
            out << buf;
        }
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

inline void write_replicates_csv(const std::string& path, const PermutationResult& mc) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "replicate,statistic\n";
    char buf[64];
    for (std::size_t r = 0; r < mc.replicates.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", r + 1, mc.replicates[r]);
        out << buf;
    }
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

namespace detail {

inline constexpr double kWald95 = 1.959963984540054;

inline double two_sided_normal_p(double estimate, double se) {
    return std::erfc(std::abs(estimate / se) / std::sqrt(2.0));
}

} // namespace detail

inline ordered_json fit_json(const FitResult& fit, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "fit";
    j["manifest"] = manifest;
    ordered_json coefs = ordered_json::array();
    for (std::size_t m = 0; m < fit.names.size(); ++m) {
        ordered_json c;
        c["name"] = fit.names[m];
        double est = fit.beta(static_cast<Eigen::Index>(m));
        double se = fit.se_beta(static_cast<Eigen::Index>(m));
        c["estimate"] = est;
        c["rate_ratio"] = std::exp(est);
        if (std::isfinite(se)) {
            c["se"] = se;
            c["rate_ratio_ci"] = {std::exp(est - detail::kWald95 * se),
                                  std::exp(est + detail::kWald95 * se)};
            c["p_value"] = detail::two_sided_normal_p(est, se);
        } else {
            c["se"] = nullptr;
            c["rate_ratio_ci"] = nullptr;
            c["p_value"] = nullptr;
        }
        coefs.push_back(c);
    }
    j["endemic_coefficients"] = coefs;
    j["epidemic"] = fit.epidemic;
    if (fit.epidemic) {
        j["gamma0"] = fit.gamma0;
        if (std::isfinite(fit.se_gamma0)) {
            j["se_gamma0"] = fit.se_gamma0;
            j["gamma0_ci"] = {fit.gamma0 - detail::kWald95 * fit.se_gamma0,
                              fit.gamma0 + detail::kWald95 * fit.se_gamma0};
        } else {
            j["se_gamma0"] = nullptr;
            j["gamma0_ci"] = nullptr;
        }
        j["reproduction_number"] = fit.reproduction;
        j["loglik_endemic"] = fit.loglik_endemic;
        j["lr_stat"] = fit.lr_stat;
    }
    j["loglik"] = fit.loglik;
    ordered_json conv;
    conv["converged"] = fit.converged;
    conv["iterations"] = fit.iterations;
    conv["relative_gradient"] = fit.relative_gradient;
    j["convergence"] = conv;
    j["warnings"] = fit.warnings;
    return j;
}

inline ordered_json pixel_residual_json(const PixelResidualGrid& px) {
    ordered_json p;
    p["pixel"] = px.pixel;
    p["nx"] = px.nx;
    p["ny"] = px.ny;
    p["expected_total"] = px.expected_total;
    p["observed_total"] = px.observed_total;
    double worst = 0.0;
    std::size_t informative = 0, orphaned = 0;
    for (std::size_t c = 0; c < px.pearson.size(); ++c) {
        if (px.expected[c] > 0.0) {
            ++informative;
            worst = std::max(worst, std::abs(px.pearson[c]));
        } else if (px.observed[c] > 0.0) {
            ++orphaned; // events on zero expected mass: infinite residual
        }
    }
    p["pixels_with_mass"] = informative;
    p["pixels_events_without_mass"] = orphaned;
    p["max_abs_pearson"] = worst;
    return p;
}

inline ordered_json temporal_residual_json(const TemporalResiduals& tr) {
    ordered_json t;
    t["n"] = tr.u.size();
    t["ks"] = tr.ks;
    t["ks_bound_5pct"] = tr.bound;
    t["within_bound"] = tr.ks <= tr.bound;
    return t;
}

inline ordered_json residual_json(const PixelResidualGrid& px, const TemporalResiduals& tr) {
    ordered_json j;
    j["pixel"] = pixel_residual_json(px);
    j["temporal"] = temporal_residual_json(tr);
    return j;
}

inline void write_pixel_residuals_csv(const std::string& path, const PixelResidualGrid& px) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "x_center,y_center,expected,observed,pearson\n";
    char buf[160];
    for (int iy = 0; iy < px.ny; ++iy)
        for (int ix = 0; ix < px.nx; ++ix) {
            std::size_t c = px.at(ix, iy);
            if (px.expected[c] == 0.0 && px.observed[c] == 0.0) continue;
            double cx = px.x0 + (ix + 0.5) * px.pixel;
            double cy = px.y0 + (iy + 0.5) * px.pixel;
            // %.17g renders the infinite-residual sentinel as "inf".
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", cx, cy,
                          px.expected[c], px.observed[c], px.pearson[c]);
            out << buf;
        }
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

inline void write_temporal_residuals_csv(const std::string& path, const PointPattern& pattern,
                                         const TemporalResiduals& tr) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "id,t,u\n";
    char buf[96];
    for (std::size_t i = 0; i < tr.u.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", pattern.events[i].t, tr.u[i]);
        out << pattern.events[i].id << ',' << buf;
    }
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

inline ordered_json epitest_json(const ModelTest& t, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "epitest";
    j["manifest"] = manifest;
    j["statistic"] = t.statistic == ModelStatistic::Reproduction ? "reproduction_number"
                                                                 : "likelihood_ratio";
    j["observed_reproduction_number"] = t.observed_fit.reproduction;
    j["observed_lr_stat"] = t.observed_fit.lr_stat;
    j["observed_gamma0"] = t.observed_fit.gamma0;
    j["test"] = mc_json(t.mc);
    j["replicate_reproduction_summary"] = summary_of(t.replicate_tr);
    // Observed minus permutation-null mean: the excess reproduction the
    // permutation test is judging.
    if (!t.replicate_tr.empty()) {
        KahanSum s;
        for (double v : t.replicate_tr) s.add(v);
        double null_mean = s.value() / static_cast<double>(t.replicate_tr.size());
        j["null_mean_reproduction_number"] = null_mean;
        j["reproduction_excess_over_null"] = t.observed_fit.reproduction - null_mean;
    }
    j["replicate_lr_summary"] = summary_of(t.replicate_lr);
    j["fit"] = fit_json(t.observed_fit, ordered_json::object());
    j["fit"].erase("manifest");
    j["fit"].erase("report");
    return j;
}

inline void write_model_replicates_csv(const std::string& path, const ModelTest& t) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "replicate,reproduction_number,lr_stat\n";
    char buf[96];
    for (std::size_t r = 0; r < t.replicate_tr.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r + 1, t.replicate_tr[r],
                      t.replicate_lr[r]);
        out << buf;
    }
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

inline ordered_json simulate_json(const SimulatedPattern& sim, const ordered_json& manifest) {
    ordered_json j;
    j["report"] = "simulate";
    j["manifest"] = manifest;
    j["events"] = sim.pattern.size();
    j["immigrants"] = sim.immigrants;
    j["offspring"] = sim.offspring;
    j["reproduction_number"] = sim.reproduction;
    j["warnings"] = sim.warnings;
    return j;
}

inline void write_provenance_csv(const std::string& path, const SimulatedPattern& sim) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write file '" + path + "'");
    out << "id,parent_id,generation\n";
    for (const Provenance& p : sim.provenance)
        out << p.id << ',' << p.parent << ',' << p.generation << '\n';
    if (!out) throw ValidationError("failed writing file '" + path + "'");
}

} // namespace stint
