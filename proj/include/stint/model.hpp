#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "data.hpp"
#include "geometry.hpp"
#include "pairs.hpp"

namespace stint {

/// Endemic-epidemic intensity specification. The endemic part is a loglinear
/// population-offset rate on grid cells x periods; the optional epidemic part
/// adds gamma0 per active predecessor within distance delta and lag tau.
struct ModelSpec {
    std::vector<std::string> endemic_covariates; // subset of grid covariate names
    bool epidemic = false;
    double delta = 0.0;
    double tau = 0.0;
};

struct FitOptions {
    int max_iterations = 300;
    double tolerance = 1e-6; // relative gradient criterion
};

struct FitResult {
    std::vector<std::string> names; // "(Intercept)" then covariates
    Eigen::VectorXd beta;
    Eigen::VectorXd se_beta;
    bool epidemic = false;
    double gamma0 = 0.0;
    double se_gamma0 = std::numeric_limits<double>::quiet_NaN();
    double loglik = -std::numeric_limits<double>::infinity();
    double loglik_endemic = std::numeric_limits<double>::quiet_NaN();
    double lr_stat = std::numeric_limits<double>::quiet_NaN(); // 2(l_full - l_endemic)
    double reproduction = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    int iterations = 0;
    double relative_gradient = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

/// Expected offspring per event: the epidemic rate integrated over an
/// unclipped disc and lag window.
inline double reproduction_number(double gamma0, double delta, double tau) {
    return gamma0 * kPi * delta * delta * tau;
}

/// Precomputes everything about (pattern, grid, spec) that does not depend
/// on event times, so permutation replicates can refit cheaply.
class ModelEngine {
public:
    ModelEngine(const PointPattern& pattern, const CovariateGrid& grid, ModelSpec spec,
                FitOptions options = {})
        : pattern_(&pattern), grid_(&grid), spec_(std::move(spec)), options_(options) {
        if (spec_.epidemic) {
            if (!(spec_.delta > 0.0)) throw ValidationError("epidemic model needs delta > 0");
            if (!(spec_.tau > 0.0)) throw ValidationError("epidemic model needs tau > 0");
        }
        build_design_();
        locate_events_();
        if (spec_.epidemic) build_epidemic_();
    }

    const std::vector<std::string>& coef_names() const { return names_; }
    std::size_t n_coef() const { return names_.size(); }
    const Eigen::MatrixXd& design() const { return X_; }
    const Eigen::VectorXd& exposure() const { return exposure_; }
    const std::vector<double>& disc_areas() const { return disc_area_; }
    int event_cell(std::size_t i) const { return event_cell_[i]; }

    /// Per-row endemic rate exp(x' beta), all grid rows.
    Eigen::VectorXd endemic_row_rates(const Eigen::VectorXd& beta) const {
        return (X_ * beta).array().exp();
    }

    /// Count of active predecessors per event under the given times.
    std::vector<double> active_counts(const std::vector<double>& times) const {
        std::vector<double> nact(times.size(), 0.0);
        if (!spec_.epidemic) return nact;
        for (std::size_t i = 0; i < times.size(); ++i)
            for (std::uint32_t j : neighbours_[i])
                if (times[j] < times[i] && times[i] - times[j] <= spec_.tau) nact[i] += 1.0;
        return nact;
    }

    /// lambda(s, t) under the given parameters, with the epidemic term driven
    /// by the engine's observed events. Units: events per km^2 per day.
    double conditional_intensity(Point s, double t, const Eigen::VectorXd& beta,
                                 double gamma0) const {
        int k = grid_->cell_of(s, pattern_->window);
        int l = grid_->period_of(t);
        if (k < 0 || l < 0)
            throw ValidationError("point does not locate in the covariate grid");
        const GridCell& cell = grid_->cells[static_cast<std::size_t>(k)];
        Eigen::Index row = static_cast<Eigen::Index>(
            grid_->row(static_cast<std::size_t>(k), static_cast<std::size_t>(l)));
        double lam = cell.population / cell.area * std::exp(X_.row(row).dot(beta));
        if (spec_.epidemic && gamma0 != 0.0) {
            double nact = 0.0;
            for (const Event& e : pattern_->events)
                if (e.t < t && t - e.t <= spec_.tau && distance(s, e.location) <= spec_.delta)
                    nact += 1.0;
            lam += gamma0 * nact;
        }
        return lam;
    }

    double log_likelihood(const std::vector<double>& times, const Eigen::VectorXd& beta,
                          double gamma0) const {
        return loglik_(assemble_(times), beta, gamma0);
    }

    /// Score vector: d l / d beta, with d l / d gamma0 appended for epidemic
    /// specifications.
    Eigen::VectorXd score(const std::vector<double>& times, const Eigen::VectorXd& beta,
                          double gamma0) const {
        return score_(assemble_(times), beta, gamma0);
    }

    Eigen::MatrixXd hessian(const std::vector<double>& times, const Eigen::VectorXd& beta,
                            double gamma0) const {
        return hessian_(assemble_(times), beta, gamma0);
    }

    FitResult fit() const { return fit_times(pattern_->times()); }

    /// Fits with times reassigned to the fixed locations. `warm` seeds the
    /// endemic coefficients (permutation replicates pass the observed fit).
    FitResult fit_times(const std::vector<double>& times,
                        const Eigen::VectorXd* warm = nullptr) const {
        TimesData td = assemble_(times);
        FitResult endemic = fit_endemic_(td, warm);
        if (!spec_.epidemic) return endemic;
        FitResult full = fit_full_(td, endemic);
        full.loglik_endemic = endemic.loglik;
        double lr = 2.0 * (full.loglik - endemic.loglik);
        if (lr < -1e-7)
            full.warnings.push_back("likelihood ratio came out negative; fit is suspect");
        full.lr_stat = std::max(lr, 0.0);
        full.reproduction = reproduction_number(full.gamma0, spec_.delta, spec_.tau);
        return full;
    }

private:
    struct TimesData {
        std::vector<int> event_row;    // design row per event
        Eigen::VectorXd counts;        // events per design row
        std::vector<double> active;    // N_i
        std::vector<double> lag_span;  // m_j = min(tau, t_max - t_j)
        double epi_exposure = 0.0;     // sum_j a_j m_j
    };

    void build_design_() {
        const CovariateGrid& g = *grid_;
        std::vector<int> cols;
        for (const std::string& name : spec_.endemic_covariates) {
            auto it = std::find(g.covariate_names.begin(), g.covariate_names.end(), name);
            if (it == g.covariate_names.end())
                throw ValidationError("unknown endemic covariate '" + name + "'");
            cols.push_back(static_cast<int>(it - g.covariate_names.begin()));
        }
        names_.clear();
        names_.push_back("(Intercept)");
        for (const std::string& name : spec_.endemic_covariates) names_.push_back(name);

        std::size_t rows = g.n_rows();
        std::size_t p = 1 + cols.size();
        X_.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
        exposure_.resize(static_cast<Eigen::Index>(rows));
        for (std::size_t k = 0; k < g.cells.size(); ++k)
            for (std::size_t l = 0; l < g.periods.size(); ++l) {
                std::size_t r = g.row(k, l);
                std::vector<double> z = g.covariate_row(k, l);
                X_(static_cast<Eigen::Index>(r), 0) = 1.0;
                for (std::size_t c = 0; c < cols.size(); ++c)
                    X_(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c + 1)) =
                        z[static_cast<std::size_t>(cols[c])];
                exposure_(static_cast<Eigen::Index>(r)) =
                    g.cells[k].population * g.periods[l].duration();
            }

        // Rank check on the rows that can carry information.
        std::vector<Eigen::Index> live;
        for (Eigen::Index r = 0; r < exposure_.size(); ++r)
            if (exposure_(r) > 0.0) live.push_back(r);
        if (live.empty()) throw ValidationError("no grid row has positive exposure");
        Eigen::MatrixXd Xl(static_cast<Eigen::Index>(live.size()), X_.cols());
        for (std::size_t i = 0; i < live.size(); ++i) Xl.row(static_cast<Eigen::Index>(i)) = X_.row(live[i]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xl);
        qr.setThreshold(1e-10);
        if (qr.rank() < X_.cols()) {
            Eigen::Index bad = qr.colsPermutation().indices()(X_.cols() - 1);
            throw ValidationError("endemic design is rank deficient; column '" +
                                  names_[static_cast<std::size_t>(bad)] + "' is redundant");
        }
    }

    void locate_events_() {
        const PointPattern& pat = *pattern_;
        event_cell_.resize(pat.size());
        event_density_.resize(pat.size());
        for (std::size_t i = 0; i < pat.size(); ++i) {
            int k = grid_->cell_of(pat.events[i].location, pat.window);
            if (k < 0)
                throw ValidationError("event '" + pat.events[i].id + "' falls in no grid cell");
            event_cell_[i] = k;
            const GridCell& c = grid_->cells[static_cast<std::size_t>(k)];
            event_density_[i] = c.population / c.area;
        }
    }

    void build_epidemic_() {
        const PointPattern& pat = *pattern_;
        std::vector<Point> locs(pat.size());
        for (std::size_t i = 0; i < pat.size(); ++i) locs[i] = pat.events[i].location;
        neighbours_.assign(pat.size(), {});
        if (pat.size() >= 2) {
            ClosePairScanner scan(locs, spec_.delta);
            scan.for_each([&](std::uint32_t i, std::uint32_t j, double) {
                neighbours_[i].push_back(j);
                neighbours_[j].push_back(i);
            });
        }
        disc_area_.resize(pat.size());
        for (std::size_t i = 0; i < pat.size(); ++i)
            disc_area_[i] = disc_window_area(locs[i], spec_.delta, pat.window);
    }

    TimesData assemble_(const std::vector<double>& times) const {
        if (times.size() != pattern_->size())
            throw ValidationError("times vector does not match the pattern");
        const CovariateGrid& g = *grid_;
        TimesData td;
        td.event_row.resize(times.size());
        td.counts = Eigen::VectorXd::Zero(X_.rows());
        for (std::size_t i = 0; i < times.size(); ++i) {
            int l = g.period_of(times[i]);
            if (l < 0)
                throw ValidationError("event time outside every grid period");
            int row = static_cast<int>(g.row(static_cast<std::size_t>(event_cell_[i]),
                                              static_cast<std::size_t>(l)));
            td.event_row[i] = row;
            td.counts(row) += 1.0;
        }
        if (spec_.epidemic) {
            td.active = active_counts(times);
            td.lag_span.resize(times.size());
            KahanSum expo;
            for (std::size_t j = 0; j < times.size(); ++j) {
                td.lag_span[j] = std::min(spec_.tau, grid_->t_max - times[j]);
                expo.add(disc_area_[j] * td.lag_span[j]);
            }
            td.epi_exposure = expo.value();
        }
        return td;
    }

    // Point-process log likelihood: sum_i log lambda_i minus the integrated
    // intensity. Exact for this model: both parts integrate in closed form.
    double loglik_(const TimesData& td, const Eigen::VectorXd& beta, double gamma0) const {
        Eigen::VectorXd rate = endemic_row_rates(beta);
        if (!rate.allFinite()) return -std::numeric_limits<double>::infinity();
        KahanSum events;
        for (std::size_t i = 0; i < td.event_row.size(); ++i) {
            double e = event_density_[i] * rate(td.event_row[i]);
            double lam = e + (spec_.epidemic ? gamma0 * td.active[i] : 0.0);
            if (!(lam > 0.0)) return -std::numeric_limits<double>::infinity();
            events.add(std::log(lam));
        }
        KahanSum integral;
        for (Eigen::Index r = 0; r < exposure_.size(); ++r)
            if (exposure_(r) > 0.0) integral.add(exposure_(r) * rate(r));
        double ll = events.value() - integral.value();
        if (spec_.epidemic) ll -= gamma0 * td.epi_exposure;
        return std::isfinite(ll) ? ll : -std::numeric_limits<double>::infinity();
    }

    Eigen::VectorXd score_(const TimesData& td, const Eigen::VectorXd& beta, double gamma0) const {
        Eigen::Index p = X_.cols();
        Eigen::Index q = p + (spec_.epidemic ? 1 : 0);
        Eigen::VectorXd rate = endemic_row_rates(beta);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
        for (std::size_t i = 0; i < td.event_row.size(); ++i) {
            double e = event_density_[i] * rate(td.event_row[i]);
            double nact = spec_.epidemic ? td.active[i] : 0.0;
            double lam = e + gamma0 * nact;
            g.head(p) += (e / lam) * X_.row(td.event_row[i]).transpose();
            if (spec_.epidemic) g(p) += nact / lam;
        }
        for (Eigen::Index r = 0; r < exposure_.size(); ++r)
            if (exposure_(r) > 0.0) g.head(p) -= exposure_(r) * rate(r) * X_.row(r).transpose();
        if (spec_.epidemic) g(p) -= td.epi_exposure;
        return g;
    }

    Eigen::MatrixXd hessian_(const TimesData& td, const Eigen::VectorXd& beta,
                             double gamma0) const {
        Eigen::Index p = X_.cols();
        Eigen::Index q = p + (spec_.epidemic ? 1 : 0);
        Eigen::VectorXd rate = endemic_row_rates(beta);
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(q, q);
        for (std::size_t i = 0; i < td.event_row.size(); ++i) {
            double e = event_density_[i] * rate(td.event_row[i]);
            double nact = spec_.epidemic ? td.active[i] : 0.0;
            double lam = e + gamma0 * nact;
            Eigen::VectorXd x = X_.row(td.event_row[i]).transpose();
            // d/dbeta of (e/lam) x: the epidemic part makes this positive.
            h.topLeftCorner(p, p) += (e * gamma0 * nact / (lam * lam)) * x * x.transpose();
            if (spec_.epidemic) {
                h.block(0, p, p, 1) -= (e * nact / (lam * lam)) * x;
                h(p, p) -= nact * nact / (lam * lam);
            }
        }
        for (Eigen::Index r = 0; r < exposure_.size(); ++r)
            if (exposure_(r) > 0.0) {
                Eigen::VectorXd x = X_.row(r).transpose();
                h.topLeftCorner(p, p) -= exposure_(r) * rate(r) * x * x.transpose();
            }
        if (spec_.epidemic) h.block(p, 0, 1, p) = h.block(0, p, p, 1).transpose();
        return h;
    }

    /// Newton / IRLS fit of the endemic-only model on aggregated counts.
    FitResult fit_endemic_(const TimesData& td, const Eigen::VectorXd* warm) const {
        for (std::size_t i = 0; i < td.event_row.size(); ++i)
            if (!(event_density_[i] > 0.0))
                throw ComputeError("event '" + pattern_->events[i].id +
                                   "' lies in a zero-population cell; endemic intensity vanishes");
        Eigen::Index p = X_.cols();
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
        double expo_total = 0.0;
        for (Eigen::Index r = 0; r < exposure_.size(); ++r) expo_total += exposure_(r);
        beta(0) = std::log(static_cast<double>(td.event_row.size()) / expo_total);
        if (warm && warm->size() == p) beta = *warm;

        FitResult res;
        res.names = names_;
        double scale = std::max(1.0, td.counts.sum());
        bool ok = false;
        int it = 0;
        for (; it < 60; ++it) {
            Eigen::VectorXd mu = exposure_.array() * (X_ * beta).array().exp();
            if (!mu.allFinite()) {
                // Overshoot: pull back towards the flat start.
                beta *= 0.5;
                continue;
            }
            Eigen::VectorXd g = X_.transpose() * (td.counts - mu);
            if (g.lpNorm<Eigen::Infinity>() < 1e-9 * scale) { ok = true; break; }
            Eigen::MatrixXd info = X_.transpose() * mu.asDiagonal() * X_;
            Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
            if (ldlt.info() != Eigen::Success)
                throw ComputeError("endemic information matrix is singular");
            beta += ldlt.solve(g);
        }
        if (!ok) throw ComputeError("endemic fit did not converge");

        Eigen::VectorXd mu = exposure_.array() * (X_ * beta).array().exp();
        Eigen::MatrixXd info = X_.transpose() * mu.asDiagonal() * X_;
        Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
        res.beta = beta;
        res.se_beta = cov.diagonal().array().max(0.0).sqrt();
        res.loglik = loglik_(td, beta, 0.0);
        res.converged = true;
        res.iterations = it;
        res.relative_gradient = 0.0;
        return res;
    }

    /// BFGS on (beta, gamma0). gamma0 is unconstrained in sign (an inhibitory
    /// epidemic rate is admissible); the intensity must stay positive at every
    /// event, which the line search enforces through the -infinity likelihood
    /// sentinel. Started at the endemic optimum with gamma0 = 0, so the
    /// likelihood ratio against the endemic fit is nonnegative by construction.
    FitResult fit_full_(const TimesData& td, const FitResult& endemic) const {
        Eigen::Index p = X_.cols();
        Eigen::Index q = p + 1;
        FitResult res;
        res.names = names_;
        res.epidemic = true;

        double total_active = 0.0;
        for (double a : td.active) total_active += a;
        if (total_active == 0.0) {
            res.beta = endemic.beta;
            res.se_beta = endemic.se_beta;
            res.gamma0 = 0.0;
            res.se_gamma0 = std::numeric_limits<double>::quiet_NaN();
            res.loglik = endemic.loglik;
            res.converged = true;
            res.iterations = 0;
            res.relative_gradient = 0.0;
            res.warnings.push_back(
                "no event has a spatio-temporally close predecessor; gamma0 pinned at 0");
            return res;
        }

        Eigen::VectorXd theta(q);
        theta.head(p) = endemic.beta;
        theta(p) = 0.0;

        auto neg_ll = [&](const Eigen::VectorXd& th) { return -loglik_(td, th.head(p), th(p)); };
        auto neg_grad = [&](const Eigen::VectorXd& th) {
            return Eigen::VectorXd(-score_(td, th.head(p), th(p)));
        };

        // Initial inverse-Hessian guess from the endemic covariance plus the
        // gamma0 curvature at the start; keeps early steps well scaled.
        Eigen::MatrixXd hinv0 = Eigen::MatrixXd::Zero(q, q);
        for (Eigen::Index m = 0; m < p; ++m)
            hinv0(m, m) = std::max(endemic.se_beta(m) * endemic.se_beta(m), 1e-12);
        {
            double curv = 0.0;
            Eigen::VectorXd rate = endemic_row_rates(endemic.beta);
            for (std::size_t i = 0; i < td.event_row.size(); ++i) {
                double e = event_density_[i] * rate(td.event_row[i]);
                curv += td.active[i] * td.active[i] / (e * e);
            }
            hinv0(p, p) = 1.0 / std::max(curv, 1e-8);
        }
        Eigen::MatrixXd hinv = hinv0;

        double f = neg_ll(theta);
        Eigen::VectorXd g = neg_grad(theta);
        bool converged = false;
        int it = 0;
        double relgrad = std::numeric_limits<double>::infinity();
        for (; it < options_.max_iterations; ++it) {
            relgrad = 0.0;
            for (Eigen::Index m = 0; m < q; ++m)
                relgrad = std::max(relgrad,
                                   std::abs(g(m)) * std::max(1.0, std::abs(theta(m))) /
                                       std::max(1.0, std::abs(f)));
            if (relgrad < options_.tolerance) { converged = true; break; }

            Eigen::VectorXd dir = -(hinv * g);
            if (dir.dot(g) >= 0.0) {
                hinv = hinv0;
                dir = -(hinv * g);
                if (dir.dot(g) >= 0.0) dir = -g;
            }
            double slope = dir.dot(g);
            double alpha = 1.0;
            Eigen::VectorXd theta_new;
            double f_new = std::numeric_limits<double>::infinity();
            bool accepted = false;
            for (int ls = 0; ls < 60; ++ls) {
                theta_new = theta + alpha * dir;
                if ((theta_new - theta).lpNorm<Eigen::Infinity>() == 0.0) break;
                // neg_ll is +infinity when a step drives some event intensity
                // nonpositive, so infeasible gamma0 values are backtracked away.
                f_new = neg_ll(theta_new);
                if (f_new <= f + 1e-4 * alpha * slope || f_new < f - 1e-12 * std::abs(f)) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) break;

            Eigen::VectorXd g_new = neg_grad(theta_new);
            Eigen::VectorXd s = theta_new - theta;
            Eigen::VectorXd y = g_new - g;
            double sy = s.dot(y);
            if (sy > 1e-12 * s.norm() * y.norm()) {
                Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(q, q);
                Eigen::MatrixXd v = eye - (s * y.transpose()) / sy;
                hinv = v * hinv * v.transpose() + (s * s.transpose()) / sy;
            }
            theta = theta_new;
            f = f_new;
            g = g_new;
        }

        res.beta = theta.head(p);
        res.gamma0 = theta(p);
        res.loglik = -f;
        res.converged = converged;
        res.iterations = it;
        res.relative_gradient = relgrad;
        if (!converged)
            res.warnings.push_back("full fit stopped before meeting the gradient tolerance");

        // Standard errors from the observed information, when it is usable.
        Eigen::MatrixXd obs_info = -hessian_(td, res.beta, res.gamma0);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(obs_info);
        Eigen::VectorXd se = Eigen::VectorXd::Constant(q, std::numeric_limits<double>::quiet_NaN());
        if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
            Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(q, q));
            bool sane = true;
            for (Eigen::Index m = 0; m < q; ++m) sane &= cov(m, m) > 0.0;
            if (sane) se = cov.diagonal().array().sqrt();
        }
        if (!se.allFinite())
            res.warnings.push_back("observed information is not positive definite; no standard errors");
        res.se_beta = se.head(p);
        res.se_gamma0 = se(p);
        return res;
    }

    const PointPattern* pattern_;
    const CovariateGrid* grid_;
    ModelSpec spec_;
    FitOptions options_;
    std::vector<std::string> names_;
    Eigen::MatrixXd X_;
    Eigen::VectorXd exposure_;
    std::vector<int> event_cell_;
    std::vector<double> event_density_;
    std::vector<std::vector<std::uint32_t>> neighbours_;
    std::vector<double> disc_area_;
};

/// One-call fit of the specified model to a pattern.
inline FitResult fit_model(const PointPattern& pattern, const CovariateGrid& grid,
                           const ModelSpec& spec, const FitOptions& options = {}) {
    ModelEngine engine(pattern, grid, spec, options);
    return engine.fit();
}

} // namespace stint
