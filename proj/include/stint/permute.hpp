#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <thread>
#include <vector>

#include "classical.hpp"
#include "common.hpp"
#include "data.hpp"
#include "model.hpp"
#include "rng.hpp"

namespace stint {

struct PermutationPlan {
    std::uint64_t replicates = 999;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Outcome of a Monte Carlo permutation test. The p-value uses the
/// add-one convention, so it can never be exactly zero and is bounded
/// below by the resolution 1 / (B + 1).
struct PermutationResult {
    double observed = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> replicates; // successful replicate statistics, in replicate order
    std::uint64_t requested = 0;
    std::uint64_t failed = 0;
    double p_value = std::numeric_limits<double>::quiet_NaN();
    double resolution = std::numeric_limits<double>::quiet_NaN();
};

inline double permutation_p_value(double observed, const std::vector<double>& replicates) {
    std::uint64_t ge = 0;
    for (double v : replicates) ge += (v >= observed);
    return static_cast<double>(1 + ge) / static_cast<double>(replicates.size() + 1);
}

/// Runs `plan.replicates` time permutations of `times` through
/// `stat(permuted_times, replicate_index)`. Replicate r draws from its own
/// counter stream (seed, r + 1), so results are identical for any thread
/// count and scheduling order. `stat` must be safe to call concurrently;
/// a throw or NaN marks that replicate failed.
template <class Stat>
PermutationResult run_permutation_test_indexed(const PermutationPlan& plan,
                                               const std::vector<double>& times, Stat&& stat,
                                               double observed) {
    if (plan.replicates < 1) throw ValidationError("permutation test needs at least 1 replicate");
    if (times.size() < 2) throw ValidationError("permutation test needs at least 2 events");

    PermutationResult out;
    out.requested = plan.replicates;
    out.observed = observed;

    std::vector<double> values(plan.replicates, std::numeric_limits<double>::quiet_NaN());
    std::atomic<std::uint64_t> next{0};
    std::atomic<std::uint64_t> failures{0};
    int threads = std::max(1, plan.threads);

    auto worker = [&]() {
        for (;;) {
            std::uint64_t r = next.fetch_add(1);
            if (r >= plan.replicates) return;
            RngStream rng(plan.seed, r + 1);
            std::vector<double> permuted = times;
            rng.shuffle(permuted);
            try {
                values[r] = stat(permuted, r);
                if (std::isnan(values[r])) failures.fetch_add(1);
            } catch (const std::exception&) {
                failures.fetch_add(1);
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    out.replicates.reserve(plan.replicates);
    for (double v : values)
        if (!std::isnan(v)) out.replicates.push_back(v);
    out.failed = failures.load();
    // More than 5% failed replicates means the null distribution is no longer
    // trustworthy, so the test aborts instead of reporting a biased p-value.
    if (out.failed * 20 > out.requested)
        throw ComputeError(std::to_string(out.failed) + " of " + std::to_string(out.requested) +
                           " permutation replicates failed, more than the 5% tolerance");
    if (out.replicates.empty()) throw ComputeError("every permutation replicate failed");
    out.p_value = permutation_p_value(out.observed, out.replicates);
    out.resolution = 1.0 / static_cast<double>(out.replicates.size() + 1);
    return out;
}

/// Convenience wrapper for statistics that only need the permuted times.
template <class Stat>
PermutationResult run_permutation_test(const PermutationPlan& plan,
                                       const std::vector<double>& times, Stat&& stat) {
    double observed = stat(times);
    return run_permutation_test_indexed(
        plan, times, [&](const std::vector<double>& t, std::uint64_t) { return stat(t); },
        observed);
}

// ---------------------------------------------------------------------------
// Test drivers: build the statistic closure once, run the engine, and keep
// the statistic-specific observables alongside the Monte Carlo outcome.

struct KnoxTest {
    KnoxStat observed;
    PermutationResult mc;
};

inline KnoxTest run_knox_test(const PointPattern& pattern, double delta, double tau,
                              const PermutationPlan& plan) {
    KnoxTest t;
    t.observed = knox_statistic(pattern, delta, tau);
    KnoxPermuter permuter(pattern, delta, tau);
    t.mc = run_permutation_test(plan, pattern.times(), permuter);
    return t;
}

struct MantelTest {
    MantelStat observed;
    PermutationResult mc;
};

inline MantelTest run_mantel_test(const PointPattern& pattern, const PermutationPlan& plan) {
    MantelTest t;
    t.observed = mantel_statistic(pattern);
    MantelPermuter permuter(pattern);
    // The permuter reproduces the exact observed r on the identity relabelling.
    t.mc = run_permutation_test_indexed(
        plan, pattern.times(),
        [&](const std::vector<double>& times, std::uint64_t) { return permuter(times); },
        permuter(pattern.times()));
    return t;
}

struct KfunTest {
    KSurface observed;
    PermutationResult mc;
};

inline KfunTest run_kfun_test(const PointPattern& pattern, std::vector<double> deltas,
                              std::vector<double> taus, const PermutationPlan& plan) {
    KfunEngine engine(pattern, std::move(deltas), std::move(taus));
    KfunTest t;
    t.observed = engine.surface(engine.observed_times());
    t.mc = run_permutation_test_indexed(
        plan, pattern.times(),
        [&](const std::vector<double>& times, std::uint64_t) { return engine(times); },
        t.observed.sum_d);
    return t;
}

/// Which fitted quantity drives the model-based permutation test.
enum class ModelStatistic { Reproduction, LikelihoodRatio };

struct ModelTest {
    FitResult observed_fit;
    ModelStatistic statistic = ModelStatistic::Reproduction;
    PermutationResult mc;             // for the chosen statistic
    std::vector<double> replicate_tr; // reproduction number per kept replicate
    std::vector<double> replicate_lr; // likelihood ratio per kept replicate
};

/// Permutation test of the epidemic component: refits the full model to each
/// time-permuted pattern and compares the chosen statistic. Replicates warm
/// start from the observed endemic coefficients.
inline ModelTest run_model_test(const PointPattern& pattern, const CovariateGrid& grid,
                                const ModelSpec& spec, const PermutationPlan& plan,
                                ModelStatistic statistic = ModelStatistic::Reproduction,
                                const FitOptions& options = {}) {
    if (!spec.epidemic)
        throw ValidationError("the model-based test needs an epidemic specification");
    ModelEngine engine(pattern, grid, spec, options);
    ModelTest t;
    t.statistic = statistic;
    t.observed_fit = engine.fit();
    if (!t.observed_fit.converged)
        throw ComputeError("full model fit on the observed data did not converge");

    const Eigen::VectorXd warm = t.observed_fit.beta;
    struct BothStats {
        double tr, lr;
    };
    std::vector<BothStats> both(plan.replicates,
                                {std::numeric_limits<double>::quiet_NaN(),
                                 std::numeric_limits<double>::quiet_NaN()});
    double observed = statistic == ModelStatistic::Reproduction ? t.observed_fit.reproduction
                                                                : t.observed_fit.lr_stat;
    t.mc = run_permutation_test_indexed(
        plan, pattern.times(),
        [&](const std::vector<double>& times, std::uint64_t r) {
            FitResult fit = engine.fit_times(times, &warm);
            if (!fit.converged) throw ComputeError("replicate fit did not converge");
            both[r] = {fit.reproduction, fit.lr_stat};
            return statistic == ModelStatistic::Reproduction ? fit.reproduction : fit.lr_stat;
        },
        observed);
    for (std::uint64_t r = 0; r < plan.replicates; ++r) {
        if (std::isnan(both[r].tr)) continue;
        t.replicate_tr.push_back(both[r].tr);
        t.replicate_lr.push_back(both[r].lr);
    }
    return t;
}

} // namespace stint
