#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <stint/classical.hpp>
#include <stint/data.hpp>
#include <stint/geometry.hpp>
#include <stint/rng.hpp>

using namespace stint;

namespace {

Window square_window(double side, double t_max) {
    return make_window({PolygonRings{Ring{{0, 0}, {side, 0}, {side, side}, {0, side}}}},
                       t_max);
}

PointPattern random_pattern(std::size_t n, double side, double t_max, std::uint64_t seed,
                            double inset = 0.0) {
    Window w = square_window(side, t_max);
    RngStream rng(seed, 0);
    std::vector<Event> evs;
    for (std::size_t i = 0; i < n; ++i) {
        Event e;
        e.id = "e" + std::to_string(i);
        e.location = {inset + (side - 2 * inset) * rng.uniform01(),
                      inset + (side - 2 * inset) * rng.uniform01()};
        e.t = inset + (t_max - 2 * inset) * rng.uniform_open0();
        evs.push_back(e);
    }
    return make_pattern(w, evs);
}

struct BruteKnox {
    std::uint64_t space = 0, time = 0, both = 0, total = 0;
};

BruteKnox brute_knox(const PointPattern& p, double delta, double tau) {
    BruteKnox b;
    std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            ++b.total;
            bool s = distance(p.events[i].location, p.events[j].location) <= delta;
            bool t = std::abs(p.events[i].t - p.events[j].t) <= tau;
            if (s) ++b.space;
            if (t) ++b.time;
            if (s && t) ++b.both;
        }
    return b;
}

// Plain two-pass Pearson correlation over the unordered pair distance vectors.
double brute_mantel(const PointPattern& p) {
    std::vector<double> xs, ys;
    std::size_t n = p.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            xs.push_back(distance(p.events[i].location, p.events[j].location));
            ys.push_back(std::abs(p.events[i].t - p.events[j].t));
        }
    double m = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (double v : xs) mx += v;
    for (double v : ys) my += v;
    mx /= m;
    my /= m;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        syy += (ys[k] - my) * (ys[k] - my);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

TEST_CASE("knox statistic: small analytic cases") {
    Window w = square_window(1.0, 100.0);

    SECTION("two coincident events form one close pair") {
        std::vector<Event> evs{{"a", {0.5, 0.5}, 5.25, ""}, {"b", {0.5, 0.5}, 5.75, ""}};
        KnoxStat s = knox_statistic(make_pattern(w, evs), 0.01, 1.0);
        CHECK(s.close_close == 1);
        CHECK(s.space_close == 1);
        CHECK(s.time_close == 1);
        CHECK(s.total_pairs == 1);
        CHECK(s.expected == Catch::Approx(1.0));
    }

    SECTION("thresholds are inclusive") {
        std::vector<Event> evs{{"a", {0.0, 0.0}, 1.0, ""}, {"b", {0.0, 0.25}, 15.0, ""}};
        PointPattern p = make_pattern(w, evs);
        CHECK(knox_statistic(p, 0.25, 14.0).close_close == 1);
        CHECK(knox_statistic(p, 0.2499, 14.0).close_close == 0);
        CHECK(knox_statistic(p, 0.25, 13.9).close_close == 0);
    }

    SECTION("fewer than two events is an error") {
        std::vector<Event> evs{{"a", {0.5, 0.5}, 5.0, ""}};
        CHECK_THROWS_AS(knox_statistic(make_pattern(w, evs), 0.1, 1.0), ValidationError);
        CHECK_THROWS_AS(knox_statistic(make_pattern(w, {}), 0.1, 1.0), ValidationError);
    }

    SECTION("nonpositive thresholds are errors") {
        std::vector<Event> evs{{"a", {0.5, 0.5}, 5.0, ""}, {"b", {0.6, 0.6}, 6.0, ""}};
        PointPattern p = make_pattern(w, evs);
        CHECK_THROWS_AS(knox_statistic(p, 0.0, 1.0), ValidationError);
        CHECK_THROWS_AS(knox_statistic(p, 0.1, -1.0), ValidationError);
    }
}

TEST_CASE("knox statistic equals the double-loop oracle") {
    PointPattern p = random_pattern(100, 1.0, 365.0, 314);
    for (auto [delta, tau] : std::vector<std::pair<double, double>>{
             {0.05, 10.0}, {0.15, 30.0}, {0.4, 120.0}, {1.5, 400.0}}) {
        BruteKnox b = brute_knox(p, delta, tau);
        KnoxStat s = knox_statistic(p, delta, tau);
        CHECK(s.close_close == b.both);
        CHECK(s.space_close == b.space);
        CHECK(s.time_close == b.time);
        CHECK(s.total_pairs == b.total);
        CHECK(s.expected == Catch::Approx(static_cast<double>(b.space) *
                                          static_cast<double>(b.time) /
                                          static_cast<double>(b.total)));
        CHECK(s.space_close_time_far() == b.space - b.both);
        CHECK(s.time_close_space_far() == b.time - b.both);
        CHECK(s.far_far() == b.total - b.space - b.time + b.both);
    }
}

TEST_CASE("knox table is invariant to rigid motion") {
    Window big = square_window(40.0, 365.0);
    PointPattern p = random_pattern(80, 1.0, 365.0, 77);
    double th = 0.7, cx = 0.3, cy = 0.4;
    std::vector<Event> moved;
    for (const Event& e : p.events) {
        double dx = e.location.x - cx, dy = e.location.y - cy;
        Event m = e;
        m.location = {15.0 + dx * std::cos(th) - dy * std::sin(th),
                      15.0 + dx * std::sin(th) + dy * std::cos(th)};
        moved.push_back(m);
    }
    PointPattern in_big = make_pattern(big, p.events);
    PointPattern q = make_pattern(big, moved);
    REQUIRE(q.size() == p.size());

    KnoxStat a = knox_statistic(in_big, 0.12, 30.0);
    KnoxStat b = knox_statistic(q, 0.12, 30.0);
    CHECK(a.close_close == b.close_close);
    CHECK(a.space_close == b.space_close);
    CHECK(a.time_close == b.time_close);
}

TEST_CASE("knox margins and expectation survive time permutation") {
    PointPattern p = random_pattern(60, 1.0, 100.0, 99);
    RngStream rng(5, 0);
    PointPattern q = permute_times(p, rng);
    KnoxStat a = knox_statistic(p, 0.1, 20.0);
    KnoxStat b = knox_statistic(q, 0.1, 20.0);
    CHECK(a.space_close == b.space_close);
    CHECK(a.time_close == b.time_close);
    CHECK(a.total_pairs == b.total_pairs);
    CHECK(a.expected == b.expected);
}

TEST_CASE("knox permuter reproduces the full statistic") {
    PointPattern p = random_pattern(70, 1.0, 100.0, 123);
    KnoxPermuter perm(p, 0.15, 25.0);
    KnoxStat s = knox_statistic(p, 0.15, 25.0);
    CHECK(perm(p.times()) == static_cast<double>(s.close_close));
    CHECK(perm.cached_pairs() == s.space_close);

    RngStream rng(9, 0);
    PointPattern q = permute_times(p, rng);
    // Locations are untouched by permutation, so the cached pair list still
    // matches a from-scratch spatial margin.
    CHECK(perm.cached_pairs() == knox_statistic(q, 0.15, 25.0).space_close);
}

TEST_CASE("mantel statistic: analytic and oracle checks") {
    Window w = square_window(10.0, 100.0);

    SECTION("perfect linear relation gives r = 1") {
        std::vector<Event> evs{{"a", {1, 5}, 1.0, ""},
                               {"b", {2, 5}, 2.0, ""},
                               {"c", {3, 5}, 3.0, ""}};
        MantelStat s = mantel_statistic(make_pattern(w, evs));
        CHECK(s.r == Catch::Approx(1.0).epsilon(1e-12));
        CHECK(s.pairs == 3);
    }

    SECTION("matches the direct Pearson oracle") {
        PointPattern p = random_pattern(50, 1.0, 365.0, 2718);
        MantelStat s = mantel_statistic(p);
        CHECK(s.pairs == 1225);
        CHECK(s.r == Catch::Approx(brute_mantel(p)).margin(1e-10));
        CHECK(s.r >= -1.0);
        CHECK(s.r <= 1.0);
    }

    SECTION("zero variance is an error") {
        std::vector<Event> same_loc{{"a", {1, 1}, 1.5, ""},
                                    {"b", {1, 1}, 2.5, ""},
                                    {"c", {1, 1}, 3.5, ""}};
        CHECK_THROWS_AS(mantel_statistic(make_pattern(w, same_loc)), ValidationError);
        std::vector<Event> same_t{{"a", {1, 1}, 2.5, ""},
                                  {"b", {2, 1}, 2.5, ""},
                                  {"c", {3, 1}, 2.5, ""}};
        CHECK_THROWS_AS(mantel_statistic(make_pattern(w, same_t)), ValidationError);
    }

    SECTION("fewer than three events is an error") {
        std::vector<Event> evs{{"a", {1, 1}, 1.0, ""}, {"b", {2, 2}, 2.0, ""}};
        CHECK_THROWS_AS(mantel_statistic(make_pattern(w, evs)), ValidationError);
    }

    SECTION("invariant to affine rescaling of either axis") {
        PointPattern p = random_pattern(40, 1.0, 100.0, 11);
        Window big = square_window(400.0, 1000.0);
        std::vector<Event> scaled;
        for (const Event& e : p.events) {
            Event s = e;
            s.location = {3.0 * e.location.x + 50.0, 3.0 * e.location.y + 80.0};
            s.t = 2.5 * e.t + 7.0;
            scaled.push_back(s);
        }
        PointPattern q = make_pattern(big, scaled);
        REQUIRE(q.size() == p.size());
        CHECK(mantel_statistic(q).r == Catch::Approx(mantel_statistic(p).r).margin(1e-9));
    }
}

TEST_CASE("mantel permuter is bitwise-consistent with the statistic") {
    PointPattern p = random_pattern(45, 1.0, 365.0, 5);
    MantelPermuter perm(p);
    CHECK(perm(p.times()) == mantel_statistic(p).r);
}

TEST_CASE("k surface: single interior pair") {
    // One pair 0.1 km / 1 day apart, both deep interior, so all edge weights
    // are 1 and K(0.2, 2) = |W| T (2 ordered contributions / n(n-1) = 2).
    Window w = square_window(1.0, 10.0);
    std::vector<Event> evs{{"a", {0.45, 0.5}, 5.0, ""}, {"b", {0.55, 0.5}, 6.0, ""}};
    PointPattern p = make_pattern(w, evs);
    KSurface s = k_surface(p, {0.2}, {2.0});
    CHECK(s.k[0] == Catch::Approx(w.area * w.t_max).epsilon(1e-12));
    CHECK(s.d[0] == Catch::Approx(s.k[0] - s.k_space[0] * s.k_time[0]).epsilon(1e-12));
}

TEST_CASE("k surface: grid validation") {
    PointPattern p = random_pattern(10, 1.0, 100.0, 3);
    CHECK_THROWS_AS(k_surface(p, {}, {1.0}), ValidationError);
    CHECK_THROWS_AS(k_surface(p, {0.1}, {}), ValidationError);
    CHECK_THROWS_AS(k_surface(p, {0.1, 0.1}, {1.0}), ValidationError);
    CHECK_THROWS_AS(k_surface(p, {0.2, 0.1}, {1.0}), ValidationError);
    CHECK_THROWS_AS(k_surface(p, {0.1}, {100.0}), ValidationError);   // tau = T
    CHECK_THROWS_AS(k_surface(p, {5.0}, {1.0}), ValidationError);     // past diameter
}

TEST_CASE("k surface is monotone and consistent") {
    PointPattern p = random_pattern(150, 1.0, 100.0, 404);
    std::vector<double> deltas{0.05, 0.1, 0.15, 0.2};
    std::vector<double> taus{5.0, 10.0, 20.0, 30.0};
    KSurface s = k_surface(p, deltas, taus);

    for (std::size_t di = 0; di < deltas.size(); ++di)
        for (std::size_t ti = 0; ti < taus.size(); ++ti) {
            double v = s.at(di, ti);
            if (di) CHECK(v >= s.at(di - 1, ti) - 1e-12);
            if (ti) CHECK(v >= s.at(di, ti - 1) - 1e-12);
            CHECK(s.d[di * taus.size() + ti] ==
                  Catch::Approx(v - s.k_space[di] * s.k_time[ti]).margin(1e-12));
        }

    KahanSum total;
    for (double v : s.d) total.add(v);
    CHECK(s.sum_d == Catch::Approx(total.value()).margin(1e-12));
}

TEST_CASE("k surface marginals are invariant under time permutation") {
    PointPattern p = random_pattern(120, 1.0, 100.0, 321);
    std::vector<double> deltas{0.05, 0.1, 0.2};
    std::vector<double> taus{5.0, 15.0, 30.0};
    KfunEngine eng(p, deltas, taus);
    KSurface obs = eng.surface(p.times());

    RngStream rng(17, 0);
    std::vector<double> perm = p.times();
    rng.shuffle(perm);
    KSurface rep = eng.surface(perm);
    CHECK(rep.k_space == obs.k_space);
    CHECK(rep.k_time == obs.k_time);
    CHECK(eng.temporal_k(perm) == obs.k_time);
}

TEST_CASE("k surface reduces to the knox count when all weights are one") {
    // Locations inset so every circle up to the largest delta stays interior;
    // times inset so every temporal weight is 1.
    Window w = square_window(1.0, 100.0);
    RngStream rng(62, 0);
    std::vector<Event> evs;
    for (int i = 0; i < 90; ++i) {
        Event e;
        e.id = "e" + std::to_string(i);
        e.location = {0.3 + 0.4 * rng.uniform01(), 0.3 + 0.4 * rng.uniform01()};
        e.t = 35.0 + 30.0 * rng.uniform01();
        evs.push_back(e);
    }
    PointPattern p = make_pattern(w, evs);

    std::vector<double> deltas{0.04, 0.09, 0.2};
    std::vector<double> taus{4.0, 11.0, 30.0};
    KSurface s = k_surface(p, deltas, taus);
    double n = static_cast<double>(p.size());
    for (std::size_t di = 0; di < deltas.size(); ++di)
        for (std::size_t ti = 0; ti < taus.size(); ++ti) {
            BruteKnox b = brute_knox(p, deltas[di], taus[ti]);
            double scaled = s.at(di, ti) * n * (n - 1) / (w.area * w.t_max);
            CHECK(scaled == Catch::Approx(2.0 * static_cast<double>(b.both)).epsilon(1e-12));
        }
}
