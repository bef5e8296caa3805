#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "rpp/error.hpp"
#include "rpp/raysim.hpp"

using namespace rpp;

namespace {

// Largest (building height - ray height) over points every `step` m along a->b.
double brute_penetration(const HeightGrid& g, const Vec3& a, const Vec3& b, double step) {
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const int n = static_cast<int>(len / step);
    double best = -1e9;
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double x = a.x + t * (b.x - a.x);
        const double y = a.y + t * (b.y - a.y);
        const int c = std::min(static_cast<int>(std::floor(x)), g.width() - 1);
        const int r = std::min(static_cast<int>(std::floor(y)), g.height() - 1);
        best = std::max(best, g.at(c, r) - (a.z + t * (b.z - a.z)));
    }
    return best;
}

double dist(const Vec3& a, const Vec3& b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y) + (a.z - b.z) * (a.z - b.z)); }

// Sample sd of (perturbed - original) over every available cell.
double shift_sd(const RadioMap& m, const PerturbationSpec& spec) {
    const RadioMap s = perturb_environment(m, spec);
    std::vector<double> d;
    for (int r = 0; r < m.height(); ++r) {
        for (int c = 0; c < m.width(); ++c) {
            if (m.available({c, r})) d.push_back(s.power({c, r}) - m.power({c, r}));
        }
    }
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(d.size());
    double var = 0.0;
    for (double v : d) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(d.size()));
}

}  // namespace

TEST_CASE("line of sight over a flat grid is clear") {
    const HeightGrid g(40, 40);
    Rng rng(2);
    for (int i = 0; i < 50; ++i) {
        const Vec3 a{rng.uniform(0, 40), rng.uniform(0, 40), 1.0};
        const Vec3 b{rng.uniform(0, 40), rng.uniform(0, 40), 1.0};
        const SightLine s = line_of_sight(g, a, b);
        CHECK(s.clear);
        CHECK(s.obstructions.empty());
    }
}

TEST_CASE("single building penetration matches the brute-force oracle") {
    HeightGrid g(21, 1);
    g.set({9, 0}, 13.0);
    const Vec3 a{0.0, 0.5, 14.0};
    const Vec3 b{20.0, 0.5, 1.0};
    const SightLine s = line_of_sight(g, a, b);
    REQUIRE_FALSE(s.clear);
    REQUIRE(s.obstructions.size() == 1);
    // ray height 7.5 where it leaves the building cell
    CHECK(s.obstructions[0].penetration == doctest::Approx(5.5).epsilon(1e-12));
    CHECK(s.obstructions[0].distance == doctest::Approx(10.0));
    CHECK(std::abs(s.obstructions[0].penetration - brute_penetration(g, a, b, 0.01)) < 0.01);
}

TEST_CASE("random obstructions agree with the 0.01 m oracle") {
    Rng rng(9);
    const HeightGrid g = generate_city(64, 64, 4);
    int checked = 0;
    for (int i = 0; i < 200; ++i) {
        const Vec3 a{rng.uniform(0.1, 63.9), rng.uniform(0.1, 63.9), 14.0};
        const Vec3 b{rng.uniform(0.1, 63.9), rng.uniform(0.1, 63.9), 1.0};
        const SightLine s = line_of_sight(g, a, b);
        const double brute = brute_penetration(g, a, b, 0.01);
        if (brute > 0.05) {
            REQUIRE_FALSE(s.clear);
            double deepest = 0.0;
            for (const auto& o : s.obstructions) deepest = std::max(deepest, o.penetration);
            CHECK(std::abs(deepest - brute) < 0.02);
            ++checked;
        } else if (brute < -0.05) {
            CHECK(s.clear);
        }
    }
    CHECK(checked > 20);
}

TEST_CASE("vertical segment crosses one column") {
    HeightGrid g(5, 5);
    g.set({2, 2}, 26.0);
    CHECK(line_of_sight(g, {1.5, 1.5, 1.0}, {1.5, 1.5, 20.0}).clear);
}

TEST_CASE("free-space path loss") {
    const double f = 5.64e9;
    CHECK(fspl(wavelength(f) / (4.0 * std::numbers::pi), f) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(fspl(100.0, f) - 87.47) < 0.01);
    CHECK(fspl(200.0, f) - fspl(100.0, f) == doctest::Approx(20.0 * std::log10(2.0)));
    CHECK(wavelength(f) == doctest::Approx(0.0531547).epsilon(1e-6));
    CHECK_THROWS_AS(fspl(0.0, f), ArgumentError);
}

TEST_CASE("Fresnel parameter and knife-edge loss") {
    const double f = 5.64e9;
    CHECK(fresnel_v(0.0, 50, 50, f) == 0.0);
    CHECK(std::abs(fresnel_v(5.5, 50, 50, f) - 6.74) < 0.01);
    CHECK(fresnel_v(-3.0, 50, 50, f) < 0.0);
    CHECK(knife_edge_loss(-0.78) == 0.0);
    CHECK(knife_edge_loss(-2.0) == 0.0);
    CHECK(knife_edge_loss(0.1) == doctest::Approx(6.9));
    CHECK(std::abs(knife_edge_response(-0.78) - 0.004) < 0.001);
    for (double v = -0.77; v < 5.0; v += 0.01) {
        CHECK(knife_edge_loss(v + 0.01) >= knife_edge_loss(v));
    }
}

TEST_CASE("reflection off a single wall has the image-path length") {
    HeightGrid g(40, 40);
    for (int r = 0; r < 40; ++r) {
        g.set({30, r}, 26.0);
        g.set({31, r}, 26.0);
    }
    Scenario sc;
    const Vec3 tx{25.0, 10.0, 14.0};
    const Vec3 rx{5.0, 20.0, 1.0};
    const auto path = strongest_reflection(g, sc, tx, rx);
    REQUIRE(path.has_value());
    const Vec3 image{60.0 - rx.x, rx.y, rx.z};
    CHECK(path->length == doctest::Approx(dist(tx, image)).epsilon(1e-9));
    CHECK(path->bounces == 1);
    CHECK(path->power == doctest::Approx(sc.tx_power - fspl(path->length, sc.frequency) - sc.wall_loss));

    // brute force over discretised wall points
    double best = 1e9;
    for (double y = 0.0; y <= 40.0; y += 0.02) {
        for (double z = 0.0; z <= 26.0; z += 0.02) {
            const Vec3 p{30.0, y, z};
            best = std::min(best, dist(tx, p) + dist(p, rx));
        }
    }
    CHECK(std::abs(best - path->length) < 0.1);
}

TEST_CASE("no reflection on an open flat grid") {
    const HeightGrid g(30, 30);
    CHECK(extract_walls(g).empty());
    CHECK_FALSE(strongest_reflection(g, Scenario{}, {3, 3, 14}, {20, 25, 1}).has_value());
}

TEST_CASE("wall behind an obstructing building gives no reflection") {
    HeightGrid g(40, 40);
    for (int r = 0; r < 40; ++r) {
        for (int c : {20, 21, 30, 31}) g.set({c, r}, 26.0);
    }
    CHECK_FALSE(strongest_reflection(g, Scenario{}, {25.0, 10.0, 14.0}, {5.0, 20.0, 1.0}).has_value());
}

TEST_CASE("direct LOS power and power sum") {
    HeightGrid g(120, 3);
    Scenario sc;
    sc.bs_position = {0.5 + std::sqrt(100.0 * 100.0 - 13.0 * 13.0), 1.5, 14.0};
    const auto p = simulate_power(g, sc, {0, 1});
    REQUIRE(p.has_value());
    CHECK(std::abs(*p - (-66.47)) < 0.01);
    const std::vector<double> both{*p, -80.0};
    CHECK(std::abs(combine_powers(both) - (-66.29)) < 0.01);
    CHECK(combine_powers(both) == doctest::Approx(10.0 * std::log10(std::pow(10.0, *p / 10.0) + 1e-8)));
}

TEST_CASE("building cell is unavailable") {
    HeightGrid g(10, 10);
    g.set({4, 4}, 13.0);
    Scenario sc = default_scenario(g);
    CHECK_FALSE(simulate_power(g, sc, {4, 4}).has_value());
    CHECK_FALSE(simulate_map(g, sc).available({4, 4}));
}

TEST_CASE("flat 256 x 256 map decreases with distance") {
    const HeightGrid g(256, 256);
    const Scenario sc = default_scenario(g);
    const RadioMap m = simulate_map(g, sc);
    REQUIRE(m.available_count() == 256u * 256u);
    std::vector<std::pair<double, double>> dp;
    for (int r = 0; r < 256; ++r) {
        for (int c = 0; c < 256; ++c) dp.emplace_back(dist(cell_center(g, {c, r}, sc.ms_altitude), sc.bs_position), m.power({c, r}));
    }
    std::sort(dp.begin(), dp.end());
    for (std::size_t i = 1; i < dp.size(); ++i) {
        if (dp[i].first > dp[i - 1].first + 1e-9) {
            CHECK(dp[i].second < dp[i - 1].second);
        } else {
            CHECK(dp[i].second == doctest::Approx(dp[i - 1].second).epsilon(1e-12));
        }
    }
}

TEST_CASE("shadowed cells are weaker than their mirrored LOS counterparts") {
    HeightGrid g(64, 64);
    for (int r = 30; r < 35; ++r) {
        for (int c = 40; c < 45; ++c) g.set({c, r}, 26.0);
    }
    const Scenario sc = default_scenario(g);
    const RadioMap m = simulate_map(g, sc);
    int pairs = 0;
    for (int r = 0; r < 64; ++r) {
        for (int c = 45; c < 64; ++c) {
            const Vec3 rx = cell_center(g, {c, r}, sc.ms_altitude);
            if (line_of_sight(g, sc.bs_position, rx).clear) continue;
            const GridIndex mirror{63 - c, r};
            REQUIRE(line_of_sight(g, sc.bs_position, cell_center(g, mirror, sc.ms_altitude)).clear);
            CHECK(m.power({c, r}) < m.power(mirror));
            ++pairs;
        }
    }
    CHECK(pairs > 30);
}

TEST_CASE("simulate_map is deterministic and worker invariant") {
    const HeightGrid g = generate_city(96, 80, 12);
    const Scenario sc = default_scenario(g);
    const RadioMap a = simulate_map(g, sc, 1);
    CHECK(a == simulate_map(g, sc, 1));
    CHECK(a == simulate_map(g, sc, 3));
    CHECK(a == simulate_map(g, sc, 7));
}

TEST_CASE("perturbation: identity, offset and shadowing statistics") {
    RadioMap m(128, 128);
    for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) m.set({c, r}, -70.0 - 0.1 * c);
    }
    PerturbationSpec id;
    id.seed = 4;
    CHECK(perturb_environment(m, id) == m);

    PerturbationSpec off = id;
    off.global_offset = 5.0;
    const RadioMap o = perturb_environment(m, off);
    for (int r = 0; r < 128; ++r) {
        for (int c = 0; c < 128; ++c) CHECK(o.power({c, r}) == m.power({c, r}) + 5.0);
    }

    PerturbationSpec sh = id;
    sh.shadowing_sd = 3.0;
    sh.shadowing_correlation_length = 2.0;
    CHECK(shift_sd(m, sh) >= 2.5);
    CHECK(shift_sd(m, sh) <= 3.5);
    const RadioMap s = perturb_environment(m, sh);
    CHECK(perturb_environment(m, sh) == s);
}

TEST_CASE("shadowing sd over a wide map at 10 m correlation") {
    // 512 x 512 cells hold ~200 correlation areas at 10 m
    RadioMap m(512, 512);
    for (int r = 0; r < 512; ++r) {
        for (int c = 0; c < 512; ++c) m.set({c, r}, -80.0);
    }
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        PerturbationSpec sh;
        sh.seed = seed;
        sh.shadowing_sd = 3.0;
        sh.shadowing_correlation_length = 10.0;
        const double sd = shift_sd(m, sh);
        CHECK(sd >= 2.5);
        CHECK(sd <= 3.5);
    }
}

TEST_CASE("perturbation leaves unavailable cells alone") {
    RadioMap m(8, 8);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            if ((r + c) % 3) m.set({c, r}, -80.0);
        }
    }
    PerturbationSpec sh;
    sh.shadowing_sd = 2.0;
    const RadioMap s = perturb_environment(m, sh);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) CHECK(s.available({c, r}) == m.available({c, r}));
    }
}

TEST_CASE("height perturbation is per building and never negative") {
    const HeightGrid g = generate_city(64, 64, 2);
    PerturbationSpec p;
    p.seed = 8;
    p.height_noise_sd = 3.0;
    const HeightGrid h = perturb_heights(g, p);
    CHECK(h == perturb_heights(g, p));
    bool changed = false;
    for (std::size_t i = 0; i < g.heights().size(); ++i) {
        CHECK(h.heights()[i] >= 0.0);
        if (g.heights()[i] == 0.0) CHECK(h.heights()[i] == 0.0);
        changed |= h.heights()[i] != g.heights()[i];
    }
    CHECK(changed);
}
