#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "rpp/error.hpp"
#include "rpp/features.hpp"

using namespace rpp;

TEST_CASE("BS distance map") {
    const HeightGrid g(20, 20);
    Scenario sc;
    sc.bs_position = {0.0, 0.0, 14.0};
    // window cell (0,0) of the window centred on (1,1) is grid cell (0,0)
    const auto m = bs_distance_map(g, sc, {1, 1}, 3);
    CHECK(m[0] == doctest::Approx(std::sqrt(0.25 + 0.25 + 169.0) / 500.0));
    CHECK(m[0] == doctest::Approx(0.02604).epsilon(1e-3));

    sc.bs_position = {5.5, 5.5, 14.0};
    CHECK(bs_distance_map(g, sc, {5, 5}, 1)[0] * 500.0 == doctest::Approx(13.0));

    sc.bs_position = {0.0, 0.0, 14.0};
    Normalization n;
    n.distance = 500.0;
    const HeightGrid far(700, 1);
    CHECK(bs_distance_map(far, sc, {650, 0}, 1, n)[0] == 1.0);
    CHECK_THROWS_AS(bs_distance_map(g, sc, {1, 1}, 4), ArgumentError);
}

TEST_CASE("MS distance map") {
    const auto m = ms_distance_map(65);
    CHECK(m[32 * 65 + 32] == 0.0);
    CHECK(m[32 * 65 + 33] == doctest::Approx(1.0 / std::sqrt(2.0 * 32 * 32)));
    CHECK(m[32 * 65 + 33] == doctest::Approx(0.0221).epsilon(1e-2));
    CHECK(m[0] == doctest::Approx(1.0));
    CHECK(m[64] == doctest::Approx(1.0));
    CHECK(m[64 * 65 + 64] == doctest::Approx(1.0));
    for (double v : m) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-15);
    }
}

TEST_CASE("building height map") {
    HeightGrid g(10, 10);
    g.set({5, 5}, 13.0);
    const auto m = building_height_map(g, {5, 5}, 3);
    CHECK(m[4] == 0.5);
    CHECK(m[0] == 0.0);
    const auto edge = building_height_map(g, {0, 0}, 3);
    CHECK(edge[0] == 0.0);  // off grid
}

TEST_CASE("SRP map") {
    RadioMap sim(5, 5);
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) sim.set({c, r}, -75.0);
    }
    for (double v : srp_map(sim, {2, 2}, 3)) CHECK(v == doctest::Approx(0.5));

    sim.set({2, 2}, -89.0);
    sim.set_unavailable({3, 2});
    const auto m = srp_map(sim, {2, 2}, 3);
    CHECK(m[4] == doctest::Approx(0.3));
    CHECK(m[5] == m[4]);  // building neighbour takes the centre value
    CHECK(m[3] == doctest::Approx(0.5));

    const auto masked = srp_map(sim, {2, 2}, 3, {}, true);
    double sum = 0.0;
    for (int i = 0; i < 9; ++i) {
        if (i != 4) sum += m[i];
    }
    CHECK(masked[4] == doctest::Approx(sum / 8.0));
    CHECK_THROWS_AS(srp_map(sim, {3, 2}, 3), ArgumentError);
}

TEST_CASE("make_features composition") {
    const HeightGrid g = generate_city(64, 64, 3);
    const Scenario sc = default_scenario(g);
    Rng rng(1);
    const RadioMap sim = test::random_map(64, 64, rng);
    const FeatureTensor a = make_features(g, sc, sim, {32, 32}, 17, 3);
    CHECK(a == make_features(g, sc, sim, {32, 32}, 17, 3));
    CHECK(a.wide.size() == 3u * 17u * 17u);
    CHECK(a.srp.size() == 9u);
    const FeatureTensor b = make_features(g, sc, sim, {10, 50}, 17, 3);
    CHECK(std::equal(a.ms_distance().begin(), a.ms_distance().end(), b.ms_distance().begin()));
    // the plaza round the mast is open ground
    const FeatureTensor c = make_features(g, sc, sim, {32, 32}, 9, 3);
    for (double v : c.building()) CHECK(v == 0.0);
    for (double v : a.wide) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}
