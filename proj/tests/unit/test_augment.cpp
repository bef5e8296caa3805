#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "rpp/augment.hpp"
#include "rpp/error.hpp"
#include "rpp/raysim.hpp"

using namespace rpp;

namespace {

RadioMap constant_map(int w, int h, double v) {
    RadioMap m(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) m.set({c, r}, v);
    }
    return m;
}

}  // namespace

TEST_CASE("difference map") {
    RadioMap m = constant_map(7, 7, -75.0);
    const DifferenceMap zero = difference_map(m, {3, 3}, 3);
    for (const auto& e : zero.entries) {
        REQUIRE(e.has_value());
        CHECK(*e == 0.0);
    }
    m.set({4, 3}, -73.0);
    m.set_unavailable({3, 4});
    const DifferenceMap d = difference_map(m, {3, 3}, 3);
    CHECK(*d.at(1, 0) == 2.0);
    CHECK_FALSE(d.at(0, 1).has_value());
    CHECK_FALSE(difference_map(m, {0, 0}, 3).at(-1, -1).has_value());
    CHECK_THROWS_AS(difference_map(m, {3, 4}, 3), ArgumentError);
    CHECK_THROWS_AS(difference_map(m, {3, 3}, 2), ArgumentError);
}

TEST_CASE("expand_sample") {
    const auto e = expand_sample(-80.0, 3);
    CHECK(e.size() == 9u);
    for (double v : e) CHECK(v == -80.0);
}

TEST_CASE("augment_sample") {
    RadioMap m = constant_map(9, 9, -75.0);
    m.set({5, 4}, -73.0);
    const auto out = augment_sample({{4, 4}, -80.0}, m, 3);
    REQUIRE(out.size() == 9u);
    bool east = false;
    for (const auto& s : out) {
        if (s.index == GridIndex{5, 4}) {
            CHECK(s.power == -78.0);
            east = true;
        } else {
            CHECK(s.power == -80.0);
        }
    }
    CHECK(east);
    CHECK(out[4] == Sample{{4, 4}, -80.0});

    std::set<GridIndex> cells;
    for (const auto& s : augment_sample({{4, 4}, -80.0}, constant_map(9, 9, -60.0), 3)) {
        CHECK(s.power == -80.0);
        cells.insert(s.index);
    }
    CHECK(cells.size() == 9u);
    CHECK(augment_sample({{0, 0}, -80.0}, m, 3).size() == 4u);
    CHECK(augment_sample({{4, 4}, -80.0}, m, 5).size() == 25u);
}

TEST_CASE("augmented label equals measurement plus simulated difference") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        RadioMap m = test::random_map(12, 12, rng);
        if (trial % 2) m.set_unavailable({static_cast<int>(rng.index(12)), static_cast<int>(rng.index(12))});
        GridIndex c{static_cast<int>(rng.index(10)) + 1, static_cast<int>(rng.index(10)) + 1};
        if (!m.available(c)) continue;
        const double r = rng.uniform(-95, -60);
        for (const auto& s : augment_sample({c, r}, m, 3)) {
            CHECK(s.power == r + (m.power(s.index) - m.power(c)));
        }
    }
}

TEST_CASE("augment_samples deduplicates collisions") {
    const RadioMap m = constant_map(20, 20, -70.0);
    std::vector<Sample> two{{{5, 5}, -80.0}, {{6, 5}, -82.0}};
    const auto out = augment_samples(two, m, 3);
    CHECK(out.size() == 12u);
    std::set<GridIndex> cells;
    for (const auto& a : out) cells.insert(a.sample.index);
    CHECK(cells.size() == out.size());
    // the measured cells keep their own values
    for (const auto& a : out) {
        if (a.sample.index == GridIndex{5, 5}) CHECK(a.sample.power == -80.0);
        if (a.sample.index == GridIndex{6, 5}) CHECK(a.sample.power == -82.0);
    }
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].source <= out[i].source);
}

TEST_CASE("augment_dataset row counts") {
    const HeightGrid g(60, 60);
    const Scenario sc = default_scenario(g);
    const RadioMap sim = simulate_map(g, sc);
    std::vector<Sample> far;
    for (int i = 0; i < 80; ++i) far.push_back({{3 + 6 * (i % 9), 3 + 6 * (i / 9)}, -70.0 - i * 0.1});
    const FeatureShape shape{9, 3, {}, false};
    const Dataset d = augment_dataset(far, g, sc, sim, 3, shape);
    CHECK(d.size() == 720u);
    CHECK(d.provenance == Provenance::augmented);
    CHECK_NOTHROW(d.validate());

    const Dataset one = augment_dataset(far, g, sc, sim, 1, shape);
    const Dataset plain = featurize(far, g, sc, sim, shape, Provenance::measured);
    CHECK(one.provenance == Provenance::measured);
    REQUIRE(one.size() == plain.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one.rows[i].index == plain.rows[i].index);
        CHECK(one.rows[i].target == plain.rows[i].target);
        CHECK(one.rows[i].features == plain.rows[i].features);
    }

    const std::vector<Sample> close{{{20, 20}, -80.0}, {{21, 20}, -81.0}};
    CHECK(augment_dataset(close, g, sc, sim, 3, shape).size() < 18u);
}

TEST_CASE("augmented labels below the floor are dropped") {
    RadioMap m = constant_map(9, 9, -90.0);
    m.set({5, 4}, -140.0);
    m.set({3, 4}, -95.0);  // label exactly at the floor
    const std::vector<Sample> one{{{4, 4}, -95.0}};
    CHECK(augment_samples(one, m, 3).size() == 9u);
    const auto kept = augment_samples(one, m, 3, -100.0);
    REQUIRE(kept.size() == 8u);
    for (const auto& a : kept) CHECK(a.sample.index != GridIndex{5, 4});
    // the measured cell stays even below the floor
    const std::vector<Sample> low{{{4, 4}, -120.0}};
    const auto centre = augment_samples(low, m, 3, -100.0);
    REQUIRE(centre.size() == 1u);
    CHECK(centre[0].sample == low[0]);
}
