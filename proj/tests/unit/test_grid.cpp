#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "rpp/error.hpp"
#include "rpp/grid.hpp"

using namespace rpp;

TEST_CASE("cell_center") {
    const HeightGrid g(30, 30);
    CHECK(cell_center(g, {0, 0}, 1.0) == Vec3{0.5, 0.5, 1.0});
    CHECK(cell_center(g, {10, 20}, 0.0) == Vec3{10.5, 20.5, 0.0});
    const HeightGrid g2(5, 5, 2.0);
    CHECK(cell_center(g2, {3, 0}, 1.0) == Vec3{7.0, 1.0, 1.0});
    CHECK_THROWS_AS(cell_center(g, {30, 0}, 1.0), RangeError);
}

TEST_CASE("quantize_heights picks the nearest level, ties low") {
    const std::vector<double> levels{0.0, 6.5, 13.0, 26.0};
    const HeightGrid g(3, 1, {10.0, 0.0, 9.75});
    const HeightGrid q = quantize_heights(g, levels);
    CHECK(q.at(0, 0) == 13.0);
    CHECK(q.at(1, 0) == 0.0);
    CHECK(q.at(2, 0) == 6.5);
}

TEST_CASE("quantize_heights output is always a level") {
    Rng rng(3);
    std::vector<double> h(400);
    for (auto& v : h) v = rng.uniform(0.0, 40.0);
    const std::vector<double> levels{0.0, 6.5, 13.0, 26.0};
    const HeightGrid q = quantize_heights(HeightGrid(20, 20, h), levels);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double v = q.heights()[i];
        CHECK(std::find(levels.begin(), levels.end(), v) != levels.end());
        for (double l : levels) CHECK(std::abs(h[i] - v) <= std::abs(h[i] - l));
    }
}

TEST_CASE("height grid file round trip") {
    const auto path = test::scratch("g2.grid");
    {
        std::ofstream f(path);
        f << "2 2 1\n0 6.5\n13 26\n";
    }
    const HeightGrid g = load_height_grid(path);
    CHECK(g.width() == 2);
    CHECK(g.at(0, 0) == 0.0);
    CHECK(g.at(1, 0) == 6.5);
    CHECK(g.at(0, 1) == 13.0);
    CHECK(g.at(1, 1) == 26.0);
    save_height_grid(g, path);
    CHECK(load_height_grid(path) == g);
}

TEST_CASE("short row is a parse error naming the line") {
    const auto path = test::scratch("bad.grid");
    {
        std::ofstream f(path);
        f << "3 2 1\n0 0 0\n1 2\n";
    }
    try {
        (void)load_height_grid(path);
        FAIL("no error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(load_height_grid(test::scratch("missing.grid")), IoError);
}

TEST_CASE("radio map round trip keeps unavailable cells and exact values") {
    Rng rng(11);
    RadioMap m = test::random_map(7, 5, rng);
    m.set_unavailable({3, 2});
    const auto path = test::scratch("m.map");
    save_radio_map(m, path);
    const RadioMap back = load_radio_map(path);
    CHECK(back == m);
    CHECK_FALSE(back.available({3, 2}));
    CHECK(back.available_count() == 34);
}

TEST_CASE("samples round trip") {
    const std::vector<Sample> s{{{1, 2}, -80.125}, {{4, 0}, -71.0 / 3.0}};
    const auto path = test::scratch("s.tsv");
    save_samples(s, path);
    CHECK(load_samples(path) == s);
}

TEST_CASE("generate_city is deterministic and uses the three building heights") {
    const HeightGrid a = generate_city(64, 64, 5);
    CHECK(a == generate_city(64, 64, 5));
    CHECK_FALSE(a == generate_city(64, 64, 6));
    int buildings = 0;
    for (double h : a.heights()) {
        CHECK((h == 0.0 || h == 6.5 || h == 13.0 || h == 26.0));
        buildings += h > 0.0;
    }
    CHECK(buildings > 0);
    CHECK(a.at(32, 32) == 0.0);  // plaza round the mast
}
