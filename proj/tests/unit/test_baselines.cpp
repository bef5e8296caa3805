#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <Eigen/Dense>

#include "helpers.hpp"
#include "rpp/baselines.hpp"
#include "rpp/error.hpp"

using namespace rpp;

TEST_CASE("linear interpolation") {
    const std::vector<Sample> s{{{0, 5}, -70.0}, {{10, 5}, -80.0}};
    CHECK(linear_interp_predict(s, {0, 5}) == -70.0);
    CHECK(linear_interp_predict(s, {5, 5}) == doctest::Approx(-75.0));

    const std::vector<Sample> ne{{{6, 6}, -71.0}, {{8, 9}, -90.0}, {{7, 7}, -85.0}};
    CHECK(linear_interp_predict(ne, {5, 5}) == -71.0);
    CHECK_THROWS_AS(linear_interp_predict(std::vector<Sample>{}, {0, 0}), ArgumentError);
}

TEST_CASE("linear interpolation stays within the sample range") {
    Rng rng(3);
    std::vector<Sample> s;
    for (int i = 0; i < 40; ++i) {
        s.push_back({{static_cast<int>(rng.index(50)), static_cast<int>(rng.index(50))}, rng.uniform(-95, -60)});
    }
    for (int i = 0; i < 200; ++i) {
        const double p = linear_interp_predict(s, {static_cast<int>(rng.index(50)), static_cast<int>(rng.index(50))});
        CHECK(p >= -95.0);
        CHECK(p <= -60.0);
    }
}

TEST_CASE("empirical variogram") {
    std::vector<Sample> flat;
    for (int i = 0; i < 10; ++i) flat.push_back({{i, 2 * i}, -70.0});
    for (const auto& b : empirical_variogram(flat)) CHECK(b.semivariance == 0.0);

    const std::vector<Sample> two{{{0, 0}, -70.0}, {{3, 0}, -74.0}};
    const auto bins = empirical_variogram(two);
    REQUIRE(bins.size() == 1u);
    CHECK(bins[0].semivariance == 8.0);
    CHECK(bins[0].lag == 3.0);
    CHECK(bins[0].count == 1u);
}

TEST_CASE("variogram fit recovers an exact model") {
    const VariogramModel truth{1.5, 9.0, 12.0};
    std::vector<VariogramBin> bins;
    for (int k = 0; k < 20; ++k) {
        const double h = 2.5 + 5.0 * k;
        bins.push_back({h, truth(h), static_cast<std::size_t>(50 + k)});
    }
    const VariogramModel fit = fit_variogram(bins);
    CHECK(fit.nugget == doctest::Approx(truth.nugget).epsilon(1e-3));
    CHECK(fit.sill == doctest::Approx(truth.sill).epsilon(1e-3));
    CHECK(fit.range == doctest::Approx(truth.range).epsilon(1e-3));
    const VariogramModel again = fit_variogram(bins);
    CHECK(again.nugget == fit.nugget);
    CHECK(again.sill == fit.sill);
    CHECK(again.range == fit.range);
}

TEST_CASE("flat variogram falls back to a pure nugget") {
    std::vector<VariogramBin> bins;
    for (int k = 0; k < 10; ++k) bins.push_back({2.5 + 5.0 * k, 4.0, 10});
    const VariogramModel fit = fit_variogram(bins);
    CHECK(fit.sill == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(fit.nugget == doctest::Approx(4.0));
    CHECK_THROWS_AS(fit_variogram(std::vector<VariogramBin>(bins.begin(), bins.begin() + 2)), FitError);
}

TEST_CASE("generate-then-fit variogram recovery") {
    // Gaussian field with exponential covariance, drawn by Cholesky.
    const VariogramModel truth{0.0, 16.0, 8.0};
    const int side = 40;
    Rng rng(5);
    std::vector<GridIndex> pts;
    for (int i = 0; i < 500; ++i) pts.push_back({static_cast<int>(rng.index(side * 4)), static_cast<int>(rng.index(side * 4))});
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    const auto n = static_cast<Eigen::Index>(pts.size());
    Eigen::MatrixXd cov(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double h = std::hypot(pts[i].col - pts[j].col, pts[i].row - pts[j].row);
            cov(i, j) = truth.sill * std::exp(-h / truth.range);
        }
        cov(i, i) += 1e-9;
    }
    const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL();
    double sill = 0.0, range = 0.0;
    const int fields = 6;
    for (int f = 0; f < fields; ++f) {
        Eigen::VectorXd z(n);
        for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
        const Eigen::VectorXd v = l * z;
        std::vector<Sample> s;
        for (Eigen::Index i = 0; i < n; ++i) s.push_back({pts[i], -80.0 + v(i)});
        const auto fit = fit_variogram(empirical_variogram(s, 1.0, 2.0, 40.0));
        sill += fit.nugget + fit.sill;
        range += fit.range;
    }
    CHECK(std::abs(sill / fields - 16.0) / 16.0 < 0.25);
    CHECK(std::abs(range / fields - 8.0) / 8.0 < 0.25);
}

TEST_CASE("kriging") {
    const VariogramModel model{0.0, 10.0, 15.0};
    const std::vector<Sample> one{{{3, 4}, -77.0}};
    const auto r1 = kriging_predict(one, model, {20, 20});
    CHECK(r1.value == doctest::Approx(-77.0));
    REQUIRE(r1.weights.size() == 1u);
    CHECK(r1.weights[0] == doctest::Approx(1.0));

    Rng rng(6);
    std::vector<Sample> s;
    for (int i = 0; i < 25; ++i) {
        s.push_back({{static_cast<int>(rng.index(40)), static_cast<int>(rng.index(40))}, rng.uniform(-95, -60)});
    }
    const auto merged = [&] {
        std::map<GridIndex, std::pair<double, int>> m;
        for (const auto& x : s) {
            m[x.index].first += x.power;
            ++m[x.index].second;
        }
        return m;
    }();
    for (const auto& [idx, v] : merged) {
        const auto r = kriging_predict(s, model, idx);
        CHECK(std::abs(r.value - v.first / v.second) < 1e-6);
    }
    for (int i = 0; i < 20; ++i) {
        const auto r = kriging_predict(s, model, {static_cast<int>(rng.index(40)), static_cast<int>(rng.index(40))});
        CHECK(std::abs(std::accumulate(r.weights.begin(), r.weights.end(), 0.0) - 1.0) < 1e-9);
        CHECK(r.variance >= -1e-9);
    }

    const std::vector<Sample> sym{{{10, 5}, -70.0}, {{10, 15}, -80.0}};
    for (const auto& m : {model, VariogramModel{2.0, 5.0, 3.0}}) {
        const auto r = kriging_predict(sym, m, {10, 10});
        CHECK(r.value == doctest::Approx(-75.0));
        CHECK(r.weights[0] == doctest::Approx(0.5));
    }
    const auto flat = kriging_predict(sym, VariogramModel{0.0, 0.0, 5.0}, {1, 1});
    CHECK(flat.value == doctest::Approx(-75.0));
}

TEST_CASE("offset baseline") {
    const std::vector<std::pair<double, double>> p{{-80.0, -85.0}, {-70.0, -77.0}};
    CHECK(offset_fit(p).alpha == doctest::Approx(6.0));
    const std::vector<std::pair<double, double>> same{{-80.0, -80.0}, {-61.5, -61.5}};
    CHECK(offset_fit(same).alpha == 0.0);

    Rng rng(7);
    std::vector<std::pair<double, double>> r;
    for (int i = 0; i < 30; ++i) {
        const double sim = rng.uniform(-100, -60);
        r.emplace_back(sim + 4.0 + 3.0 * rng.normal(), sim);
    }
    const double alpha = offset_fit(r).alpha;
    double best = 0.0, best_obj = 1e300;
    for (int k = -30000; k <= 30000; ++k) {
        const double a = k * 0.001;
        double obj = 0.0;
        for (const auto& [y, s] : r) obj += (y - s - a) * (y - s - a);
        if (obj < best_obj) {
            best_obj = obj;
            best = a;
        }
    }
    CHECK(std::abs(best - alpha) <= 0.001);
    double resid = 0.0;
    for (const auto& [y, s] : r) resid += y - (s + alpha);
    CHECK(std::abs(resid / r.size()) < 1e-9);

    RadioMap sim(3, 3);
    sim.set({1, 1}, -75.0);
    CHECK(offset_predict(sim, {0.0}, {1, 1}) == -75.0);
    CHECK(offset_predict(sim, {6.0}, {1, 1}) == -69.0);
    CHECK_THROWS_AS(offset_predict(sim, {6.0}, {0, 0}), ArgumentError);
    CHECK_THROWS_AS(offset_fit(std::vector<std::pair<double, double>>{}), ArgumentError);
}
