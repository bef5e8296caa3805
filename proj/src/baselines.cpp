#include "rpp/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <Eigen/Dense>

#include "rpp/error.hpp"

namespace rpp {

double linear_interp_predict(std::span<const Sample> samples, GridIndex target) {
    if (samples.empty()) throw ArgumentError("linear_interp_predict: no samples");
    // NE, NW, SW, SE; each axis-aligned direction belongs to exactly one.
    std::array<std::optional<std::size_t>, 4> best;
    std::array<double, 4> best_d{};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const int dx = samples[i].index.col - target.col;
        const int dy = samples[i].index.row - target.row;
        if (dx == 0 && dy == 0) return samples[i].power;
        int q;
        if (dx > 0 && dy >= 0) {
            q = 0;
        } else if (dx <= 0 && dy > 0) {
            q = 1;
        } else if (dx < 0 && dy <= 0) {
            q = 2;
        } else {
            q = 3;
        }
        const double d = std::hypot(static_cast<double>(dx), static_cast<double>(dy));
        if (!best[q] || d < best_d[q]) {
            best[q] = i;
            best_d[q] = d;
        }
    }
    double num = 0.0;
    double den = 0.0;
    for (int q = 0; q < 4; ++q) {
        if (!best[q]) continue;
        const double w = 1.0 / best_d[q];
        num += w * samples[*best[q]].power;
        den += w;
    }
    return num / den;
}

std::vector<VariogramBin> empirical_variogram(std::span<const Sample> samples, double cell_size, double bin_width,
                                              double max_lag) {
    if (samples.size() < 2) throw ArgumentError("empirical_variogram: need at least 2 samples");
    if (!(cell_size > 0.0) || !(bin_width > 0.0) || !(max_lag > 0.0)) {
        throw ArgumentError("empirical_variogram: cell size, bin width and max lag must be positive");
    }
    const auto nbins = static_cast<std::size_t>(std::ceil(max_lag / bin_width));
    std::vector<double> lag(nbins, 0.0), gamma(nbins, 0.0);
    std::vector<std::size_t> count(nbins, 0);
    for (std::size_t a = 0; a < samples.size(); ++a) {
        for (std::size_t b = a + 1; b < samples.size(); ++b) {
            const double d = cell_size * std::hypot(static_cast<double>(samples[a].index.col - samples[b].index.col),
                                                    static_cast<double>(samples[a].index.row - samples[b].index.row));
            if (d > max_lag) continue;
            const auto k = std::min(nbins - 1, static_cast<std::size_t>(d / bin_width));
            const double dz = samples[a].power - samples[b].power;
            lag[k] += d;
            gamma[k] += 0.5 * dz * dz;
            ++count[k];
        }
    }
    std::vector<VariogramBin> out;
    for (std::size_t k = 0; k < nbins; ++k) {
        if (count[k] == 0) continue;
        const auto n = static_cast<double>(count[k]);
        out.push_back({lag[k] / n, gamma[k] / n, count[k]});
    }
    return out;
}

double VariogramModel::operator()(double h) const {
    if (h <= 0.0) return 0.0;
    return nugget + sill * (1.0 - std::exp(-h / range));
}

void VariogramModel::validate() const {
    if (!(nugget >= 0.0) || !(sill >= 0.0) || !(range > 0.0) || !std::isfinite(nugget + sill + range)) {
        throw ArgumentError("variogram model needs nugget >= 0, sill >= 0, range > 0");
    }
}

namespace {

struct Fit {
    double nugget = 0.0, sill = 0.0, sse = std::numeric_limits<double>::infinity();
};

Fit fit_at_range(std::span<const VariogramBin> bins, double range) {
    double s = 0, sf = 0, sff = 0, sg = 0, sfg = 0;
    for (const auto& b : bins) {
        const double w = static_cast<double>(b.count);
        const double f = 1.0 - std::exp(-b.lag / range);
        s += w;
        sf += w * f;
        sff += w * f * f;
        sg += w * b.semivariance;
        sfg += w * f * b.semivariance;
    }
    const auto sse = [&](double c0, double c1) {
        double e = 0.0;
        for (const auto& b : bins) {
            const double r = b.semivariance - c0 - c1 * (1.0 - std::exp(-b.lag / range));
            e += static_cast<double>(b.count) * r * r;
        }
        return e;
    };
    Fit best;
    const auto consider = [&](double c0, double c1) {
        if (c0 < 0.0 || c1 < 0.0) return;
        const double e = sse(c0, c1);
        if (e < best.sse) best = {c0, c1, e};
    };
    const double det = s * sff - sf * sf;
    if (det > 1e-12 * s * sff) {
        const double c1 = (s * sfg - sf * sg) / det;
        consider((sg - c1 * sf) / s, c1);
    }
    consider(std::max(0.0, sg / s), 0.0);
    if (sff > 0.0) consider(0.0, std::max(0.0, sfg / sff));
    return best;
}

}  // namespace

VariogramModel fit_variogram(std::span<const VariogramBin> bins) {
    std::vector<VariogramBin> used;
    for (const auto& b : bins) {
        if (b.count > 0) used.push_back(b);
    }
    if (used.size() < 3) throw FitError("fit_variogram: need at least 3 non-empty bins");
    double min_lag = std::numeric_limits<double>::infinity();
    double max_lag = 0.0;
    for (const auto& b : used) {
        if (b.lag > 0.0) min_lag = std::min(min_lag, b.lag);
        max_lag = std::max(max_lag, b.lag);
    }
    if (!(max_lag > 0.0)) throw FitError("fit_variogram: all lags are zero");

    // Coarse log-spaced scan, then golden-section refinement in log(range).
    const double lo = std::log(0.1 * min_lag);
    const double hi = std::log(10.0 * max_lag);
    constexpr int kGrid = 200;
    int best_i = 0;
    Fit best;
    for (int i = 0; i < kGrid; ++i) {
        const Fit f = fit_at_range(used, std::exp(lo + (hi - lo) * i / (kGrid - 1)));
        if (f.sse < best.sse) {
            best = f;
            best_i = i;
        }
    }
    const double step = (hi - lo) / (kGrid - 1);
    double a = lo + step * std::max(0, best_i - 1);
    double b = lo + step * std::min(kGrid - 1, best_i + 1);
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = b - phi * (b - a);
    double x2 = a + phi * (b - a);
    Fit f1 = fit_at_range(used, std::exp(x1));
    Fit f2 = fit_at_range(used, std::exp(x2));
    for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
        if (f1.sse <= f2.sse) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = fit_at_range(used, std::exp(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = fit_at_range(used, std::exp(x2));
        }
    }
    double range = std::exp(lo + step * best_i);
    if (f1.sse < best.sse) {
        best = f1;
        range = std::exp(x1);
    }
    if (f2.sse < best.sse) {
        best = f2;
        range = std::exp(x2);
    }
    return {best.nugget, best.sill, range};
}

KrigingResult kriging_predict(std::span<const Sample> samples, const VariogramModel& model, GridIndex target,
                              double cell_size, std::size_t max_neighbors) {
    if (samples.empty()) throw ArgumentError("kriging_predict: no samples");
    if (max_neighbors == 0) throw ArgumentError("kriging_predict: max_neighbors must be positive");
    model.validate();

    std::map<GridIndex, std::pair<double, int>> merged;
    for (const auto& s : samples) {
        auto& m = merged[s.index];
        m.first += s.power;
        ++m.second;
    }
    struct Point {
        GridIndex index;
        double value;
        double dist;
    };
    std::vector<Point> points;
    points.reserve(merged.size());
    for (const auto& [idx, m] : merged) {
        points.push_back({idx, m.first / m.second,
                          cell_size * std::hypot(static_cast<double>(idx.col - target.col),
                                                 static_cast<double>(idx.row - target.row))});
    }
    std::stable_sort(points.begin(), points.end(), [](const Point& a, const Point& b) { return a.dist < b.dist; });
    if (points.size() > max_neighbors) points.resize(max_neighbors);

    const auto n = static_cast<Eigen::Index>(points.size());
    KrigingResult out;
    for (const auto& p : points) out.neighbors.push_back(p.index);

    if (model.nugget + model.sill == 0.0) {
        // Flat variogram: every unbiased weighting is optimal; use the uniform one.
        out.weights.assign(points.size(), 1.0 / static_cast<double>(points.size()));
        for (const auto& p : points) out.value += p.value / static_cast<double>(points.size());
        return out;
    }

    Eigen::MatrixXd a(n + 1, n + 1);
    Eigen::VectorXd rhs(n + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = cell_size * std::hypot(static_cast<double>(points[i].index.col - points[j].index.col),
                                                    static_cast<double>(points[i].index.row - points[j].index.row));
            a(i, j) = model(d);
        }
        a(i, n) = 1.0;
        a(n, i) = 1.0;
        rhs(i) = model(points[i].dist);
    }
    a(n, n) = 0.0;
    rhs(n) = 1.0;
    const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (!lu.isInvertible()) throw NumericError("kriging_predict: singular kriging system");
    const Eigen::VectorXd x = lu.solve(rhs);
    out.weights.resize(points.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        out.weights[static_cast<std::size_t>(i)] = x(i);
        out.value += x(i) * points[i].value;
        out.variance += x(i) * rhs(i);
    }
    out.variance += x(n);
    if (!std::isfinite(out.value)) throw NumericError("kriging_predict: non-finite prediction");
    return out;
}

OffsetModel offset_fit(std::span<const std::pair<double, double>> pairs) {
    if (pairs.empty()) throw ArgumentError("offset_fit: no pairs");
    double sum = 0.0;
    for (const auto& [measured, simulated] : pairs) sum += measured - simulated;
    const double alpha = sum / static_cast<double>(pairs.size());
    // One correction pass removes the rounding left in the mean.
    double resid = 0.0;
    for (const auto& [measured, simulated] : pairs) resid += measured - (simulated + alpha);
    return {alpha + resid / static_cast<double>(pairs.size())};
}

double offset_predict(const RadioMap& sim_map, const OffsetModel& model, GridIndex index) {
    if (!sim_map.available(index)) throw ArgumentError("offset_predict: cell unavailable in simulation");
    return sim_map.power(index) + model.alpha;
}

}  // namespace rpp
