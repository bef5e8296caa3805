#pragma once

#include <span>
#include <utility>
#include <vector>

#include "rpp/grid.hpp"

namespace rpp {

// ---- linear interpolation -------------------------------------------------

// Nearest sample in each quadrant around `target`, inverse-distance weighted.
// A sample on the target is returned as is.
double linear_interp_predict(std::span<const Sample> samples, GridIndex target);

// ---- ordinary Kriging -----------------------------------------------------

struct VariogramBin {
    double lag = 0.0;           // mean pair distance in the bin, m
    double semivariance = 0.0;  // dB^2
    std::size_t count = 0;
};

std::vector<VariogramBin> empirical_variogram(std::span<const Sample> samples, double cell_size = 1.0,
                                              double bin_width = 5.0, double max_lag = 100.0);

// gamma(h) = nugget + sill * (1 - exp(-h / range)) for h > 0, gamma(0) = 0.
struct VariogramModel {
    double nugget = 0.0;
    double sill = 0.0;
    double range = 1.0;

    double operator()(double h) const;
    void validate() const;
};

// Count-weighted least squares over a log-spaced range search with the
// nugget and sill solved in closed form (both kept >= 0).
VariogramModel fit_variogram(std::span<const VariogramBin> bins);

inline constexpr std::size_t kKrigingNeighbors = 32;

struct KrigingResult {
    double value = 0.0;
    double variance = 0.0;
    std::vector<double> weights;          // one per entry of `neighbors`
    std::vector<GridIndex> neighbors;     // after deduplication
};

// Samples sharing a cell are averaged first. Throws NumericError when the
// system is singular.
KrigingResult kriging_predict(std::span<const Sample> samples, const VariogramModel& model, GridIndex target,
                              double cell_size = 1.0, std::size_t max_neighbors = kKrigingNeighbors);

// ---- simulation offset ----------------------------------------------------

struct OffsetModel {
    double alpha = 0.0;
};

// pairs of (measured, simulated) dBm.
OffsetModel offset_fit(std::span<const std::pair<double, double>> pairs);
double offset_predict(const RadioMap& sim_map, const OffsetModel& model, GridIndex index);

}  // namespace rpp
