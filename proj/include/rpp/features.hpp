#pragma once

#include <span>
#include <vector>

#include "rpp/grid.hpp"

namespace rpp {

// Fixed normalisation shared by pre-training, fine-tuning and prediction.
struct Normalization {
    double distance = 500.0;   // m
    double height = 26.0;      // m
    double power_min = -110.0; // dBm
    double power_max = -40.0;  // dBm

    double normalize_power(double dbm) const noexcept { return (dbm - power_min) / (power_max - power_min); }
    double denormalize_power(double y) const noexcept { return power_min + (power_max - power_min) * y; }

    friend bool operator==(const Normalization&, const Normalization&) = default;
};

inline constexpr double kFeatureHeight = 1.0;  // MS evaluation height for the BS distance map

// The four per-location input maps. `wide` stacks the three W x W planes
// [bs_distance, ms_distance, building] row-major; `srp` is S x S.
struct FeatureTensor {
    int window = 0;
    int srp_size = 0;
    std::vector<double> wide;
    std::vector<double> srp;

    std::span<const double> bs_distance() const { return plane(0); }
    std::span<const double> ms_distance() const { return plane(1); }
    std::span<const double> building() const { return plane(2); }

    friend bool operator==(const FeatureTensor&, const FeatureTensor&) = default;

private:
    std::span<const double> plane(int k) const {
        const auto n = static_cast<std::size_t>(window) * static_cast<std::size_t>(window);
        return std::span<const double>(wide).subspan(static_cast<std::size_t>(k) * n, n);
    }
};

// Each map builder throws ArgumentError for an even window size.
std::vector<double> bs_distance_map(const HeightGrid& grid, const Scenario& scenario, GridIndex center, int window,
                                    const Normalization& norm = {});
std::vector<double> ms_distance_map(int window);
std::vector<double> building_height_map(const HeightGrid& grid, GridIndex center, int window,
                                        const Normalization& norm = {});

// Simulated power around `center`; unavailable or off-grid neighbours take
// the centre's value. With mask_center the centre is replaced by the mean of
// its neighbours (after filling).
std::vector<double> srp_map(const RadioMap& sim_map, GridIndex center, int size, const Normalization& norm = {},
                            bool mask_center = false);

FeatureTensor make_features(const HeightGrid& grid, const Scenario& scenario, const RadioMap& sim_map,
                            GridIndex center, int window, int srp_size, const Normalization& norm = {},
                            bool mask_srp_center = false);

}  // namespace rpp
