#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "rpp/dataset.hpp"
#include "rpp/grid.hpp"

namespace rpp {

// Simulated power offsets around a centre cell, row-major over the N x N
// block. Missing entries are off-grid or unavailable neighbours.
struct DifferenceMap {
    int size = 0;
    std::vector<std::optional<double>> entries;

    // Offsets in cells from the centre, each in [-size/2, size/2].
    const std::optional<double>& at(int dcol, int drow) const;
};

DifferenceMap difference_map(const RadioMap& sim_map, GridIndex center, int n);

// The measured value spread over an N x N block.
std::vector<double> expand_sample(double measured, int n);

// One sample per non-missing difference entry, row-major over the block.
// The centre entry reproduces `sample`.
std::vector<Sample> augment_sample(const Sample& sample, const RadioMap& sim_map, int n);

struct AugmentedSample {
    Sample sample;
    std::size_t source = 0;  // index into the input sample list
    int dcol = 0, drow = 0;  // offset from the source cell
};

// augment_sample over every input, one sample per cell. When cells collide
// the sample nearest its source wins, then the earliest source. Winners whose
// label falls below `min_power` are dropped, except the measured cells
// themselves. Ordered by source, then by offset.
std::vector<AugmentedSample> augment_samples(std::span<const Sample> samples, const RadioMap& sim_map, int n,
                                             double min_power = -std::numeric_limits<double>::infinity());

// augment_samples followed by features built at each augmented cell.
Dataset augment_dataset(std::span<const Sample> samples, const HeightGrid& grid, const Scenario& scenario,
                        const RadioMap& sim_map, int n, const FeatureShape& shape,
                        double min_power = -std::numeric_limits<double>::infinity());

}  // namespace rpp
