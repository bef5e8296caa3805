#pragma once

#include <span>
#include <string>
#include <vector>

#include "rpp/features.hpp"
#include "rpp/grid.hpp"

namespace rpp {

enum class Provenance { simulated, measured, augmented };

const char* to_string(Provenance p);

struct DatasetRow {
    FeatureTensor features;
    GridIndex index;
    double target = 0.0;  // dBm
};

struct Dataset {
    Provenance provenance = Provenance::measured;
    std::vector<DatasetRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }

    // Throws ArgumentError on a duplicate index or a non-finite target.
    void validate() const;
};

struct FeatureShape {
    int window = 65;
    int srp_size = 3;
    Normalization norm;
    bool mask_srp_center = false;
};

// One row per sample with features built at the sample's own cell.
Dataset featurize(std::span<const Sample> samples, const HeightGrid& grid, const Scenario& scenario,
                  const RadioMap& sim_map, const FeatureShape& shape, Provenance provenance);

// Simulated rows: labels are the simulated powers at `cells`.
Dataset simulated_dataset(std::span<const GridIndex> cells, const HeightGrid& grid, const Scenario& scenario,
                          const RadioMap& sim_map, const FeatureShape& shape);

}  // namespace rpp
