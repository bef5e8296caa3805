#include "rpp/dataset.hpp"

#include <cmath>
#include <set>

#include "rpp/error.hpp"

namespace rpp {

const char* to_string(Provenance p) {
    switch (p) {
        case Provenance::simulated: return "simulated";
        case Provenance::measured: return "measured";
        case Provenance::augmented: return "augmented";
    }
    return "unknown";
}

void Dataset::validate() const {
    std::set<GridIndex> seen;
    for (const auto& row : rows) {
        if (!std::isfinite(row.target)) throw ArgumentError("dataset: non-finite target");
        if (!seen.insert(row.index).second) {
            throw ArgumentError("dataset: duplicate cell (" + std::to_string(row.index.col) + ", " +
                                std::to_string(row.index.row) + ")");
        }
    }
}

Dataset featurize(std::span<const Sample> samples, const HeightGrid& grid, const Scenario& scenario,
                  const RadioMap& sim_map, const FeatureShape& shape, Provenance provenance) {
    Dataset out;
    out.provenance = provenance;
    out.rows.reserve(samples.size());
    for (const auto& s : samples) {
        out.rows.push_back({make_features(grid, scenario, sim_map, s.index, shape.window, shape.srp_size, shape.norm,
                                          shape.mask_srp_center),
                            s.index, s.power});
    }
    return out;
}

Dataset simulated_dataset(std::span<const GridIndex> cells, const HeightGrid& grid, const Scenario& scenario,
                          const RadioMap& sim_map, const FeatureShape& shape) {
    std::vector<Sample> samples;
    samples.reserve(cells.size());
    for (const auto& c : cells) samples.push_back({c, sim_map.power(c)});
    return featurize(samples, grid, scenario, sim_map, shape, Provenance::simulated);
}

}  // namespace rpp
