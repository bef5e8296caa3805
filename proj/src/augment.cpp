#include "rpp/augment.hpp"

#include <algorithm>
#include <map>

#include "rpp/error.hpp"

namespace rpp {

namespace {

void require_odd(int n) {
    if (n < 1 || n % 2 == 0) throw ArgumentError("augmentation size must be odd and positive");
}

}  // namespace

const std::optional<double>& DifferenceMap::at(int dcol, int drow) const {
    const int half = size / 2;
    if (dcol < -half || dcol > half || drow < -half || drow > half) throw RangeError("difference map offset");
    return entries[static_cast<std::size_t>(drow + half) * static_cast<std::size_t>(size) +
                   static_cast<std::size_t>(dcol + half)];
}

DifferenceMap difference_map(const RadioMap& sim_map, GridIndex center, int n) {
    require_odd(n);
    if (!sim_map.available(center)) throw ArgumentError("difference_map: centre cell unavailable in simulation");
    const double c = sim_map.power(center);
    const int half = n / 2;
    DifferenceMap d;
    d.size = n;
    d.entries.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) {
            auto& e = d.entries[static_cast<std::size_t>(dr + half) * n + static_cast<std::size_t>(dc + half)];
            if (dr == 0 && dc == 0) {
                e = 0.0;
            } else if (auto p = sim_map.value({center.col + dc, center.row + dr})) {
                e = *p - c;
            }
        }
    }
    return d;
}

std::vector<double> expand_sample(double measured, int n) {
    require_odd(n);
    return std::vector<double>(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), measured);
}

std::vector<Sample> augment_sample(const Sample& sample, const RadioMap& sim_map, int n) {
    const DifferenceMap d = difference_map(sim_map, sample.index, n);
    const int half = n / 2;
    std::vector<Sample> out;
    out.reserve(d.entries.size());
    for (int dr = -half; dr <= half; ++dr) {
        for (int dc = -half; dc <= half; ++dc) {
            if (dr == 0 && dc == 0) {
                out.push_back(sample);
                continue;
            }
            const auto& e = d.at(dc, dr);
            if (!e) continue;
            out.push_back({{sample.index.col + dc, sample.index.row + dr}, sample.power + *e});
        }
    }
    return out;
}

std::vector<AugmentedSample> augment_samples(std::span<const Sample> samples, const RadioMap& sim_map, int n,
                                             double min_power) {
    require_odd(n);
    std::vector<AugmentedSample> all;
    all.reserve(samples.size() * static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
    for (std::size_t s = 0; s < samples.size(); ++s) {
        for (const auto& a : augment_sample(samples[s], sim_map, n)) {
            all.push_back({a, s, a.index.col - samples[s].index.col, a.index.row - samples[s].index.row});
        }
    }
    // Winner per cell: smallest squared offset, then earliest source.
    std::map<GridIndex, std::size_t> winner;
    const auto dist2 = [](const AugmentedSample& a) { return a.dcol * a.dcol + a.drow * a.drow; };
    for (std::size_t i = 0; i < all.size(); ++i) {
        auto [it, inserted] = winner.try_emplace(all[i].sample.index, i);
        if (!inserted && dist2(all[i]) < dist2(all[it->second])) it->second = i;
    }
    std::vector<AugmentedSample> out;
    out.reserve(winner.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (winner.at(all[i].sample.index) != i) continue;
        if (dist2(all[i]) > 0 && all[i].sample.power < min_power) continue;
        out.push_back(all[i]);
    }
    return out;
}

Dataset augment_dataset(std::span<const Sample> samples, const HeightGrid& grid, const Scenario& scenario,
                        const RadioMap& sim_map, int n, const FeatureShape& shape, double min_power) {
    const auto augmented = augment_samples(samples, sim_map, n, min_power);
    std::vector<Sample> flat;
    flat.reserve(augmented.size());
    for (const auto& a : augmented) flat.push_back(a.sample);
    return featurize(flat, grid, scenario, sim_map, shape, n == 1 ? Provenance::measured : Provenance::augmented);
}

}  // namespace rpp
