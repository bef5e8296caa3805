#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "rpp/grid.hpp"
#include "rpp/random.hpp"

namespace rpp::test {

// Scratch directory unique to this process, created on first use.
inline std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rpp_unit_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir / name;
}

inline HeightGrid flat_grid(int w, int h) { return HeightGrid(w, h); }

// Random map with every cell available, values in [lo, hi].
inline RadioMap random_map(int w, int h, Rng& rng, double lo = -100.0, double hi = -50.0) {
    RadioMap m(w, h);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) m.set({c, r}, rng.uniform(lo, hi));
    }
    return m;
}

}  // namespace rpp::test
