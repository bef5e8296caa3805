#include "rpp/features.hpp"

#include <algorithm>
#include <cmath>

#include "rpp/error.hpp"

namespace rpp {

namespace {

void require_odd(int size, const char* what) {
    if (size < 1 || size % 2 == 0) throw ArgumentError(std::string(what) + ": size must be odd and positive");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

std::vector<double> bs_distance_map(const HeightGrid& grid, const Scenario& scenario, GridIndex center, int window,
                                    const Normalization& norm) {
    require_odd(window, "bs_distance_map");
    const int half = window / 2;
    const double cs = grid.cell_size();
    const Vec3& bs = scenario.bs_position;
    std::vector<double> out(static_cast<std::size_t>(window) * window);
    for (int v = 0; v < window; ++v) {
        const double y = grid.origin_y() + (center.row - half + v + 0.5) * cs;
        for (int u = 0; u < window; ++u) {
            const double x = grid.origin_x() + (center.col - half + u + 0.5) * cs;
            const double dx = x - bs.x;
            const double dy = y - bs.y;
            const double dz = kFeatureHeight - bs.z;
            out[static_cast<std::size_t>(v) * window + u] =
                clamp01(std::sqrt(dx * dx + dy * dy + dz * dz) / norm.distance);
        }
    }
    return out;
}

std::vector<double> ms_distance_map(int window) {
    require_odd(window, "ms_distance_map");
    const int half = window / 2;
    std::vector<double> out(static_cast<std::size_t>(window) * window, 0.0);
    if (half == 0) return out;
    const double corner = std::sqrt(2.0) * half;
    for (int v = 0; v < window; ++v) {
        for (int u = 0; u < window; ++u) {
            out[static_cast<std::size_t>(v) * window + u] = std::hypot(u - half, v - half) / corner;
        }
    }
    return out;
}

std::vector<double> building_height_map(const HeightGrid& grid, GridIndex center, int window,
                                        const Normalization& norm) {
    require_odd(window, "building_height_map");
    const int half = window / 2;
    std::vector<double> out(static_cast<std::size_t>(window) * window, 0.0);
    for (int v = 0; v < window; ++v) {
        for (int u = 0; u < window; ++u) {
            const GridIndex cell{center.col - half + u, center.row - half + v};
            if (grid.contains(cell)) out[static_cast<std::size_t>(v) * window + u] = clamp01(grid.at(cell) / norm.height);
        }
    }
    return out;
}

std::vector<double> srp_map(const RadioMap& sim_map, GridIndex center, int size, const Normalization& norm,
                            bool mask_center) {
    require_odd(size, "srp_map");
    if (!sim_map.available(center)) throw ArgumentError("srp_map: centre cell unavailable in simulation");
    const int half = size / 2;
    const double center_power = sim_map.power(center);
    std::vector<double> raw(static_cast<std::size_t>(size) * size);
    for (int v = 0; v < size; ++v) {
        for (int u = 0; u < size; ++u) {
            const auto p = sim_map.value({center.col - half + u, center.row - half + v});
            raw[static_cast<std::size_t>(v) * size + u] = p.value_or(center_power);
        }
    }
    if (mask_center && raw.size() > 1) {
        const std::size_t mid = static_cast<std::size_t>(half) * size + half;
        double sum = 0.0;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (i != mid) sum += raw[i];
        }
        raw[mid] = sum / static_cast<double>(raw.size() - 1);
    }
    for (double& p : raw) p = clamp01(norm.normalize_power(p));
    return raw;
}

FeatureTensor make_features(const HeightGrid& grid, const Scenario& scenario, const RadioMap& sim_map,
                            GridIndex center, int window, int srp_size, const Normalization& norm,
                            bool mask_srp_center) {
    FeatureTensor f;
    f.window = window;
    f.srp_size = srp_size;
    const auto bs = bs_distance_map(grid, scenario, center, window, norm);
    const auto ms = ms_distance_map(window);
    const auto bld = building_height_map(grid, center, window, norm);
    f.wide.reserve(bs.size() * 3);
    f.wide.insert(f.wide.end(), bs.begin(), bs.end());
    f.wide.insert(f.wide.end(), ms.begin(), ms.end());
    f.wide.insert(f.wide.end(), bld.begin(), bld.end());
    f.srp = srp_map(sim_map, center, srp_size, norm, mask_srp_center);
    return f;
}

}  // namespace rpp
