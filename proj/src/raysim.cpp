#include "rpp/raysim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <thread>
#include <tuple>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWallNudge = 1e-7;

double distance3(const Vec3& a, const Vec3& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

double component(const Vec3& p, int axis) { return axis == 0 ? p.x : p.y; }
double along(const Vec3& p, int axis) { return axis == 0 ? p.y : p.x; }

Vec3 mirror(const Vec3& p, const Wall& w) {
    Vec3 m = p;
    if (w.axis == 0) {
        m.x = 2.0 * w.coord - p.x;
    } else {
        m.y = 2.0 * w.coord - p.y;
    }
    return m;
}

bool exterior(const Vec3& p, const Wall& w) { return (component(p, w.axis) - w.coord) * w.facing > 1e-9; }

// Intersection of segment a->b with the wall plane, if it hits the face.
std::optional<Vec3> hit_wall(const Vec3& a, const Vec3& b, const Wall& w) {
    const double ca = component(a, w.axis);
    const double cb = component(b, w.axis);
    if (ca == cb) return std::nullopt;
    const double t = (w.coord - ca) / (cb - ca);
    if (t <= 0.0 || t >= 1.0) return std::nullopt;
    Vec3 p{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)};
    const double s = along(p, w.axis);
    if (s < w.lo || s > w.hi || p.z < w.z_lo || p.z > w.z_hi) return std::nullopt;
    // Pull the point just off the face so the legs start in the exterior cell.
    if (w.axis == 0) {
        p.x = w.coord + kWallNudge * w.facing;
    } else {
        p.y = w.coord + kWallNudge * w.facing;
    }
    return p;
}

void check_inside(const HeightGrid& grid, const Vec3& p) {
    if (!grid.contains_point(p.x, p.y)) {
        throw RangeError("line_of_sight: endpoint (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                         ") outside grid");
    }
}

}  // namespace

SightLine line_of_sight(const HeightGrid& grid, const Vec3& a, const Vec3& b) {
    check_inside(grid, a);
    check_inside(grid, b);

    const double cs = grid.cell_size();
    const double ax = (a.x - grid.origin_x()) / cs;
    const double ay = (a.y - grid.origin_y()) / cs;
    const double dx = (b.x - a.x) / cs;
    const double dy = (b.y - a.y) / cs;

    SightLine result;
    result.horizontal_length = std::hypot(b.x - a.x, b.y - a.y);

    int col = std::clamp(static_cast<int>(std::floor(ax)), 0, grid.width() - 1);
    int row = std::clamp(static_cast<int>(std::floor(ay)), 0, grid.height() - 1);
    const int step_x = dx > 0 ? 1 : (dx < 0 ? -1 : 0);
    const int step_y = dy > 0 ? 1 : (dy < 0 ? -1 : 0);
    double t_max_x = dx > 0 ? (col + 1 - ax) / dx : (dx < 0 ? (ax - col) / -dx : kInf);
    double t_max_y = dy > 0 ? (row + 1 - ay) / dy : (dy < 0 ? (ay - row) / -dy : kInf);
    const double t_delta_x = dx != 0 ? 1.0 / std::abs(dx) : kInf;
    const double t_delta_y = dy != 0 ? 1.0 / std::abs(dy) : kInf;

    const auto ray_z = [&](double t) { return a.z + t * (b.z - a.z); };

    double t = 0.0;
    bool in_run = false;
    Obstruction current;
    while (true) {
        const double t_exit = std::min({t_max_x, t_max_y, 1.0});
        const double h = grid.at(col, row);
        const double z0 = ray_z(t);
        const double z1 = ray_z(t_exit);
        const double z_min = std::min(z0, z1);
        if (h > z_min) {
            const double depth = h - z_min;
            const double t_deep = z0 <= z1 ? t : t_exit;
            if (!in_run || depth > current.penetration) {
                current.penetration = depth;
                current.distance = t_deep * result.horizontal_length;
            }
            in_run = true;
        } else if (in_run) {
            result.obstructions.push_back(current);
            in_run = false;
            current = {};
        }
        if (t_exit >= 1.0) break;

        // Exact corner crossings advance both axes.
        const bool adv_x = t_max_x <= t_max_y;
        const bool adv_y = t_max_y <= t_max_x;
        t = t_exit;
        if (adv_x) {
            col += step_x;
            t_max_x += t_delta_x;
        }
        if (adv_y) {
            row += step_y;
            t_max_y += t_delta_y;
        }
        if (col < 0 || col >= grid.width() || row < 0 || row >= grid.height()) break;
    }
    if (in_run) result.obstructions.push_back(current);
    result.clear = result.obstructions.empty();
    return result;
}

double wavelength(double frequency) {
    if (!(frequency > 0.0)) throw ArgumentError("frequency must be positive");
    return kSpeedOfLight / frequency;
}

double fspl(double distance, double frequency) {
    if (!(distance > 0.0)) throw ArgumentError("fspl: distance must be positive");
    if (!(frequency > 0.0)) throw ArgumentError("fspl: frequency must be positive");
    return 20.0 * std::log10(4.0 * std::numbers::pi * distance / wavelength(frequency));
}

double fresnel_v(double penetration, double d1, double d2, double frequency) {
    if (!(d1 > 0.0) || !(d2 > 0.0)) throw ArgumentError("fresnel_v: d1 and d2 must be positive");
    return penetration * std::sqrt(2.0 * (d1 + d2) / (wavelength(frequency) * d1 * d2));
}

double knife_edge_response(double v) {
    const double u = v - 0.1;
    return 6.9 + 20.0 * std::log10(std::sqrt(u * u + 1.0) + u);
}

double knife_edge_loss(double v) {
    if (!(v > -0.78)) return 0.0;
    return std::max(0.0, knife_edge_response(v));
}

std::vector<Wall> extract_walls(const HeightGrid& grid) {
    // key: axis, facing, line index, z_lo, z_hi -> sorted along-cell indices
    std::map<std::tuple<int, int, int, double, double>, std::vector<int>> faces;
    const int w = grid.width();
    const int h = grid.height();
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const double top = grid.at(col, row);
            if (top <= 0.0) continue;
            const int nb[4][2] = {{col + 1, row}, {col - 1, row}, {col, row + 1}, {col, row - 1}};
            for (int k = 0; k < 4; ++k) {
                const int nc = nb[k][0];
                const int nr = nb[k][1];
                if (nc < 0 || nc >= w || nr < 0 || nr >= h) continue;
                const double low = grid.at(nc, nr);
                if (low >= top) continue;
                const int axis = k < 2 ? 0 : 1;
                const int facing = (k % 2 == 0) ? 1 : -1;
                const int line = axis == 0 ? col + (facing > 0 ? 1 : 0) : row + (facing > 0 ? 1 : 0);
                const int pos = axis == 0 ? row : col;
                faces[{axis, facing, line, low, top}].push_back(pos);
            }
        }
    }
    std::vector<Wall> walls;
    const double cs = grid.cell_size();
    for (auto& [key, cells] : faces) {
        const auto& [axis, facing, line, z_lo, z_hi] = key;
        std::sort(cells.begin(), cells.end());
        std::size_t i = 0;
        while (i < cells.size()) {
            std::size_t j = i;
            while (j + 1 < cells.size() && cells[j + 1] == cells[j] + 1) ++j;
            Wall wall;
            wall.axis = axis;
            wall.facing = facing;
            wall.coord = (axis == 0 ? grid.origin_x() : grid.origin_y()) + line * cs;
            const double base = axis == 0 ? grid.origin_y() : grid.origin_x();
            wall.lo = base + cells[i] * cs;
            wall.hi = base + (cells[j] + 1) * cs;
            wall.z_lo = z_lo;
            wall.z_hi = z_hi;
            walls.push_back(wall);
            i = j + 1;
        }
    }
    return walls;
}

double combine_powers(std::span<const double> dbm) {
    if (dbm.empty()) return -kInf;
    const double peak = *std::max_element(dbm.begin(), dbm.end());
    double sum = 0.0;
    for (double p : dbm) sum += std::pow(10.0, (p - peak) / 10.0);
    return peak + 10.0 * std::log10(sum);
}

PropagationModel::PropagationModel(const HeightGrid& grid, const Scenario& scenario)
    : grid_(grid), scenario_(scenario), walls_(extract_walls(grid)) {
    scenario_.validate();
}

PathContribution PropagationModel::direct_path(const Vec3& tx, const Vec3& rx) const {
    const double length = std::max(distance3(tx, rx), 1e-6);
    const SightLine sight = line_of_sight(grid_, tx, rx);

    std::vector<Obstruction> edges = sight.obstructions;
    std::stable_sort(edges.begin(), edges.end(),
                     [](const Obstruction& a, const Obstruction& b) { return a.penetration > b.penetration; });
    double loss = 0.0;
    const double min_leg = 1e-3 * grid_.cell_size();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (static_cast<int>(i) < scenario_.max_diffractions) {
            const double d1 = std::max(edges[i].distance, min_leg);
            const double d2 = std::max(sight.horizontal_length - edges[i].distance, min_leg);
            loss += knife_edge_loss(fresnel_v(edges[i].penetration, d1, d2, scenario_.frequency));
        } else {
            loss += scenario_.blockage_penalty;
        }
    }
    return {PathKind::direct, length, loss, scenario_.tx_power - fspl(length, scenario_.frequency) - loss, 0};
}

std::optional<PathContribution> PropagationModel::first_order(const Vec3& tx, const Vec3& rx) const {
    struct Candidate {
        double length;
        Vec3 point;
    };
    std::vector<Candidate> candidates;
    for (const Wall& w : walls_) {
        if (!exterior(tx, w) || !exterior(rx, w)) continue;
        const Vec3 image = mirror(rx, w);
        const auto p = hit_wall(tx, image, w);
        if (!p) continue;
        candidates.push_back({distance3(tx, image), *p});
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.length < b.length; });
    for (const auto& c : candidates) {
        if (!line_of_sight(grid_, tx, c.point).clear) continue;
        if (!line_of_sight(grid_, c.point, rx).clear) continue;
        const double loss = scenario_.wall_loss;
        return PathContribution{PathKind::reflected, c.length, loss,
                                scenario_.tx_power - fspl(c.length, scenario_.frequency) - loss, 1};
    }
    return std::nullopt;
}

std::optional<PathContribution> PropagationModel::second_order(const Vec3& tx, const Vec3& rx) const {
    std::optional<PathContribution> best;
    for (const Wall& w1 : walls_) {
        if (!exterior(tx, w1)) continue;
        const Vec3 t1 = mirror(tx, w1);
        for (const Wall& w2 : walls_) {
            if (&w1 == &w2 || !exterior(rx, w2)) continue;
            const Vec3 t2 = mirror(t1, w2);
            const double length = distance3(t2, rx);
            if (best && length >= best->length) continue;
            const auto p2 = hit_wall(rx, t2, w2);
            if (!p2 || !exterior(*p2, w1)) continue;
            const auto p1 = hit_wall(*p2, t1, w1);
            if (!p1 || !exterior(*p1, w2)) continue;
            if (!line_of_sight(grid_, tx, *p1).clear || !line_of_sight(grid_, *p1, *p2).clear ||
                !line_of_sight(grid_, *p2, rx).clear) {
                continue;
            }
            const double loss = 2.0 * scenario_.wall_loss;
            best = PathContribution{PathKind::reflected, length, loss,
                                    scenario_.tx_power - fspl(length, scenario_.frequency) - loss, 2};
        }
    }
    return best;
}

std::optional<PathContribution> PropagationModel::strongest_reflection(const Vec3& tx, const Vec3& rx) const {
    if (scenario_.max_reflections < 1) return std::nullopt;
    auto best = first_order(tx, rx);
    if (scenario_.second_order_reflections && scenario_.max_reflections >= 2) {
        auto second = second_order(tx, rx);
        if (second && (!best || second->power > best->power)) best = second;
    }
    return best;
}

std::vector<PathContribution> PropagationModel::contributions(GridIndex index) const {
    if (inside_building(grid_, scenario_, index)) return {};
    const Vec3 rx = cell_center(grid_, index, scenario_.ms_altitude);
    const Vec3& tx = scenario_.bs_position;
    std::vector<PathContribution> paths{direct_path(tx, rx)};
    if (auto r = strongest_reflection(tx, rx)) paths.push_back(*r);
    return paths;
}

std::optional<double> PropagationModel::power(GridIndex index) const {
    const auto paths = contributions(index);
    if (paths.empty()) return std::nullopt;
    std::vector<double> p;
    p.reserve(paths.size());
    for (const auto& c : paths) p.push_back(c.power);
    return std::max(combine_powers(p), kPowerFloor);
}

std::optional<PathContribution> strongest_reflection(const HeightGrid& grid, const Scenario& scenario,
                                                     const Vec3& tx, const Vec3& rx) {
    return PropagationModel(grid, scenario).strongest_reflection(tx, rx);
}

std::optional<double> simulate_power(const HeightGrid& grid, const Scenario& scenario, GridIndex index) {
    if (!grid.contains(index)) throw RangeError("simulate_power: index outside grid");
    return PropagationModel(grid, scenario).power(index);
}

RadioMap simulate_map(const HeightGrid& grid, const Scenario& scenario, int workers) {
    const PropagationModel model(grid, scenario);
    const int w = grid.width();
    const int h = grid.height();
    std::vector<double> values(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::quiet_NaN());

    const auto run_rows = [&](int first, int stride) {
        for (int row = first; row < h; row += stride) {
            for (int col = 0; col < w; ++col) {
                if (auto p = model.power({col, row})) values[static_cast<std::size_t>(row) * w + col] = *p;
            }
        }
    };
    workers = std::clamp(workers, 1, std::max(1, h));
    if (workers == 1) {
        run_rows(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (int k = 0; k < workers; ++k) pool.emplace_back(run_rows, k, workers);
    }

    RadioMap map = RadioMap::like(grid);
    for (int row = 0; row < h; ++row) {
        for (int col = 0; col < w; ++col) {
            const double v = values[static_cast<std::size_t>(row) * w + col];
            if (!std::isnan(v)) map.set({col, row}, v);
        }
    }
    return map;
}

void PerturbationSpec::validate() const {
    if (!(height_noise_sd >= 0.0) || !(shadowing_sd >= 0.0)) {
        throw ArgumentError("perturbation standard deviations must be >= 0");
    }
    if (!(shadowing_correlation_length > 0.0)) throw ArgumentError("correlation length must be positive");
    if (!std::isfinite(global_offset)) throw ArgumentError("global offset must be finite");
}

std::vector<double> shadowing_field(int width, int height, double cell_size, const PerturbationSpec& spec) {
    spec.validate();
    const double sigma = spec.shadowing_correlation_length / cell_size;
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum_sq = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum_sq += kernel[i + radius] * kernel[i + radius];
    }
    // Separable smoothing of white noise over the padded domain; the 2D
    // kernel's squared norm is sum_sq^2, so dividing by sum_sq gives unit variance.
    const int ext_h = height + 2 * radius;
    const std::uint64_t noise_seed = derive_seed(spec.seed, 0x5ADu);
    std::vector<double> rows(static_cast<std::size_t>(ext_h) * width, 0.0);
    std::vector<double> line(static_cast<std::size_t>(width) + 2 * radius);
    for (int r = 0; r < ext_h; ++r) {
        for (int c = 0; c < width + 2 * radius; ++c) line[c] = counter_normal(noise_seed, c - radius, r - radius);
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * line[c + k];
            rows[static_cast<std::size_t>(r) * width + c] = acc;
        }
    }
    std::vector<double> field(static_cast<std::size_t>(width) * height, 0.0);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            double acc = 0.0;
            for (int k = 0; k <= 2 * radius; ++k) acc += kernel[k] * rows[static_cast<std::size_t>(r + k) * width + c];
            field[static_cast<std::size_t>(r) * width + c] = acc / sum_sq;
        }
    }
    return field;
}

RadioMap perturb_environment(const RadioMap& map, const PerturbationSpec& spec) {
    spec.validate();
    std::vector<double> field;
    if (spec.shadowing_sd > 0.0) field = shadowing_field(map.width(), map.height(), map.cell_size(), spec);
    RadioMap out = map;
    for (int row = 0; row < map.height(); ++row) {
        for (int col = 0; col < map.width(); ++col) {
            const auto v = map.value({col, row});
            if (!v) continue;
            double p = *v + spec.global_offset;
            if (!field.empty()) p += spec.shadowing_sd * field[static_cast<std::size_t>(row) * map.width() + col];
            out.set({col, row}, p);
        }
    }
    return out;
}

HeightGrid perturb_heights(const HeightGrid& grid, const PerturbationSpec& spec) {
    spec.validate();
    if (spec.height_noise_sd == 0.0) return grid;
    const int w = grid.width();
    const int h = grid.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<double> heights(grid.heights().begin(), grid.heights().end());
    const std::uint64_t seed = derive_seed(spec.seed, 0xB1Du);
    std::vector<int> stack;
    for (int start = 0; start < w * h; ++start) {
        if (label[start] >= 0 || grid.heights()[start] <= 0.0) continue;
        const double level = grid.heights()[start];
        const double offset = spec.height_noise_sd * counter_normal(seed, start, 0);
        stack.assign(1, start);
        label[start] = start;
        while (!stack.empty()) {
            const int cell = stack.back();
            stack.pop_back();
            heights[cell] = std::max(0.0, level + offset);
            const int c = cell % w;
            const int r = cell / w;
            const int nb[4][2] = {{c + 1, r}, {c - 1, r}, {c, r + 1}, {c, r - 1}};
            for (const auto& n : nb) {
                if (n[0] < 0 || n[0] >= w || n[1] < 0 || n[1] >= h) continue;
                const int k = n[1] * w + n[0];
                if (label[k] < 0 && grid.heights()[k] == level) {
                    label[k] = start;
                    stack.push_back(k);
                }
            }
        }
    }
    return HeightGrid(w, h, std::move(heights), grid.cell_size(), grid.origin_x(), grid.origin_y());
}

}  // namespace rpp
