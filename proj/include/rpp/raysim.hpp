#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rpp/grid.hpp"

namespace rpp {

// One building crossing along a sight line. distance is the horizontal
// distance from the segment start to the deepest point of the crossing.
struct Obstruction {
    double distance = 0.0;
    double penetration = 0.0;  // building height minus ray height, > 0
};

struct SightLine {
    bool clear = true;
    double horizontal_length = 0.0;
    std::vector<Obstruction> obstructions;  // ordered along the segment
};

// Uniform-grid traversal of segment a->b. Contiguous obstructing cells are
// merged into one obstruction carrying their deepest penetration.
SightLine line_of_sight(const HeightGrid& grid, const Vec3& a, const Vec3& b);

inline constexpr double kSpeedOfLight = 299'792'458.0;

double wavelength(double frequency);

// Free-space path loss 20*log10(4*pi*d/lambda) in dB.
double fspl(double distance, double frequency);

// Knife-edge parameter; penetration is negative when the edge is below the ray.
double fresnel_v(double penetration, double d1, double d2, double frequency);

// Single knife-edge approximation J(v) = 6.9 + 20*log10(sqrt((v-0.1)^2+1) + v - 0.1),
// evaluated without the v <= -0.78 cutoff.
double knife_edge_response(double v);

// J(v) for v > -0.78, else 0; clamped non-negative.
double knife_edge_loss(double v);

enum class PathKind { direct, reflected };

struct PathContribution {
    PathKind kind = PathKind::direct;
    double length = 0.0;  // m, along the path
    double loss = 0.0;    // dB beyond free space over `length`
    double power = 0.0;   // dBm
    int bounces = 0;
};

// Vertical building face usable as a specular reflector. The plane is
// axis-coordinate = coord (axis 0: x, axis 1: y); facing is the sign of the
// exterior side.
struct Wall {
    int axis = 0;
    double coord = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    double z_lo = 0.0;
    double z_hi = 0.0;
    int facing = 1;
};

// Exterior faces of building cells, merged into maximal collinear runs of
// equal vertical extent. Faces on the grid boundary are skipped.
std::vector<Wall> extract_walls(const HeightGrid& grid);

inline constexpr double kPowerFloor = -150.0;

// Power sum 10*log10(sum 10^(p/10)).
double combine_powers(std::span<const double> dbm);

// Deterministic path model over one grid and scenario. Holds a reference to
// the grid, which must outlive it.
class PropagationModel {
public:
    PropagationModel(const HeightGrid& grid, const Scenario& scenario);

    const HeightGrid& grid() const noexcept { return grid_; }
    const Scenario& scenario() const noexcept { return scenario_; }
    std::span<const Wall> walls() const noexcept { return walls_; }

    PathContribution direct_path(const Vec3& tx, const Vec3& rx) const;
    std::optional<PathContribution> strongest_reflection(const Vec3& tx, const Vec3& rx) const;

    // All contributions reaching the MS at `index`; empty for indoor cells.
    std::vector<PathContribution> contributions(GridIndex index) const;
    std::optional<double> power(GridIndex index) const;

private:
    std::optional<PathContribution> first_order(const Vec3& tx, const Vec3& rx) const;
    std::optional<PathContribution> second_order(const Vec3& tx, const Vec3& rx) const;

    const HeightGrid& grid_;
    Scenario scenario_;
    std::vector<Wall> walls_;
};

std::optional<PathContribution> strongest_reflection(const HeightGrid& grid, const Scenario& scenario,
                                                     const Vec3& tx, const Vec3& rx);

// Received power at a cell, or nullopt when the cell is inside a building.
std::optional<double> simulate_power(const HeightGrid& grid, const Scenario& scenario, GridIndex index);

// Every cell; rows are split across `workers` threads with identical results.
RadioMap simulate_map(const HeightGrid& grid, const Scenario& scenario, int workers = 1);

struct PerturbationSpec {
    std::uint64_t seed = 0;
    double height_noise_sd = 0.0;               // m, per building
    double shadowing_sd = 0.0;                  // dB
    double shadowing_correlation_length = 10.0; // m, Gaussian kernel sigma
    double global_offset = 0.0;                 // dB

    void validate() const;
};

// Adds global_offset plus spatially correlated Gaussian shadowing to every
// available cell. White noise comes from a counter-based stream keyed by
// (seed, cell), so the output does not depend on evaluation order.
RadioMap perturb_environment(const RadioMap& map, const PerturbationSpec& spec);

// The smoothed, unit-variance shadowing field used by perturb_environment.
std::vector<double> shadowing_field(int width, int height, double cell_size, const PerturbationSpec& spec);

// Adds one Gaussian height offset per building (connected equal-height run
// of non-zero cells), clamped at 0.
HeightGrid perturb_heights(const HeightGrid& grid, const PerturbationSpec& spec);

}  // namespace rpp
