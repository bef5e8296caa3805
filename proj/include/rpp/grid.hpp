#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace rpp {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

struct GridIndex {
    int col = 0;
    int row = 0;

    friend auto operator<=>(const GridIndex&, const GridIndex&) = default;
};

// 2.5D world model: terrain plus building height per cell, flat ground plane.
class HeightGrid {
public:
    HeightGrid(int width, int height, double cell_size = 1.0, double origin_x = 0.0, double origin_y = 0.0);
    HeightGrid(int width, int height, std::vector<double> heights, double cell_size = 1.0,
               double origin_x = 0.0, double origin_y = 0.0);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double cell_size() const noexcept { return cell_size_; }
    double origin_x() const noexcept { return origin_x_; }
    double origin_y() const noexcept { return origin_y_; }
    double extent_x() const noexcept { return width_ * cell_size_; }
    double extent_y() const noexcept { return height_ * cell_size_; }

    bool contains(GridIndex index) const noexcept {
        return index.col >= 0 && index.col < width_ && index.row >= 0 && index.row < height_;
    }
    bool contains_point(double x, double y) const noexcept;

    // Throws RangeError for an invalid index.
    double at(GridIndex index) const;
    double at(int col, int row) const noexcept { return heights_[flat(col, row)]; }
    void set(GridIndex index, double value);

    std::span<const double> heights() const noexcept { return heights_; }
    std::size_t flat(int col, int row) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col);
    }

    friend bool operator==(const HeightGrid&, const HeightGrid&) = default;

private:
    void validate() const;

    int width_;
    int height_;
    double cell_size_;
    double origin_x_;
    double origin_y_;
    std::vector<double> heights_;
};

struct Scenario {
    double frequency = 5.64e9;  // Hz
    double tx_power = 21.0;     // dBm
    Vec3 bs_position{0.0, 0.0, 14.0};
    double ms_altitude = 1.0;
    int max_reflections = 2;
    int max_diffractions = 3;
    bool second_order_reflections = false;
    double wall_loss = 8.0;           // dB per bounce
    double blockage_penalty = 30.0;   // dB per obstruction past max_diffractions

    void validate() const;
    friend bool operator==(const Scenario&, const Scenario&) = default;
};

// Scenario with the BS mast at the centre of the grid.
Scenario default_scenario(const HeightGrid& grid);

// Received power per cell; cells inside buildings are unavailable.
class RadioMap {
public:
    RadioMap(int width, int height, double cell_size = 1.0, double origin_x = 0.0, double origin_y = 0.0);
    static RadioMap like(const HeightGrid& grid);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    double cell_size() const noexcept { return cell_size_; }
    double origin_x() const noexcept { return origin_x_; }
    double origin_y() const noexcept { return origin_y_; }

    bool contains(GridIndex index) const noexcept {
        return index.col >= 0 && index.col < width_ && index.row >= 0 && index.row < height_;
    }
    bool available(GridIndex index) const noexcept {
        return contains(index) && available_[flat(index)] != 0;
    }
    // Throws ArgumentError when the cell is unavailable.
    double power(GridIndex index) const;
    std::optional<double> value(GridIndex index) const;

    void set(GridIndex index, double dbm);
    void set_unavailable(GridIndex index);

    std::span<const double> powers() const noexcept { return power_; }
    std::size_t available_count() const noexcept;
    bool same_shape(const RadioMap& other) const noexcept;
    bool same_shape(const HeightGrid& grid) const noexcept;

    // Exact comparison of shape, availability and available values.
    friend bool operator==(const RadioMap& a, const RadioMap& b);

private:
    std::size_t flat(GridIndex index) const noexcept {
        return static_cast<std::size_t>(index.row) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(index.col);
    }

    int width_;
    int height_;
    double cell_size_;
    double origin_x_;
    double origin_y_;
    std::vector<double> power_;
    std::vector<std::uint8_t> available_;
};

struct Sample {
    GridIndex index;
    double power = 0.0;  // dBm

    friend bool operator==(const Sample&, const Sample&) = default;
};

Vec3 cell_center(const HeightGrid& grid, GridIndex index, double altitude);

// Cells taller than the MS antenna are inside a building.
bool inside_building(const HeightGrid& grid, const Scenario& scenario, GridIndex index);

// Nearest level per cell, ties toward the lower level.
HeightGrid quantize_heights(const HeightGrid& grid, std::span<const double> levels);

HeightGrid load_height_grid(const std::filesystem::path& path);
void save_height_grid(const HeightGrid& grid, const std::filesystem::path& path);
RadioMap load_radio_map(const std::filesystem::path& path);
void save_radio_map(const RadioMap& map, const std::filesystem::path& path);

std::vector<Sample> load_samples(const std::filesystem::path& path);
void save_samples(std::span<const Sample> samples, const std::filesystem::path& path);

struct CityLayout {
    int block_min = 14;
    int block_max = 26;
    int street_min = 5;
    int street_max = 9;
    double empty_lot_probability = 0.15;
    int plaza_radius = 8;  // cleared square around the grid centre
};

// Procedural street-grid city with heights drawn from {6.5, 13, 26} m.
HeightGrid generate_city(int width, int height, std::uint64_t seed, const CityLayout& layout = {});

}  // namespace rpp
