#include "rpp/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct Header {
    int width = 0;
    int height = 0;
    double cell_size = 1.0;
};

// Splits a line into whitespace separated tokens.
std::vector<std::string> tokens(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

bool parse_double(const std::string& tok, double& out) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end != begin && *end == '\0';
}

bool parse_int(const std::string& tok, int& out) {
    const char* begin = tok.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end == begin || *end != '\0' || v < INT32_MIN || v > INT32_MAX) return false;
    out = static_cast<int>(v);
    return true;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

Header read_header(std::istream& in, const std::string& source) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
    const auto t = tokens(line);
    Header h;
    if (t.size() != 3 || !parse_int(t[0], h.width) || !parse_int(t[1], h.height) ||
        !parse_double(t[2], h.cell_size)) {
        throw ParseError(source, 1, "malformed header, expected 'width height cell_size'");
    }
    if (h.width < 1 || h.height < 1 || !(h.cell_size > 0.0) || !std::isfinite(h.cell_size)) {
        throw ParseError(source, 1, "header values out of range");
    }
    return h;
}

// Reads `height` rows of `width` values. Row 0 is the smallest y.
std::vector<double> read_cells(std::istream& in, const Header& h, const std::string& source, bool allow_nan) {
    std::vector<double> cells(static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height));
    std::string line;
    for (int row = 0; row < h.height; ++row) {
        const int line_no = row + 2;
        if (!std::getline(in, line)) throw ParseError(source, line_no, "missing row " + std::to_string(row));
        const auto t = tokens(line);
        if (static_cast<int>(t.size()) != h.width) {
            throw ParseError(source, line_no,
                             "expected " + std::to_string(h.width) + " values, found " + std::to_string(t.size()));
        }
        for (int col = 0; col < h.width; ++col) {
            double v = 0.0;
            if (!parse_double(t[col], v)) throw ParseError(source, line_no, "non-numeric cell '" + t[col] + "'");
            if (std::isnan(v) ? !allow_nan : !std::isfinite(v)) {
                throw ParseError(source, line_no, "invalid cell value '" + t[col] + "'");
            }
            cells[static_cast<std::size_t>(row) * h.width + col] = v;
        }
    }
    while (std::getline(in, line)) {
        if (!tokens(line).empty()) throw ParseError(source, h.height + 2, "trailing data after last row");
    }
    return cells;
}

}  // namespace

HeightGrid::HeightGrid(int width, int height, double cell_size, double origin_x, double origin_y)
    : HeightGrid(width, height,
                 std::vector<double>(static_cast<std::size_t>(std::max(width, 0)) *
                                     static_cast<std::size_t>(std::max(height, 0))),
                 cell_size, origin_x, origin_y) {}

HeightGrid::HeightGrid(int width, int height, std::vector<double> heights, double cell_size, double origin_x,
                       double origin_y)
    : width_(width),
      height_(height),
      cell_size_(cell_size),
      origin_x_(origin_x),
      origin_y_(origin_y),
      heights_(std::move(heights)) {
    validate();
}

void HeightGrid::validate() const {
    if (width_ < 1 || height_ < 1) throw ArgumentError("height grid needs width >= 1 and height >= 1");
    if (!(cell_size_ > 0.0) || !std::isfinite(cell_size_)) throw ArgumentError("cell_size must be positive");
    if (heights_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
        throw ArgumentError("height count does not match width*height");
    }
    for (double h : heights_) {
        if (!std::isfinite(h) || h < 0.0) throw ArgumentError("heights must be finite and >= 0");
    }
}

bool HeightGrid::contains_point(double x, double y) const noexcept {
    return x >= origin_x_ && x <= origin_x_ + extent_x() && y >= origin_y_ && y <= origin_y_ + extent_y();
}

double HeightGrid::at(GridIndex index) const {
    if (!contains(index)) {
        throw RangeError("grid index (" + std::to_string(index.col) + ", " + std::to_string(index.row) +
                         ") outside " + std::to_string(width_) + "x" + std::to_string(height_));
    }
    return heights_[flat(index.col, index.row)];
}

void HeightGrid::set(GridIndex index, double value) {
    if (!contains(index)) throw RangeError("grid index outside grid");
    if (!std::isfinite(value) || value < 0.0) throw ArgumentError("heights must be finite and >= 0");
    heights_[flat(index.col, index.row)] = value;
}

void Scenario::validate() const {
    if (!(frequency > 0.0) || !std::isfinite(frequency)) throw ArgumentError("frequency must be positive");
    if (!std::isfinite(tx_power)) throw ArgumentError("tx_power must be finite");
    if (max_reflections < 0 || max_diffractions < 0) throw ArgumentError("path-order limits must be >= 0");
    if (!(ms_altitude >= 0.0)) throw ArgumentError("ms_altitude must be >= 0");
    if (!(wall_loss >= 0.0) || !(blockage_penalty >= 0.0)) throw ArgumentError("losses must be >= 0");
}

Scenario default_scenario(const HeightGrid& grid) {
    Scenario s;
    s.bs_position = {grid.origin_x() + 0.5 * grid.extent_x(), grid.origin_y() + 0.5 * grid.extent_y(), 14.0};
    return s;
}

RadioMap::RadioMap(int width, int height, double cell_size, double origin_x, double origin_y)
    : width_(width), height_(height), cell_size_(cell_size), origin_x_(origin_x), origin_y_(origin_y) {
    if (width < 1 || height < 1) throw ArgumentError("radio map needs width >= 1 and height >= 1");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    power_.assign(n, std::numeric_limits<double>::quiet_NaN());
    available_.assign(n, 0);
}

RadioMap RadioMap::like(const HeightGrid& grid) {
    return RadioMap(grid.width(), grid.height(), grid.cell_size(), grid.origin_x(), grid.origin_y());
}

double RadioMap::power(GridIndex index) const {
    if (!available(index)) {
        throw ArgumentError("radio map cell (" + std::to_string(index.col) + ", " + std::to_string(index.row) +
                            ") is unavailable");
    }
    return power_[flat(index)];
}

std::optional<double> RadioMap::value(GridIndex index) const {
    if (!available(index)) return std::nullopt;
    return power_[flat(index)];
}

void RadioMap::set(GridIndex index, double dbm) {
    if (!contains(index)) throw RangeError("radio map index outside map");
    if (!std::isfinite(dbm)) throw NumericError("radio map values must be finite");
    power_[flat(index)] = dbm;
    available_[flat(index)] = 1;
}

void RadioMap::set_unavailable(GridIndex index) {
    if (!contains(index)) throw RangeError("radio map index outside map");
    power_[flat(index)] = std::numeric_limits<double>::quiet_NaN();
    available_[flat(index)] = 0;
}

std::size_t RadioMap::available_count() const noexcept {
    return static_cast<std::size_t>(std::count(available_.begin(), available_.end(), std::uint8_t{1}));
}

bool RadioMap::same_shape(const RadioMap& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
}

bool operator==(const RadioMap& a, const RadioMap& b) {
    if (a.width_ != b.width_ || a.height_ != b.height_ || a.cell_size_ != b.cell_size_ ||
        a.origin_x_ != b.origin_x_ || a.origin_y_ != b.origin_y_ || a.available_ != b.available_) {
        return false;
    }
    for (std::size_t i = 0; i < a.power_.size(); ++i) {
        if (a.available_[i] && a.power_[i] != b.power_[i]) return false;
    }
    return true;
}

bool RadioMap::same_shape(const HeightGrid& grid) const noexcept {
    return width_ == grid.width() && height_ == grid.height();
}

Vec3 cell_center(const HeightGrid& grid, GridIndex index, double altitude) {
    if (!grid.contains(index)) {
        throw RangeError("cell_center: index (" + std::to_string(index.col) + ", " + std::to_string(index.row) +
                         ") outside grid");
    }
    return {grid.origin_x() + (index.col + 0.5) * grid.cell_size(),
            grid.origin_y() + (index.row + 0.5) * grid.cell_size(), altitude};
}

bool inside_building(const HeightGrid& grid, const Scenario& scenario, GridIndex index) {
    return grid.at(index) > scenario.ms_altitude;
}

HeightGrid quantize_heights(const HeightGrid& grid, std::span<const double> levels) {
    if (levels.empty()) throw ArgumentError("quantize_heights: empty level list");
    if (!std::is_sorted(levels.begin(), levels.end())) throw ArgumentError("quantize_heights: levels must be sorted");
    std::vector<double> out(grid.heights().begin(), grid.heights().end());
    for (double& h : out) {
        double best = levels.front();
        double best_err = std::abs(h - best);
        for (double level : levels.subspan(1)) {
            const double err = std::abs(h - level);
            if (err < best_err) {  // strict: ties keep the lower level
                best = level;
                best_err = err;
            }
        }
        h = best;
    }
    return HeightGrid(grid.width(), grid.height(), std::move(out), grid.cell_size(), grid.origin_x(),
                      grid.origin_y());
}

HeightGrid load_height_grid(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto source = path.string();
    const Header h = read_header(in, source);
    auto cells = read_cells(in, h, source, false);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (cells[i] < 0.0) {
            throw ParseError(source, static_cast<int>(i / h.width) + 2, "negative height");
        }
    }
    return HeightGrid(h.width, h.height, std::move(cells), h.cell_size);
}

void save_height_grid(const HeightGrid& grid, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << grid.width() << ' ' << grid.height() << ' ' << format_double(grid.cell_size()) << '\n';
    for (int row = 0; row < grid.height(); ++row) {
        for (int col = 0; col < grid.width(); ++col) {
            if (col) out << ' ';
            out << format_double(grid.at(col, row));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

RadioMap load_radio_map(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto source = path.string();
    const Header h = read_header(in, source);
    const auto cells = read_cells(in, h, source, true);
    RadioMap map(h.width, h.height, h.cell_size);
    for (int row = 0; row < h.height; ++row) {
        for (int col = 0; col < h.width; ++col) {
            const double v = cells[static_cast<std::size_t>(row) * h.width + col];
            if (!std::isnan(v)) map.set({col, row}, v);
        }
    }
    return map;
}

void save_radio_map(const RadioMap& map, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << map.width() << ' ' << map.height() << ' ' << format_double(map.cell_size()) << '\n';
    for (int row = 0; row < map.height(); ++row) {
        for (int col = 0; col < map.width(); ++col) {
            if (col) out << ' ';
            const auto v = map.value({col, row});
            out << (v ? format_double(*v) : std::string("nan"));
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<Sample> load_samples(const std::filesystem::path& path) {
    auto in = open_input(path);
    const auto source = path.string();
    std::string line;
    if (!std::getline(in, line)) throw ParseError(source, 1, "missing sample count");
    auto t = tokens(line);
    int count = 0;
    if (t.size() != 1 || !parse_int(t[0], count) || count < 0) throw ParseError(source, 1, "malformed sample count");
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int line_no = i + 2;
        if (!std::getline(in, line)) throw ParseError(source, line_no, "missing sample");
        t = tokens(line);
        Sample s;
        if (t.size() != 3 || !parse_int(t[0], s.index.col) || !parse_int(t[1], s.index.row) ||
            !parse_double(t[2], s.power) || !std::isfinite(s.power)) {
            throw ParseError(source, line_no, "expected 'col row dbm'");
        }
        samples.push_back(s);
    }
    return samples;
}

void save_samples(std::span<const Sample> samples, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << samples.size() << '\n';
    for (const auto& s : samples) out << s.index.col << ' ' << s.index.row << ' ' << format_double(s.power) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

HeightGrid generate_city(int width, int height, std::uint64_t seed, const CityLayout& layout) {
    if (layout.block_min < 2 || layout.block_max < layout.block_min || layout.street_min < 1 ||
        layout.street_max < layout.street_min) {
        throw ArgumentError("generate_city: inconsistent layout");
    }
    HeightGrid grid(width, height);
    Rng rng(seed);
    const auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng.index(static_cast<std::uint64_t>(hi - lo + 1))); };

    // Alternating street / block intervals along one axis.
    const auto intervals = [&](int extent) {
        std::vector<std::pair<int, int>> blocks;
        int pos = pick(layout.street_min, layout.street_max) / 2;
        while (pos < extent) {
            const int len = pick(layout.block_min, layout.block_max);
            blocks.emplace_back(pos, std::min(pos + len, extent));
            pos += len + pick(layout.street_min, layout.street_max);
        }
        return blocks;
    };
    const auto xs = intervals(width);
    const auto ys = intervals(height);
    constexpr double kLevels[] = {6.5, 13.0, 26.0};

    for (const auto& [x0, x1] : xs) {
        for (const auto& [y0, y1] : ys) {
            // Split each block into up to 2x2 lots.
            const int xsplit = (x1 - x0 >= 12 && rng.uniform() < 0.6) ? x0 + pick(5, x1 - x0 - 5) : x1;
            const int ysplit = (y1 - y0 >= 12 && rng.uniform() < 0.6) ? y0 + pick(5, y1 - y0 - 5) : y1;
            const std::pair<int, int> lx[] = {{x0, xsplit}, {xsplit, x1}};
            const std::pair<int, int> ly[] = {{y0, ysplit}, {ysplit, y1}};
            for (const auto& [ax, bx] : lx) {
                for (const auto& [ay, by] : ly) {
                    if (ax >= bx || ay >= by) continue;
                    const double u = rng.uniform();
                    if (u < layout.empty_lot_probability) continue;
                    const double r = rng.uniform();
                    const double h = r < 0.4 ? kLevels[0] : (r < 0.8 ? kLevels[1] : kLevels[2]);
                    for (int row = ay; row < by; ++row) {
                        for (int col = ax; col < bx; ++col) grid.set({col, row}, h);
                    }
                }
            }
        }
    }
    const int cx = width / 2;
    const int cy = height / 2;
    for (int row = std::max(0, cy - layout.plaza_radius); row < std::min(height, cy + layout.plaza_radius); ++row) {
        for (int col = std::max(0, cx - layout.plaza_radius); col < std::min(width, cx + layout.plaza_radius); ++col) {
            grid.set({col, row}, 0.0);
        }
    }
    return grid;
}

}  // namespace rpp
