#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rpp/eval.hpp"
#include "rpp/grid.hpp"
#include "rpp/model.hpp"
#include "rpp/raysim.hpp"

namespace rpp {

struct RunPaths {
    std::filesystem::path grid;
    std::filesystem::path sim_map;
    std::filesystem::path truth_map;
    std::filesystem::path measurements;
    std::filesystem::path augmented;
    std::filesystem::path weights;
    std::filesystem::path finetuned;
    std::filesystem::path prediction;
    std::filesystem::path report;  // base name: <report>.tsv and <report>.kv
    std::filesystem::path heatmap;
};

// Everything a subcommand needs, parsed from a sectioned key = value file.
struct RunConfig {
    RunPaths paths;
    Scenario scenario;
    std::optional<double> bs_x, bs_y;  // default: grid centre
    ModelConfig model;
    bool mask_srp_center = false;
    TrainOptions pretrain;
    std::size_t pretrain_samples = 2000;
    TrainOptions finetune = default_finetune_options();
    TrainOptions scratch;
    int augment_n = 3;
    PerturbationSpec perturbation;
    std::size_t measurement_count = 100;
    double sensitivity = -100.0;
    std::uint64_t measure_seed = 1;
    std::vector<std::uint64_t> eval_seeds{1, 2, 3, 4, 5};
    std::vector<SplitSpec> splits{SplitSpec{}};
    bool compare_augmentation = true;
    bool reuse_weights = false;
    int workers = 1;

    // Scenario with the base station placed on `grid`.
    Scenario scenario_for(const HeightGrid& grid) const;
    BenchmarkConfig benchmark(const HeightGrid& grid) const;
};

// Relative paths are resolved against `base_dir`. Unknown sections or keys
// and malformed values throw ConfigError naming the line.
RunConfig parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

// Documented schema, one "[section] key type" line per entry.
std::string config_schema();

struct CommandOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out;
    std::optional<int> workers;
    std::optional<std::filesystem::path> input;  // heatmap source map
};

// Each command writes its outputs and returns a one-line summary.
std::string cmd_simulate(const RunConfig& config, const CommandOptions& options);
std::string cmd_measure(const RunConfig& config, const CommandOptions& options);
std::string cmd_pretrain(const RunConfig& config, const CommandOptions& options);
std::string cmd_augment(const RunConfig& config, const CommandOptions& options);
std::string cmd_finetune(const RunConfig& config, const CommandOptions& options);
std::string cmd_predict(const RunConfig& config, const CommandOptions& options);
std::string cmd_evaluate(const RunConfig& config, const CommandOptions& options);
std::string cmd_heatmap(const RunConfig* config, const CommandOptions& options);

// Grey levels, row 0 = northernmost row: [power_min, power_max] maps onto
// [0, 255], unavailable cells are 0.
std::vector<std::uint8_t> heatmap_levels(const RadioMap& map, const Normalization& norm = {});
void write_heatmap(const RadioMap& map, const std::filesystem::path& path, const Normalization& norm = {});

// Single-line, machine-parsable error text for `e`.
std::string format_error(const std::exception& e);

}  // namespace rpp
