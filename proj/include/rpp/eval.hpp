#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rpp/grid.hpp"
#include "rpp/model.hpp"
#include "rpp/raysim.hpp"

namespace rpp {

// ---- splits and metrics ---------------------------------------------------

struct CellRect {
    int col0 = 0, row0 = 0;  // inclusive
    int col1 = 0, row1 = 0;  // exclusive

    bool contains(GridIndex i) const noexcept { return i.col >= col0 && i.col < col1 && i.row >= row0 && i.row < row1; }
};

struct SplitSpec {
    enum class Mode { random, area };

    std::string name = "random";
    Mode mode = Mode::random;
    double ratio = 0.8;  // training share in random mode
    CellRect rect;       // test area in area mode
    std::uint64_t seed = 1;

    void validate(const HeightGrid* grid = nullptr) const;
};

// Train and test keep their input order. Throws SplitError if either is empty.
std::pair<std::vector<Sample>, std::vector<Sample>> split(std::span<const Sample> samples, const SplitSpec& spec);

double rmse(std::span<const double> predictions, std::span<const double> truths);

struct PredictionTable {
    std::vector<std::string> methods;
    struct Row {
        GridIndex index;
        double truth = 0.0;
        std::vector<double> predictions;  // one per method
    };
    std::vector<Row> rows;
};

// Rows in ascending truth order (stable). Each method needs one finite
// prediction per test sample, otherwise ReportError.
PredictionTable sorted_prediction_table(std::span<const Sample> test,
                                        const std::vector<std::pair<std::string, std::vector<double>>>& predictions);

// ---- measurements ---------------------------------------------------------

// One available cell in each of `count` strata of a ceil(sqrt(count))^2
// partition of the grid, topped up at random when strata run out.
std::vector<GridIndex> draw_measurements(const RadioMap& availability, std::size_t count, std::uint64_t seed);

// Cells for the simulated pre-training set, drawn the same way from cells
// whose simulated power is at least `min_power`.
std::vector<GridIndex> draw_pretraining_cells(const RadioMap& sim_map, std::size_t count, std::uint64_t seed,
                                              double min_power);

// ---- benchmark ------------------------------------------------------------

inline const std::vector<std::string>& benchmark_methods() {
    static const std::vector<std::string> m{"proposed", "ml_no_pretrain", "linear", "kriging", "offset"};
    return m;
}

struct BenchmarkConfig {
    Scenario scenario;
    PerturbationSpec perturbation;  // seed is replaced per benchmark seed
    std::size_t measurement_count = 100;
    // Measurements are only drawn where the true power reaches this level,
    // and augmented labels below it are dropped.
    double sensitivity = -100.0;
    std::vector<SplitSpec> splits{SplitSpec{}};
    int augment_n = 3;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    ModelConfig model;
    std::size_t pretrain_samples = 2000;
    bool mask_srp_center = false;
    TrainOptions pretrain;
    TrainOptions finetune = default_finetune_options();
    TrainOptions scratch;  // ML without pre-training
    // Also evaluate every method without augmentation.
    bool compare_augmentation = true;
    int workers = 1;
};

struct MethodResult {
    std::string method;
    bool augmented = false;
    std::vector<double> rmse;  // one per seed
    double median = 0.0;
};

struct SplitResult {
    std::string name;
    SplitSpec spec;
    std::vector<std::size_t> train_counts, test_counts;  // per seed
    std::vector<MethodResult> methods;
    std::vector<PredictionTable> tables;  // per seed, augmented methods only

    const MethodResult& find(const std::string& method, bool augmented) const;
};

struct BenchmarkReport {
    std::vector<std::uint64_t> seeds;
    int augment_n = 3;
    std::vector<SplitResult> splits;
    double pretrain_best_validation = 0.0;  // normalised MSE

    const SplitResult& find(const std::string& split) const;
};

// Pre-training stage on its own: simulated rows from `grid`, trained from
// config.model.seed. run_benchmark calls this unless given a model.
Model pretrain_for_benchmark(const HeightGrid& grid, const RadioMap& sim_map, const BenchmarkConfig& config,
                             TrainResult* result = nullptr);

// Stage failures are rethrown as StageError naming the stage.
BenchmarkReport run_benchmark(const HeightGrid& grid, const BenchmarkConfig& config,
                              const Model* pretrained = nullptr);

double median(std::vector<double> values);

// Tab-separated tables: per-method RMSE summary, then per-seed prediction tables.
void write_report_tsv(const BenchmarkReport& report, std::ostream& out);
// Sectioned key = value blocks per split, method and seed.
void write_report_kv(const BenchmarkReport& report, std::ostream& out);

}  // namespace rpp
