#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rpp/augment.hpp"
#include "rpp/cli.hpp"
#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace {

std::filesystem::path output_path(const CommandOptions& o, const std::filesystem::path& configured, const char* key) {
    if (o.out) return *o.out;
    if (configured.empty()) throw ConfigError(std::string("no output path: set paths.") + key + " or pass --out");
    return configured;
}

const std::filesystem::path& required(const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string("paths.") + key + " is required");
    return p;
}

int workers_for(const RunConfig& c, const CommandOptions& o) {
    const int w = o.workers.value_or(c.workers);
    if (w < 1) throw ArgumentError("workers must be >= 1");
    return w;
}

void ensure_parent(const std::filesystem::path& p) {
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + p.parent_path().string() + ": " + ec.message());
    }
}

HeightGrid grid_of(const RunConfig& c) { return load_height_grid(required(c.paths.grid, "grid")); }

// The configured simulation if it exists and fits the grid, else a fresh one.
RadioMap sim_of(const RunConfig& c, const HeightGrid& grid, const Scenario& scenario, int workers) {
    if (!c.paths.sim_map.empty() && std::filesystem::exists(c.paths.sim_map)) {
        RadioMap m = load_radio_map(c.paths.sim_map);
        if (!m.same_shape(grid)) throw ShapeError("simulated map " + c.paths.sim_map.string() + " does not match the grid");
        return m;
    }
    return simulate_map(grid, scenario, workers);
}

FeatureShape shape_of(const ModelConfig& m) { return {m.window, m.srp_size, m.norm, false}; }

std::string fmt(double v, const char* spec = "%.3f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

}  // namespace

std::string cmd_simulate(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.sim_map, "sim_map");
    const HeightGrid grid = grid_of(config);
    const Scenario scenario = config.scenario_for(grid);
    const RadioMap map = simulate_map(grid, scenario, workers_for(config, options));
    ensure_parent(out);
    save_radio_map(map, out);
    return "simulate: " + std::to_string(map.width()) + "x" + std::to_string(map.height()) + " cells, " +
           std::to_string(map.available_count()) + " available -> " + out.string();
}

std::string cmd_measure(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.measurements, "measurements");
    const int workers = workers_for(config, options);
    const HeightGrid grid = grid_of(config);
    const Scenario scenario = config.scenario_for(grid);
    const RadioMap sim = sim_of(config, grid, scenario, workers);
    PerturbationSpec spec = config.perturbation;
    std::uint64_t seed = config.measure_seed;
    if (options.seed) {
        spec.seed = *options.seed;
        seed = *options.seed;
    }
    spec.validate();
    const RadioMap truth = spec.height_noise_sd > 0.0
                               ? perturb_environment(simulate_map(perturb_heights(grid, spec), scenario, workers), spec)
                               : perturb_environment(sim, spec);
    RadioMap eligible(sim.width(), sim.height(), sim.cell_size(), sim.origin_x(), sim.origin_y());
    for (int r = 0; r < sim.height(); ++r) {
        for (int c = 0; c < sim.width(); ++c) {
            if (sim.available({c, r}) && truth.available({c, r}) && truth.power({c, r}) >= config.sensitivity) {
                eligible.set({c, r}, 0.0);
            }
        }
    }
    std::vector<Sample> samples;
    for (const auto& cell : draw_measurements(eligible, config.measurement_count, seed)) {
        samples.push_back({cell, truth.power(cell)});
    }
    ensure_parent(out);
    save_samples(samples, out);
    std::string summary = "measure: " + std::to_string(samples.size()) + " samples -> " + out.string();
    if (!config.paths.truth_map.empty()) {
        ensure_parent(config.paths.truth_map);
        save_radio_map(truth, config.paths.truth_map);
        summary += ", truth -> " + config.paths.truth_map.string();
    }
    return summary;
}

std::string cmd_pretrain(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.weights, "weights");
    const int workers = workers_for(config, options);
    const HeightGrid grid = grid_of(config);
    BenchmarkConfig b = config.benchmark(grid);
    b.workers = workers;
    if (options.seed) {
        b.model.seed = *options.seed;
        b.pretrain.seed = *options.seed;
    }
    const RadioMap sim = sim_of(config, grid, b.scenario, workers);
    TrainResult result;
    Model model = pretrain_for_benchmark(grid, sim, b, &result);
    ensure_parent(out);
    save_weights(model, out);
    std::string summary = "pretrain: " + std::to_string(result.train_loss.size()) + " epochs";
    if (!result.train_loss.empty()) summary += ", train loss " + fmt(result.train_loss.back(), "%.6g");
    if (result.best_epoch >= 0) {
        summary += ", best validation " + fmt(result.validation_loss[static_cast<std::size_t>(result.best_epoch - 1)], "%.6g") +
                   " at epoch " + std::to_string(result.best_epoch);
    }
    return summary + " -> " + out.string();
}

std::string cmd_augment(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.augmented, "augmented");
    const HeightGrid grid = grid_of(config);
    const Scenario scenario = config.scenario_for(grid);
    const RadioMap sim = sim_of(config, grid, scenario, workers_for(config, options));
    const auto measured = load_samples(required(config.paths.measurements, "measurements"));
    std::vector<Sample> samples;
    for (const auto& a : augment_samples(measured, sim, config.augment_n, config.sensitivity)) samples.push_back(a.sample);
    ensure_parent(out);
    save_samples(samples, out);
    return "augment: " + std::to_string(measured.size()) + " measurements -> " + std::to_string(samples.size()) +
           " samples (n=" + std::to_string(config.augment_n) + ") -> " + out.string();
}

std::string cmd_finetune(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.finetuned, "finetuned");
    const HeightGrid grid = grid_of(config);
    const Scenario scenario = config.scenario_for(grid);
    const RadioMap sim = sim_of(config, grid, scenario, workers_for(config, options));
    Model model = load_weights(required(config.paths.weights, "weights"), config.model);
    const auto measured = load_samples(required(config.paths.measurements, "measurements"));
    const Dataset data = augment_dataset(measured, grid, scenario, sim, config.augment_n, shape_of(model.config()),
                                         config.sensitivity);
    TrainOptions opts = config.finetune;
    if (options.seed) opts.seed = *options.seed;
    const TrainResult result = finetune(model, data, opts);
    ensure_parent(out);
    save_weights(model, out);
    std::string summary = "finetune: " + std::to_string(data.size()) + " rows, " +
                          std::to_string(result.train_loss.size()) + " epochs";
    if (!result.train_loss.empty()) summary += ", train loss " + fmt(result.train_loss.back(), "%.6g");
    return summary + " -> " + out.string();
}

std::string cmd_predict(const RunConfig& config, const CommandOptions& options) {
    const auto out = output_path(options, config.paths.prediction, "prediction");
    const int workers = workers_for(config, options);
    const HeightGrid grid = grid_of(config);
    const Scenario scenario = config.scenario_for(grid);
    const RadioMap sim = sim_of(config, grid, scenario, workers);
    const auto& weights = config.paths.finetuned.empty() ? required(config.paths.weights, "weights or paths.finetuned")
                                                         : config.paths.finetuned;
    const Model model = load_weights(weights, config.model);
    const RadioMap map = predict_map(model, grid, scenario, sim, workers);
    ensure_parent(out);
    save_radio_map(map, out);
    return "predict: " + std::to_string(map.available_count()) + " cells from " + weights.string() + " -> " +
           out.string();
}

std::string cmd_evaluate(const RunConfig& config, const CommandOptions& options) {
    const auto base = output_path(options, config.paths.report, "report");
    const HeightGrid grid = grid_of(config);
    BenchmarkConfig b = config.benchmark(grid);
    b.workers = workers_for(config, options);
    if (options.seed) b.seeds = {*options.seed};
    for (const auto& s : b.splits) s.validate(&grid);
    std::optional<Model> pretrained;
    if (config.reuse_weights) pretrained.emplace(load_weights(required(config.paths.weights, "weights"), config.model));
    const BenchmarkReport report = run_benchmark(grid, b, pretrained ? &*pretrained : nullptr);

    ensure_parent(base);
    const auto tsv_path = std::filesystem::path(base.string() + ".tsv");
    const auto kv_path = std::filesystem::path(base.string() + ".kv");
    {
        std::ofstream tsv(tsv_path, std::ios::binary);
        if (!tsv) throw IoError("cannot write " + tsv_path.string());
        write_report_tsv(report, tsv);
        std::ofstream kv(kv_path, std::ios::binary);
        if (!kv) throw IoError("cannot write " + kv_path.string());
        write_report_kv(report, kv);
        if (!tsv || !kv) throw IoError("write failed for report " + base.string());
    }
    std::string summary = "evaluate:";
    for (const auto& s : report.splits) {
        summary += " [" + s.name + "]";
        for (const auto& m : s.methods) {
            if (!m.augmented) continue;
            summary += " " + m.method + "=" + fmt(m.median);
        }
    }
    return summary + " -> " + tsv_path.string() + ", " + kv_path.string();
}

std::vector<std::uint8_t> heatmap_levels(const RadioMap& map, const Normalization& norm) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(map.width()) * static_cast<std::size_t>(map.height()), 0);
    const double span = norm.power_max - norm.power_min;
    for (int r = 0; r < map.height(); ++r) {
        // Row index grows northwards in the grid; images start at the top.
        const std::size_t line = static_cast<std::size_t>(map.height() - 1 - r) * static_cast<std::size_t>(map.width());
        for (int c = 0; c < map.width(); ++c) {
            if (!map.available({c, r})) continue;
            const double level = std::round((map.power({c, r}) - norm.power_min) / span * 255.0);
            out[line + static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
        }
    }
    return out;
}

void write_heatmap(const RadioMap& map, const std::filesystem::path& path, const Normalization& norm) {
    const auto levels = heatmap_levels(map, norm);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
    f.write(reinterpret_cast<const char*>(levels.data()), static_cast<std::streamsize>(levels.size()));
    if (!f) throw IoError("write failed for " + path.string());
}

std::string cmd_heatmap(const RunConfig* config, const CommandOptions& options) {
    std::filesystem::path in;
    if (options.input) {
        in = *options.input;
    } else if (config && !config->paths.prediction.empty()) {
        in = config->paths.prediction;
    } else {
        throw ConfigError("no input map: pass --input or set paths.prediction");
    }
    const auto out = output_path(options, config ? config->paths.heatmap : std::filesystem::path{}, "heatmap");
    const RadioMap map = load_radio_map(in);
    ensure_parent(out);
    write_heatmap(map, out, config ? config->model.norm : Normalization{});
    return "heatmap: " + in.string() + " -> " + out.string();
}

std::string format_error(const std::exception& e) {
    std::string kind = "internal";
    const std::exception* inner = &e;
    std::string stage;
    if (const auto* s = dynamic_cast<const StageError*>(&e)) stage = s->stage();
    if (dynamic_cast<const LoadError*>(inner)) {
        kind = "load";
    } else if (dynamic_cast<const IoError*>(inner)) {
        kind = "io";
    } else if (dynamic_cast<const ConfigError*>(inner)) {
        kind = "config";
    } else if (dynamic_cast<const TransferError*>(inner)) {
        kind = "transfer";
    } else if (dynamic_cast<const SplitError*>(inner)) {
        kind = "split";
    } else if (dynamic_cast<const ShapeError*>(inner)) {
        kind = "shape";
    } else if (dynamic_cast<const ArgumentError*>(inner) || dynamic_cast<const RangeError*>(inner)) {
        kind = "argument";
    } else if (dynamic_cast<const NumericError*>(inner)) {
        kind = "numeric";
    } else if (dynamic_cast<const StageError*>(inner)) {
        kind = "stage";
    }
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    std::string out = "error kind=" + kind + " code=" + std::to_string(exit_code_for(e));
    if (!stage.empty()) out += " stage=" + stage;
    return out + " message=" + message;
}

}  // namespace rpp
