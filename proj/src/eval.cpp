#include "rpp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <set>

#include "rpp/augment.hpp"
#include "rpp/baselines.hpp"
#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

void SplitSpec::validate(const HeightGrid* grid) const {
    if (name.empty()) throw ConfigError("split name must not be empty");
    if (mode == Mode::random) {
        if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split '" + name + "': ratio must be in (0, 1)");
        return;
    }
    if (rect.col1 <= rect.col0 || rect.row1 <= rect.row0) {
        throw ConfigError("split '" + name + "': test rectangle is empty");
    }
    if (grid && (rect.col0 < 0 || rect.row0 < 0 || rect.col1 > grid->width() || rect.row1 > grid->height())) {
        throw ConfigError("split '" + name + "': test rectangle lies outside the grid");
    }
}

std::pair<std::vector<Sample>, std::vector<Sample>> split(std::span<const Sample> samples, const SplitSpec& spec) {
    spec.validate();
    std::vector<char> is_test(samples.size(), 0);
    if (spec.mode == SplitSpec::Mode::random) {
        std::vector<std::size_t> order(samples.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(spec.seed);
        rng.shuffle(std::span<std::size_t>(order));
        const auto n_train = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(samples.size())));
        for (std::size_t i = n_train; i < order.size(); ++i) is_test[order[i]] = 1;
    } else {
        for (std::size_t i = 0; i < samples.size(); ++i) is_test[i] = spec.rect.contains(samples[i].index) ? 1 : 0;
    }
    std::pair<std::vector<Sample>, std::vector<Sample>> out;
    for (std::size_t i = 0; i < samples.size(); ++i) (is_test[i] ? out.second : out.first).push_back(samples[i]);
    if (out.first.empty()) throw SplitError("split '" + spec.name + "': empty training partition");
    if (out.second.empty()) throw SplitError("split '" + spec.name + "': empty test partition");
    return out;
}

double rmse(std::span<const double> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) {
        throw ShapeError("rmse: " + std::to_string(predictions.size()) + " predictions for " +
                         std::to_string(truths.size()) + " truths");
    }
    if (truths.empty()) throw ShapeError("rmse: no values");
    double sum = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const double d = predictions[i] - truths[i];
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(truths.size()));
}

PredictionTable sorted_prediction_table(std::span<const Sample> test,
                                        const std::vector<std::pair<std::string, std::vector<double>>>& predictions) {
    PredictionTable table;
    for (const auto& [method, values] : predictions) {
        table.methods.push_back(method);
        for (std::size_t i = 0; i < test.size(); ++i) {
            if (i >= values.size() || !std::isfinite(values[i])) {
                throw ReportError("prediction missing for method '" + method + "' at (" +
                                  std::to_string(test[i].index.col) + ", " + std::to_string(test[i].index.row) + ")");
            }
        }
        if (values.size() != test.size()) {
            throw ReportError("method '" + method + "' has " + std::to_string(values.size()) + " predictions for " +
                              std::to_string(test.size()) + " test samples");
        }
    }
    for (std::size_t i = 0; i < test.size(); ++i) {
        PredictionTable::Row row{test[i].index, test[i].power, {}};
        for (const auto& p : predictions) row.predictions.push_back(p.second[i]);
        table.rows.push_back(std::move(row));
    }
    std::stable_sort(table.rows.begin(), table.rows.end(),
                     [](const auto& a, const auto& b) { return a.truth < b.truth; });
    return table;
}

std::vector<GridIndex> draw_measurements(const RadioMap& availability, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw ArgumentError("draw_measurements: count must be positive");
    if (availability.available_count() < count) {
        throw ArgumentError("draw_measurements: only " + std::to_string(availability.available_count()) +
                            " available cells for " + std::to_string(count) + " measurements");
    }
    const auto g = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))));
    std::vector<std::vector<GridIndex>> strata(static_cast<std::size_t>(g) * g);
    for (int r = 0; r < availability.height(); ++r) {
        for (int c = 0; c < availability.width(); ++c) {
            if (!availability.available({c, r})) continue;
            const int sc = c * g / availability.width();
            const int sr = r * g / availability.height();
            strata[static_cast<std::size_t>(sr) * g + sc].push_back({c, r});
        }
    }
    Rng rng(seed);
    std::vector<std::size_t> order;
    for (std::size_t k = 0; k < strata.size(); ++k) {
        if (!strata[k].empty()) order.push_back(k);
    }
    rng.shuffle(std::span<std::size_t>(order));
    if (order.size() > count) order.resize(count);
    std::sort(order.begin(), order.end());
    std::vector<GridIndex> out;
    std::set<GridIndex> taken;
    for (std::size_t k : order) {
        const auto& cells = strata[k];
        const GridIndex pick = cells[rng.index(cells.size())];
        out.push_back(pick);
        taken.insert(pick);
    }
    if (out.size() < count) {
        std::vector<GridIndex> rest;
        for (const auto& cells : strata) {
            for (const auto& c : cells) {
                if (!taken.count(c)) rest.push_back(c);
            }
        }
        rng.shuffle(std::span<GridIndex>(rest));
        for (std::size_t i = 0; out.size() < count; ++i) out.push_back(rest[i]);
    }
    return out;
}

std::vector<GridIndex> draw_pretraining_cells(const RadioMap& sim_map, std::size_t count, std::uint64_t seed,
                                              double min_power) {
    RadioMap eligible(sim_map.width(), sim_map.height(), sim_map.cell_size(), sim_map.origin_x(), sim_map.origin_y());
    for (int r = 0; r < sim_map.height(); ++r) {
        for (int c = 0; c < sim_map.width(); ++c) {
            if (sim_map.available({c, r}) && sim_map.power({c, r}) >= min_power) eligible.set({c, r}, 0.0);
        }
    }
    if (eligible.available_count() == 0) throw ArgumentError("draw_pretraining_cells: no eligible cells");
    return draw_measurements(eligible, std::min(count, eligible.available_count()), seed);
}

double median(std::vector<double> values) {
    if (values.empty()) throw ArgumentError("median of no values");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

const MethodResult& SplitResult::find(const std::string& method, bool augmented) const {
    for (const auto& m : methods) {
        if (m.method == method && m.augmented == augmented) return m;
    }
    throw ReportError("no result for method '" + method + "' in split '" + name + "'");
}

const SplitResult& BenchmarkReport::find(const std::string& split) const {
    for (const auto& s : splits) {
        if (s.name == split) return s;
    }
    throw ReportError("no split named '" + split + "'");
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what(), exit_code_for(e));
    }
}

FeatureShape feature_shape(const BenchmarkConfig& c, bool pretraining) {
    return {c.model.window, c.model.srp_size, c.model.norm, pretraining && c.mask_srp_center};
}

std::vector<double> model_predictions(Model& model, const Dataset& test) {
    std::vector<const FeatureTensor*> feats;
    for (const auto& r : test.rows) feats.push_back(&r.features);
    std::vector<double> out;
    constexpr std::size_t chunk = 64;
    for (std::size_t i = 0; i < feats.size(); i += chunk) {
        const auto part = std::span<const FeatureTensor* const>(feats).subspan(i, std::min(chunk, feats.size() - i));
        const auto p = model.predict(part);
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

}  // namespace

Model pretrain_for_benchmark(const HeightGrid& grid, const RadioMap& sim_map, const BenchmarkConfig& config,
                             TrainResult* result) {
    const auto cells = stage("pretrain", [&] {
        return draw_pretraining_cells(sim_map, config.pretrain_samples, derive_seed(config.model.seed, 0x9e7),
                                      config.model.norm.power_min);
    });
    const Dataset data = stage(
        "pretrain", [&] { return simulated_dataset(cells, grid, config.scenario, sim_map, feature_shape(config, true)); });
    Model model = stage("pretrain", [&] { return build_model(config.model); });
    TrainResult r = stage("pretrain", [&] { return pretrain(model, data, config.pretrain); });
    if (result) *result = std::move(r);
    return model;
}

BenchmarkReport run_benchmark(const HeightGrid& grid, const BenchmarkConfig& config, const Model* pretrained) {
    stage("config", [&] {
        config.scenario.validate();
        config.perturbation.validate();
        config.model.validate();
        for (const auto& s : config.splits) s.validate(&grid);
        if (config.seeds.empty()) throw ConfigError("benchmark needs at least one seed");
        if (config.splits.empty()) throw ConfigError("benchmark needs at least one split");
        if (config.augment_n < 1 || config.augment_n % 2 == 0) throw ConfigError("augment_n must be odd");
        return 0;
    });

    const RadioMap sim = stage("simulate", [&] { return simulate_map(grid, config.scenario, config.workers); });

    std::optional<Model> own;
    BenchmarkReport report;
    report.seeds = config.seeds;
    report.augment_n = config.augment_n;
    if (!pretrained) {
        TrainResult tr;
        own = pretrain_for_benchmark(grid, sim, config, &tr);
        pretrained = &*own;
        if (!tr.validation_loss.empty()) {
            report.pretrain_best_validation = *std::min_element(tr.validation_loss.begin(), tr.validation_loss.end());
        }
    } else if (auto diff = config_mismatch(config.model, pretrained->config())) {
        throw StageError("pretrain", "pre-trained weights do not fit: " + *diff, 2);
    }

    const auto& methods = benchmark_methods();
    std::vector<bool> aug_flags{true};
    if (config.compare_augmentation && config.augment_n > 1) aug_flags.push_back(false);

    for (const auto& spec : config.splits) {
        SplitResult sr;
        sr.name = spec.name;
        sr.spec = spec;
        for (const auto& m : methods) {
            for (bool a : aug_flags) sr.methods.push_back({m, a, {}, 0.0});
        }
        report.splits.push_back(std::move(sr));
    }

    for (std::uint64_t seed : config.seeds) {
        PerturbationSpec pspec = config.perturbation;
        pspec.seed = derive_seed(seed, 0x7e47);
        const RadioMap truth = stage("perturb", [&] {
            if (pspec.height_noise_sd > 0.0) {
                return perturb_environment(simulate_map(perturb_heights(grid, pspec), config.scenario, config.workers),
                                           pspec);
            }
            return perturb_environment(sim, pspec);
        });
        const std::vector<Sample> samples = stage("measure", [&] {
            RadioMap both = RadioMap::like(grid);
            for (int r = 0; r < grid.height(); ++r) {
                for (int c = 0; c < grid.width(); ++c) {
                    if (sim.available({c, r}) && truth.available({c, r}) &&
                        truth.power({c, r}) >= config.sensitivity) {
                        both.set({c, r}, 0.0);
                    }
                }
            }
            std::vector<Sample> out;
            for (const auto& cell : draw_measurements(both, config.measurement_count, derive_seed(seed, 0x3ea5))) {
                out.push_back({cell, truth.power(cell)});
            }
            return out;
        });

        for (std::size_t k = 0; k < config.splits.size(); ++k) {
            SplitSpec spec = config.splits[k];
            spec.seed = derive_seed(seed, 0x5b11 + k);
            SplitResult& sr = report.splits[k];
            const auto parts = stage("split", [&] { return split(samples, spec); });
            const std::vector<Sample>& train = parts.first;
            const std::vector<Sample>& test = parts.second;
            sr.train_counts.push_back(train.size());
            sr.test_counts.push_back(test.size());
            std::vector<double> truths;
            for (const auto& s : test) truths.push_back(s.power);
            const Dataset test_rows = stage("augment", [&] {
                return featurize(test, grid, config.scenario, sim, feature_shape(config, false), Provenance::measured);
            });

            std::vector<std::pair<std::string, std::vector<double>>> table_columns;
            for (bool use_aug : aug_flags) {
                const int n = use_aug ? config.augment_n : 1;
                const std::vector<Sample> fit_samples = stage("augment", [&] {
                    std::vector<Sample> out;
                    for (const auto& a : augment_samples(train, sim, n, config.sensitivity)) out.push_back(a.sample);
                    return out;
                });
                const Dataset fit_rows = stage("augment", [&] {
                    return featurize(fit_samples, grid, config.scenario, sim, feature_shape(config, false),
                                     n == 1 ? Provenance::measured : Provenance::augmented);
                });

                std::map<std::string, std::vector<double>> preds;
                preds["proposed"] = stage("finetune", [&] {
                    Model m = *pretrained;
                    TrainOptions o = config.finetune;
                    o.seed = derive_seed(seed, 0xf17e);
                    finetune(m, fit_rows, o);
                    return model_predictions(m, test_rows);
                });
                preds["ml_no_pretrain"] = stage("scratch", [&] {
                    ModelConfig mc = config.model;
                    mc.seed = derive_seed(seed, 0x5c7a);
                    Model m = build_model(mc);
                    TrainOptions o = config.scratch;
                    o.seed = derive_seed(seed, 0x5c7b);
                    o.validation_fraction = 0.0;
                    pretrain(m, fit_rows, o);
                    return model_predictions(m, test_rows);
                });
                preds["linear"] = stage("linear", [&] {
                    std::vector<double> out;
                    for (const auto& s : test) out.push_back(linear_interp_predict(fit_samples, s.index));
                    return out;
                });
                preds["kriging"] = stage("kriging", [&] {
                    const auto bins = empirical_variogram(fit_samples, grid.cell_size());
                    const VariogramModel vm = fit_variogram(bins);
                    std::vector<double> out;
                    for (const auto& s : test) {
                        out.push_back(kriging_predict(fit_samples, vm, s.index, grid.cell_size()).value);
                    }
                    return out;
                });
                preds["offset"] = stage("offset", [&] {
                    std::vector<std::pair<double, double>> pairs;
                    for (const auto& s : fit_samples) pairs.emplace_back(s.power, sim.power(s.index));
                    const OffsetModel om = offset_fit(pairs);
                    std::vector<double> out;
                    for (const auto& s : test) out.push_back(offset_predict(sim, om, s.index));
                    return out;
                });

                for (auto& mr : sr.methods) {
                    if (mr.augmented != use_aug) continue;
                    mr.rmse.push_back(stage("report", [&] { return rmse(preds.at(mr.method), truths); }));
                }
                for (const auto& m : methods) {
                    table_columns.emplace_back(m + (use_aug ? "" : "_noaug"), preds.at(m));
                }
            }
            sr.tables.push_back(stage("report", [&] { return sorted_prediction_table(test, table_columns); }));
        }
    }
    for (auto& sr : report.splits) {
        for (auto& mr : sr.methods) mr.median = median(mr.rmse);
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string method_label(const MethodResult& m) { return m.method + (m.augmented ? "" : "_noaug"); }

}  // namespace

void write_report_tsv(const BenchmarkReport& report, std::ostream& out) {
    out << "split\tmethod\taugmented\tmedian_rmse";
    for (auto s : report.seeds) out << "\tseed_" << s;
    out << '\n';
    for (const auto& sr : report.splits) {
        for (const auto& m : sr.methods) {
            out << sr.name << '\t' << m.method << '\t' << (m.augmented ? "yes" : "no") << '\t' << fmt(m.median);
            for (double r : m.rmse) out << '\t' << fmt(r);
            out << '\n';
        }
    }
    for (const auto& sr : report.splits) {
        for (std::size_t k = 0; k < sr.tables.size(); ++k) {
            const auto& t = sr.tables[k];
            out << "\n# predictions split=" << sr.name << " seed=" << report.seeds[k] << '\n';
            out << "col\trow\ttruth";
            for (const auto& m : t.methods) out << '\t' << m;
            out << '\n';
            for (const auto& row : t.rows) {
                out << row.index.col << '\t' << row.index.row << '\t' << fmt(row.truth);
                for (double p : row.predictions) out << '\t' << fmt(p);
                out << '\n';
            }
        }
    }
}

void write_report_kv(const BenchmarkReport& report, std::ostream& out) {
    out << "[benchmark]\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < report.seeds.size(); ++i) out << (i ? "," : "") << report.seeds[i];
    out << "\naugment_n = " << report.augment_n << '\n';
    out << "methods = ";
    const auto& methods = benchmark_methods();
    for (std::size_t i = 0; i < methods.size(); ++i) out << (i ? "," : "") << methods[i];
    out << "\nsplits = ";
    for (std::size_t i = 0; i < report.splits.size(); ++i) out << (i ? "," : "") << report.splits[i].name;
    out << "\npretrain_best_validation_mse = " << fmt(report.pretrain_best_validation) << '\n';
    for (const auto& sr : report.splits) {
        out << "\n[split." << sr.name << "]\n";
        out << "mode = " << (sr.spec.mode == SplitSpec::Mode::random ? "random" : "area") << '\n';
        for (std::size_t k = 0; k < report.seeds.size() && k < sr.train_counts.size(); ++k) {
            out << "seed." << report.seeds[k] << ".train = " << sr.train_counts[k] << '\n';
            out << "seed." << report.seeds[k] << ".test = " << sr.test_counts[k] << '\n';
        }
        for (const auto& m : sr.methods) {
            out << "\n[split." << sr.name << ".method." << method_label(m) << "]\n";
            out << "method = " << m.method << '\n';
            out << "augmented = " << (m.augmented ? "true" : "false") << '\n';
            out << "median_rmse = " << fmt(m.median) << '\n';
            for (std::size_t k = 0; k < m.rmse.size(); ++k) {
                out << "seed." << report.seeds[k] << ".rmse = " << fmt(m.rmse[k]) << '\n';
            }
        }
    }
}

}  // namespace rpp
