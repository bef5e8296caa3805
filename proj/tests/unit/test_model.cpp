#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "rpp/error.hpp"
#include "rpp/eval.hpp"
#include "rpp/model.hpp"

using namespace rpp;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.window = 9;
    c.wide_channels = {3, 4};
    c.wide_kernels = {3, 3};
    c.local_channels = {2};
    c.local_kernel = 3;
    c.head_hidden = {6};
    return c;
}

struct Scene {
    HeightGrid grid = generate_city(48, 48, 3);
    Scenario scenario = default_scenario(grid);
    RadioMap sim = simulate_map(grid, scenario);
};

const Scene& scene() {
    static const Scene s;
    return s;
}

Dataset sim_rows(const ModelConfig& c, std::size_t count, std::uint64_t seed) {
    const Scene& s = scene();
    const auto cells = draw_pretraining_cells(s.sim, count, seed, c.norm.power_min);
    return simulated_dataset(cells, s.grid, s.scenario, s.sim, {c.window, c.srp_size, c.norm, false});
}

bool same_weights(Model& a, Model& b) {
    const auto sa = a.state();
    const auto sb = b.state();
    if (sa.size() != sb.size()) return false;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (!(*sa[i] == *sb[i])) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("default model shape trace and parameter count") {
    const ModelConfig c;
    CHECK(c.wide_output_side() == 8);
    Model a = build_model(c);
    Model b = build_model(c);
    CHECK(a.parameter_count() == b.parameter_count());
    CHECK(a.parameter_count() > 0);
    CHECK(same_weights(a, b));
    Shape s{1, 3, 65, 65};
    std::vector<std::size_t> sides;
    for (std::size_t i = 0; i < a.wide().size(); ++i) {
        s = a.wide().layer(i).output_shape(s);
        if (a.wide().layer(i).kind() == LayerKind::avgpool) sides.push_back(s[2]);
    }
    CHECK(sides == std::vector<std::size_t>{32, 16, 8});
}

TEST_CASE("config validation") {
    ModelConfig c = small_config();
    c.window = 8;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.window = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.wide_kernels = {3};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_NOTHROW(small_config().validate());
}

TEST_CASE("predictions are finite, repeatable and in range") {
    Model m = build_model(small_config());
    const Dataset d = sim_rows(small_config(), 20, 1);
    for (const auto& row : d.rows) {
        const double p = m.predict(row.features);
        CHECK(std::isfinite(p));
        CHECK(p == m.predict(row.features));
        CHECK(p >= -120.0);
        CHECK(p <= -30.0);
    }
}

TEST_CASE("full model gradient check") {
    Model m = build_model(small_config());
    const Dataset d = sim_rows(small_config(), 6, 2);
    std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
    const Batch b = make_batch(d, rows, m.config().norm);
    CHECK(model_grad_check(m, b, Mode::train).max_relative_error < 1e-4);
    CHECK(model_grad_check(m, b, Mode::infer).max_relative_error < 1e-4);
}

TEST_CASE("linear head also passes the gradient check") {
    ModelConfig c = small_config();
    c.head_activation = HeadActivation::linear;
    c.head_hidden = {};
    Model m = build_model(c);
    const Dataset d = sim_rows(c, 4, 3);
    std::vector<std::size_t> rows{0, 1, 2, 3};
    CHECK(model_grad_check(m, make_batch(d, rows, c.norm), Mode::train).max_relative_error < 1e-4);
}

TEST_CASE("pretraining overfits ten samples") {
    const ModelConfig c = small_config();
    Model m = build_model(c);
    const Dataset d = sim_rows(c, 10, 4);
    REQUIRE(d.size() == 10);
    TrainOptions o;
    o.epochs = 2000;
    o.batch_size = 10;
    o.validation_fraction = 0.0;
    const TrainResult r = pretrain(m, d, o);
    CHECK(r.steps == 2000);
    CHECK(r.train_loss.back() < 0.01);
}

TEST_CASE("smoothed pre-training loss does not increase") {
    const ModelConfig c = small_config();
    Model m = build_model(c);
    const Dataset d = sim_rows(c, 400, 5);
    TrainOptions o;
    o.epochs = 60;
    o.batch_size = 32;
    o.validation_fraction = 0.0;
    const TrainResult r = pretrain(m, d, o);
    std::vector<double> windows;
    for (std::size_t k = 0; k + 10 <= r.train_loss.size(); k += 10) {
        double s = 0.0;
        for (std::size_t i = k; i < k + 10; ++i) s += r.train_loss[i];
        windows.push_back(s / 10.0);
    }
    for (std::size_t i = 1; i < windows.size(); ++i) CHECK(windows[i] <= windows[i - 1]);
}

TEST_CASE("training is deterministic") {
    const ModelConfig c = small_config();
    const Dataset d = sim_rows(c, 60, 6);
    TrainOptions o;
    o.epochs = 3;
    o.batch_size = 16;
    Model a = build_model(c);
    Model b = build_model(c);
    const TrainResult ra = pretrain(a, d, o);
    const TrainResult rb = pretrain(b, d, o);
    CHECK(same_weights(a, b));
    CHECK(ra.train_loss == rb.train_loss);
    CHECK(ra.validation_loss == rb.validation_loss);
}

TEST_CASE("fine-tuning") {
    const ModelConfig c = small_config();
    const Dataset pre = sim_rows(c, 500, 7);
    Model base = build_model(c);
    TrainOptions o;
    o.epochs = 30;
    o.batch_size = 32;
    (void)pretrain(base, pre, o);

    SUBCASE("zero epochs leave the weights unchanged") {
        Model m = base;
        TrainOptions f = default_finetune_options();
        f.epochs = 0;
        (void)finetune(m, sim_rows(c, 30, 8), f);
        CHECK(same_weights(m, base));
    }
    SUBCASE("no distribution shift keeps the held-out loss") {
        Model m = base;
        const Dataset tune = sim_rows(c, 200, 9);
        const Dataset held = sim_rows(c, 200, 10);
        const double before = evaluate_loss(m, held);
        TrainOptions f = default_finetune_options();
        f.epochs = 20;
        (void)finetune(m, tune, f);
        CHECK(evaluate_loss(m, held) <= 1.1 * before);
    }
    SUBCASE("batch-norm statistics are frozen") {
        Model m = base;
        TrainOptions f = default_finetune_options();
        f.epochs = 2;
        (void)finetune(m, sim_rows(c, 30, 11), f);
        auto& bn = dynamic_cast<BatchNormLayer&>(m.wide().layer(1));
        auto& bn0 = dynamic_cast<BatchNormLayer&>(base.wide().layer(1));
        CHECK(bn.stats().running_mean == bn0.stats().running_mean);
        CHECK(bn.stats().running_var == bn0.stats().running_var);
    }
    SUBCASE("mismatched features are a transfer error") {
        Model m = base;
        ModelConfig other = c;
        other.window = 11;
        CHECK_THROWS_AS(finetune(m, sim_rows(other, 10, 12)), TransferError);
    }
}

TEST_CASE("predict_map") {
    const Scene& s = scene();
    const Model m = build_model(small_config());
    const RadioMap a = predict_map(m, s.grid, s.scenario, s.sim, 1);
    CHECK(a == predict_map(m, s.grid, s.scenario, s.sim, 1));
    CHECK(a == predict_map(m, s.grid, s.scenario, s.sim, 3));
    for (int r = 0; r < a.height(); ++r) {
        for (int col = 0; col < a.width(); ++col) {
            CHECK(a.available({col, r}) == s.sim.available({col, r}));
            if (!a.available({col, r})) continue;
            const double p = a.power({col, r});
            CHECK(std::isfinite(p));
            CHECK(p >= -120.0);
            CHECK(p <= -30.0);
        }
    }
}

TEST_CASE("weights files") {
    ModelConfig c = small_config();
    c.seed = 21;
    Model m = build_model(c);
    (void)pretrain(m, sim_rows(c, 40, 13), TrainOptions{2, 16, 0.002, 0.25, 1, {}});
    const auto bytes = serialize_weights(m);
    Model back = deserialize_weights(bytes);
    CHECK(back.config() == m.config());
    CHECK(serialize_weights(back) == bytes);
    CHECK(same_weights(back, m));

    const auto path = test::scratch("w.rpw");
    save_weights(m, path);
    Model loaded = load_weights(path);
    CHECK(serialize_weights(loaded) == bytes);

    auto bad = bytes;
    bad[0] = 'X';
    try {
        (void)deserialize_weights(bad);
        FAIL("accepted bad magic");
    } catch (const LoadError& e) {
        CHECK(e.kind() == LoadError::Kind::bad_magic);
    }
    auto version = bytes;
    version[4] = 99;
    try {
        (void)deserialize_weights(version);
        FAIL("accepted bad version");
    } catch (const LoadError& e) {
        CHECK(e.kind() == LoadError::Kind::bad_version);
    }
    const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(bytes.size() / 2));
    try {
        (void)deserialize_weights(cut);
        FAIL("accepted truncated file");
    } catch (const LoadError& e) {
        CHECK(e.kind() == LoadError::Kind::truncated);
    }
    ModelConfig other = c;
    other.local_channels = {3};
    CHECK_THROWS_AS(load_weights(path, other), TransferError);
    ModelConfig reseeded = c;
    reseeded.seed = 5;
    CHECK_NOTHROW(load_weights(path, reseeded));
    CHECK(config_mismatch(c, other).has_value());
    CHECK_FALSE(config_mismatch(c, reseeded).has_value());
}
