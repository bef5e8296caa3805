#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sys/wait.h>
#include <sstream>

#include "helpers.hpp"
#include "rpp/cli.hpp"
#include "rpp/error.hpp"

using namespace rpp;

namespace {

RunConfig parse(const std::string& text, const std::filesystem::path& base = "/base") {
    std::istringstream in(text);
    return parse_config(in, "test.cfg", base);
}

std::string read_all(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("empty config keeps the defaults") {
    const RunConfig c = parse("");
    CHECK(c.scenario == Scenario{});
    CHECK(c.model == ModelConfig{});
    CHECK(c.augment_n == 3);
    CHECK(c.eval_seeds == std::vector<std::uint64_t>{1, 2, 3, 4, 5});
    CHECK(c.splits.size() == 1u);
}

TEST_CASE("config sections and keys") {
    const RunConfig c = parse(R"(
# comment
[paths]
grid = city.grid
report = /abs/report

[scenario]
frequency = 2.4e9   # trailing comment
bs_x = 10.5

[model]
window = 17
wide_channels = 8, 8
wide_kernels = 3, 3
head_hidden = none
head = linear

[evaluate]
seeds = 7, 9
splits = b

[split.a]
mode = random
ratio = 0.5

[split.b]
mode = area
rect = 0, 0, 10, 12
)");
    CHECK(c.paths.grid == std::filesystem::path("/base/city.grid"));
    CHECK(c.paths.report == std::filesystem::path("/abs/report"));
    CHECK(c.scenario.frequency == 2.4e9);
    CHECK(c.bs_x == 10.5);
    CHECK_FALSE(c.bs_y.has_value());
    CHECK(c.model.window == 17);
    CHECK(c.model.wide_channels == std::vector<int>{8, 8});
    CHECK(c.model.head_hidden.empty());
    CHECK(c.model.head_activation == HeadActivation::linear);
    CHECK(c.eval_seeds == std::vector<std::uint64_t>{7, 9});
    REQUIRE(c.splits.size() == 1u);
    CHECK(c.splits[0].name == "b");
    CHECK(c.splits[0].rect.col1 == 10);
    CHECK(c.splits[0].rect.row1 == 12);
}

TEST_CASE("schema violations name the line") {
    const auto error_of = [](const std::string& text) {
        try {
            (void)parse(text);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(error_of("[scenario]\nfrequncy = 5\n").find("test.cfg:2") != std::string::npos);
    CHECK(error_of("[bogus]\n").find("unknown section") != std::string::npos);
    CHECK(error_of("x = 1\n").find("outside") != std::string::npos);
    CHECK(error_of("[model]\nwindow = abc\n").find("test.cfg:2") != std::string::npos);
    CHECK(error_of("[model]\nwindow = 8\n") != "no error");
    CHECK(error_of("[augment]\nn = 2\n") != "no error");
    CHECK(error_of("[augment]\nn = 3\nn = 5\n").find("duplicate") != std::string::npos);
    CHECK(error_of("[evaluate]\nsplits = nope\n").find("split.nope") != std::string::npos);
    CHECK(error_of("[split.b]\nmode = area\n").find("rect") != std::string::npos);
    CHECK(error_of("[scenario]\nsecond_order_reflections = maybe\n") != "no error");
    CHECK_FALSE(config_schema().empty());
}

TEST_CASE("shipped example config carries the reference scenario") {
    const RunConfig c = load_config(RPP_SOURCE_DIR "/configs/example.cfg");
    CHECK(c.scenario.frequency == 5.64e9);
    CHECK(c.scenario.tx_power == 21.0);
    CHECK(c.scenario.bs_position.z == 14.0);
    CHECK(c.scenario.ms_altitude == 1.0);
    CHECK(c.scenario.max_reflections == 2);
    CHECK(c.scenario.max_diffractions == 3);
    CHECK(c.model.window == 65);
    CHECK(c.augment_n == 3);
    CHECK(c.splits.size() == 3u);
    (void)load_config(RPP_SOURCE_DIR "/configs/desk.cfg");
    (void)load_config(RPP_SOURCE_DIR "/configs/tiny.cfg");
}

TEST_CASE("cmd_simulate on the example config") {
    const RunConfig c = load_config(RPP_SOURCE_DIR "/configs/example.cfg");
    CommandOptions o;
    o.out = test::scratch("example_sim.map");
    (void)cmd_simulate(c, o);
    const RadioMap m = load_radio_map(*o.out);
    const HeightGrid g = load_height_grid(c.paths.grid);
    CHECK(m == simulate_map(g, c.scenario_for(g)));
    const Scenario sc = c.scenario_for(g);
    CHECK(sc.frequency == 5.64e9);
    CHECK(sc.tx_power == 21.0);
    CHECK(sc.bs_position.z == 14.0);
    // re-running is idempotent
    const std::string first = read_all(*o.out);
    (void)cmd_simulate(c, o);
    CHECK(read_all(*o.out) == first);
}

TEST_CASE("heatmap") {
    RadioMap m(4, 3);
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 4; ++c) m.set({c, r}, -75.0);
    }
    for (auto v : heatmap_levels(m)) CHECK(v == 128);
    m.set_unavailable({0, 0});
    m.set({3, 2}, -20.0);
    m.set({2, 2}, -200.0);
    const auto lv = heatmap_levels(m);
    CHECK(lv[2 * 4 + 0] == 0);  // row 0 is the bottom image line
    CHECK(lv[0 * 4 + 3] == 255);
    CHECK(lv[0 * 4 + 2] == 0);

    const auto path = test::scratch("h.pgm");
    write_heatmap(m, path);
    const std::string bytes = read_all(path);
    CHECK(bytes.rfind("P5\n4 3\n255\n", 0) == 0);
    CHECK(bytes.size() == 11u + 12u);

    const auto in = test::scratch("h.map");
    save_radio_map(m, in);
    CommandOptions o;
    o.input = in;
    o.out = test::scratch("h2.pgm");
    (void)cmd_heatmap(nullptr, o);
    CHECK(read_all(*o.out) == bytes);
    o.input.reset();
    CHECK_THROWS_AS(cmd_heatmap(nullptr, o), ConfigError);
}

TEST_CASE("error formatting and exit codes") {
    CHECK(exit_code_for(ConfigError("x")) == 2);
    CHECK(exit_code_for(IoError("x")) == 3);
    CHECK(exit_code_for(NumericError("x")) == 4);
    CHECK(exit_code_for(StageError("measure", "x", 2)) == 2);
    const std::string s = format_error(StageError("split", "bad\nthing", 2));
    CHECK(s.find('\n') == std::string::npos);
    CHECK(s.find("stage=split") != std::string::npos);
    CHECK(format_error(IoError("gone")).find("kind=io code=3") != std::string::npos);
}

TEST_CASE("command line exit codes") {
    const auto run = [](const std::string& args) {
        const std::string cmd = std::string(RPP_CLI) + " " + args + " >/dev/null 2>" + test::scratch("err.txt").string();
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const auto bad = test::scratch("bad.cfg");
    {
        std::ofstream f(bad);
        f << "[scenario]\nfrequncy = 1\n";
    }
    CHECK(run("simulate --config " + bad.string()) == 2);
    const std::string err = read_all(test::scratch("err.txt"));
    CHECK(err.rfind("rpp: error kind=config code=2", 0) == 0);
    CHECK(std::count(err.begin(), err.end(), '\n') == 1);
    CHECK(run("simulate --config " + test::scratch("none.cfg").string()) == 3);
    const auto nogrid = test::scratch("nogrid.cfg");
    {
        std::ofstream f(nogrid);
        f << "[paths]\ngrid = missing.grid\n";
    }
    CHECK(run("simulate --config " + nogrid.string() + " --out " + test::scratch("x.map").string()) == 3);
    CHECK(run("bogus") == 2);
    CHECK(run("schema") == 0);

    const auto map = test::scratch("c.map");
    RadioMap m(2, 2);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) m.set({c, r}, -75.0);
    }
    save_radio_map(m, map);
    CHECK(run("heatmap --input " + map.string() + " --out " + test::scratch("c.pgm").string()) == 0);
    const std::string pgm = read_all(test::scratch("c.pgm"));
    CHECK(pgm == std::string("P5\n2 2\n255\n") + std::string(4, static_cast<char>(128)));
}
