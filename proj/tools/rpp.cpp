#include <cstdio>
#include <functional>
#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <CLI11.hpp>

#include "rpp/cli.hpp"
#include "rpp/error.hpp"

namespace {

struct Common {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    int workers = 0;
    std::string input;
};

void add_common(CLI::App* sub, Common& c, bool config_required) {
    auto* opt = sub->add_option("-c,--config", c.config, "run configuration file");
    if (config_required) opt->required();
    sub->add_option("--seed", c.seed, "override the command's seed");
    sub->add_option("-o,--out", c.out, "output path (evaluate: report base name)");
    sub->add_option("-j,--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Keep large tensor buffers on the heap between training steps.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    CLI::App app{"rpp: received-power prediction toolkit"};
    app.require_subcommand(1);
    auto* schema = app.add_subcommand("schema", "print the configuration schema");

    using Command = std::function<std::string(const rpp::RunConfig&, const rpp::CommandOptions&)>;
    struct Entry {
        const char* name;
        const char* help;
        Command run;
    };
    const std::vector<Entry> entries{
        {"simulate", "ray-trace the simulated radio map", rpp::cmd_simulate},
        {"measure", "draw synthetic measurements from a perturbed environment", rpp::cmd_measure},
        {"pretrain", "pre-train the network on simulated data", rpp::cmd_pretrain},
        {"augment", "write augmented measurement samples", rpp::cmd_augment},
        {"finetune", "fine-tune pre-trained weights on augmented measurements", rpp::cmd_finetune},
        {"predict", "predict the radio map with fine-tuned weights", rpp::cmd_predict},
        {"evaluate", "run the benchmark and write the reports", rpp::cmd_evaluate},
    };
    std::vector<Common> commons(entries.size() + 1);
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        subs.push_back(app.add_subcommand(entries[i].name, entries[i].help));
        add_common(subs.back(), commons[i], true);
    }
    auto* heat = app.add_subcommand("heatmap", "render a radio map as a PGM image");
    Common& hc = commons.back();
    add_common(heat, hc, false);
    heat->add_option("-i,--input", hc.input, "radio map to render");
    auto* city = app.add_subcommand("city", "generate a procedural street-grid height map");
    int city_w = 128, city_h = 128;
    std::uint64_t city_seed = 7;
    std::string city_out;
    city->add_option("--width", city_w, "cells")->check(CLI::PositiveNumber);
    city->add_option("--height", city_h, "cells")->check(CLI::PositiveNumber);
    city->add_option("--seed", city_seed, "layout seed");
    city->add_option("-o,--out", city_out, "height grid file")->required();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (schema->parsed()) {
        std::cout << rpp::config_schema();
        return 0;
    }

    if (city->parsed()) {
        try {
            rpp::save_height_grid(rpp::generate_city(city_w, city_h, city_seed), city_out);
        } catch (const std::exception& e) {
            std::cerr << "rpp: " << rpp::format_error(e) << '\n';
            return rpp::exit_code_for(e);
        }
        std::cout << "city: " << city_w << "x" << city_h << " -> " << city_out << '\n';
        return 0;
    }

    const auto options_of = [](const Common& c, const CLI::App* sub) {
        rpp::CommandOptions o;
        if (sub->count("--seed")) o.seed = c.seed;
        if (!c.out.empty()) o.out = c.out;
        if (sub->count("--workers")) o.workers = c.workers;
        if (!c.input.empty()) o.input = c.input;
        return o;
    };
    try {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (!subs[i]->parsed()) continue;
            const rpp::RunConfig config = rpp::load_config(commons[i].config);
            std::cout << entries[i].run(config, options_of(commons[i], subs[i])) << '\n';
            return 0;
        }
        std::optional<rpp::RunConfig> config;
        if (!hc.config.empty()) config = rpp::load_config(hc.config);
        std::cout << rpp::cmd_heatmap(config ? &*config : nullptr, options_of(hc, heat)) << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "rpp: " << rpp::format_error(e) << '\n';
        return rpp::exit_code_for(e);
    }
}
