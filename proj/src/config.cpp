#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rpp/cli.hpp"
#include "rpp/error.hpp"

namespace rpp {

namespace {

enum class Kind { integer, unsigned_int, real, boolean, text, path, int_list, seed_list, name_list, rect, head, mode };

struct KeySpec {
    const char* key;
    Kind kind;
    const char* help;
};

struct SectionSpec {
    const char* name;  // "split" matches split.<name>
    std::vector<KeySpec> keys;
};

const std::vector<SectionSpec>& schema() {
    static const std::vector<SectionSpec> s{
        {"paths",
         {{"grid", Kind::path, "height grid file"},
          {"sim_map", Kind::path, "simulated radio map"},
          {"truth_map", Kind::path, "synthetic ground-truth radio map"},
          {"measurements", Kind::path, "measured samples"},
          {"augmented", Kind::path, "augmented samples"},
          {"weights", Kind::path, "pre-trained weights"},
          {"finetuned", Kind::path, "fine-tuned weights"},
          {"prediction", Kind::path, "predicted radio map"},
          {"report", Kind::path, "report base name (.tsv and .kv are appended)"},
          {"heatmap", Kind::path, "grey-level image"}}},
        {"scenario",
         {{"frequency", Kind::real, "Hz"},
          {"tx_power", Kind::real, "dBm"},
          {"bs_x", Kind::real, "m, default grid centre"},
          {"bs_y", Kind::real, "m, default grid centre"},
          {"bs_altitude", Kind::real, "m"},
          {"ms_altitude", Kind::real, "m"},
          {"max_reflections", Kind::integer, "count"},
          {"max_diffractions", Kind::integer, "count"},
          {"second_order_reflections", Kind::boolean, "true|false"},
          {"wall_loss", Kind::real, "dB per bounce"},
          {"blockage_penalty", Kind::real, "dB per obstruction past max_diffractions"}}},
        {"model",
         {{"window", Kind::integer, "odd"},
          {"srp_size", Kind::integer, "odd"},
          {"wide_channels", Kind::int_list, "one per wide stage"},
          {"wide_kernels", Kind::int_list, "odd, one per wide stage"},
          {"local_channels", Kind::int_list, "one per local stage"},
          {"local_kernel", Kind::integer, "odd"},
          {"head_hidden", Kind::int_list, "hidden dense units, or none"},
          {"head", Kind::head, "relu|linear"},
          {"seed", Kind::unsigned_int, "weight initialisation"},
          {"mask_srp_center", Kind::boolean, "mask the SRP centre during pre-training"}}},
        {"pretrain",
         {{"epochs", Kind::integer, ""},
          {"batch_size", Kind::integer, ""},
          {"learning_rate", Kind::real, ""},
          {"validation_fraction", Kind::real, "[0, 1)"},
          {"samples", Kind::integer, "simulated cells"},
          {"seed", Kind::unsigned_int, ""}}},
        {"finetune",
         {{"epochs", Kind::integer, ""},
          {"batch_size", Kind::integer, ""},
          {"learning_rate", Kind::real, ""},
          {"validation_fraction", Kind::real, "[0, 1), used from 40 rows"},
          {"seed", Kind::unsigned_int, ""}}},
        {"scratch",
         {{"epochs", Kind::integer, ""},
          {"batch_size", Kind::integer, ""},
          {"learning_rate", Kind::real, ""},
          {"seed", Kind::unsigned_int, ""}}},
        {"augment", {{"n", Kind::integer, "odd block size"}}},
        {"perturbation",
         {{"seed", Kind::unsigned_int, ""},
          {"height_noise_sd", Kind::real, "m"},
          {"shadowing_sd", Kind::real, "dB"},
          {"correlation_length", Kind::real, "m"},
          {"offset", Kind::real, "dB"}}},
        {"measure",
         {{"count", Kind::integer, ""},
          {"sensitivity", Kind::real, "dBm"},
          {"seed", Kind::unsigned_int, ""}}},
        {"evaluate",
         {{"seeds", Kind::seed_list, "comma separated"},
          {"splits", Kind::name_list, "split section names, default all"},
          {"compare_augmentation", Kind::boolean, ""},
          {"reuse_weights", Kind::boolean, "start from paths.weights"}}},
        {"split",
         {{"mode", Kind::mode, "random|area"},
          {"ratio", Kind::real, "training share, random mode"},
          {"rect", Kind::rect, "col0,row0,col1,row1 (end exclusive), area mode"}}},
        {"run", {{"workers", Kind::integer, ">= 1"}}},
    };
    return s;
}

const char* kind_name(Kind k) {
    switch (k) {
        case Kind::integer: return "integer";
        case Kind::unsigned_int: return "unsigned";
        case Kind::real: return "real";
        case Kind::boolean: return "bool";
        case Kind::text: return "text";
        case Kind::path: return "path";
        case Kind::int_list: return "int-list";
        case Kind::seed_list: return "seed-list";
        case Kind::name_list: return "name-list";
        case Kind::rect: return "rect";
        case Kind::head: return "relu|linear";
        case Kind::mode: return "random|area";
    }
    return "?";
}

std::string trim(std::string_view s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

struct Entry {
    std::string value;
    int line = 0;
};

struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, Entry> keys;
};

class Parsed {
public:
    Parsed(std::string source, std::vector<Section> sections) : source_(std::move(source)), sections_(std::move(sections)) {}

    [[noreturn]] void fail(int line, const std::string& what) const {
        throw ConfigError(source_ + ":" + std::to_string(line) + ": " + what);
    }

    const Section* find(const std::string& name) const {
        for (const auto& s : sections_) {
            if (s.name == name) return &s;
        }
        return nullptr;
    }
    const std::vector<Section>& sections() const { return sections_; }

    template <typename T>
    void get(const Section* s, const char* key, T& out) const {
        if (!s) return;
        const auto it = s->keys.find(key);
        if (it == s->keys.end()) return;
        convert(it->second, s->name + "." + key, out);
    }
    template <typename T>
    void get(const char* section, const char* key, T& out) const {
        get(find(section), key, out);
    }

    void convert(const Entry& e, const std::string& name, long long& out) const {
        const char* b = e.value.data();
        const char* end = b + e.value.size();
        const auto r = std::from_chars(b, end, out);
        if (r.ec != std::errc() || r.ptr != end) fail(e.line, name + ": expected an integer, got '" + e.value + "'");
    }
    void convert(const Entry& e, const std::string& name, int& out) const {
        long long v = 0;
        convert(e, name, v);
        if (v < -(1LL << 31) || v >= (1LL << 31)) fail(e.line, name + ": integer out of range");
        out = static_cast<int>(v);
    }
    void convert(const Entry& e, const std::string& name, std::uint64_t& out) const {
        const char* b = e.value.data();
        const char* end = b + e.value.size();
        const auto r = std::from_chars(b, end, out);
        if (r.ec != std::errc() || r.ptr != end) {
            fail(e.line, name + ": expected an unsigned integer, got '" + e.value + "'");
        }
    }
    void convert(const Entry& e, const std::string& name, double& out) const {
        const char* b = e.value.data();
        const char* end = b + e.value.size();
        const auto r = std::from_chars(b, end, out);
        if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out)) {
            fail(e.line, name + ": expected a finite number, got '" + e.value + "'");
        }
    }
    void convert(const Entry& e, const std::string& name, std::optional<double>& out) const {
        double v = 0.0;
        convert(e, name, v);
        out = v;
    }
    void convert(const Entry& e, const std::string& name, bool& out) const {
        if (e.value == "true" || e.value == "yes" || e.value == "1") {
            out = true;
        } else if (e.value == "false" || e.value == "no" || e.value == "0") {
            out = false;
        } else {
            fail(e.line, name + ": expected true or false, got '" + e.value + "'");
        }
    }
    void convert(const Entry& e, const std::string&, std::string& out) const { out = e.value; }
    void convert(const Entry& e, const std::string& name, std::vector<int>& out) const {
        out.clear();
        if (e.value == "none" || e.value.empty()) return;
        for (const auto& part : split_list(e)) {
            int v = 0;
            convert(Entry{part, e.line}, name, v);
            out.push_back(v);
        }
    }
    void convert(const Entry& e, const std::string& name, std::vector<std::uint64_t>& out) const {
        out.clear();
        for (const auto& part : split_list(e)) {
            std::uint64_t v = 0;
            convert(Entry{part, e.line}, name, v);
            out.push_back(v);
        }
        if (out.empty()) fail(e.line, name + ": list must not be empty");
    }
    void convert(const Entry& e, const std::string&, std::vector<std::string>& out) const { out = split_list(e); }

    std::vector<std::string> split_list(const Entry& e) const {
        std::vector<std::string> out;
        std::stringstream ss(e.value);
        std::string part;
        while (std::getline(ss, part, ',')) {
            part = trim(part);
            if (part.empty()) fail(e.line, "empty list element in '" + e.value + "'");
            out.push_back(part);
        }
        return out;
    }

private:
    std::string source_;
    std::vector<Section> sections_;
};

const SectionSpec* section_spec(const std::string& name) {
    const std::string base = name.rfind("split.", 0) == 0 ? "split" : name;
    if (base == "split" && name.size() <= 6) return nullptr;
    for (const auto& s : schema()) {
        if (base == s.name) return &s;
    }
    return nullptr;
}

}  // namespace

std::string config_schema() {
    std::string out;
    for (const auto& s : schema()) {
        for (const auto& k : s.keys) {
            out += std::string("[") + (std::string(s.name) == "split" ? "split.<name>" : s.name) + "] " + k.key + " " +
                   kind_name(k.kind);
            if (*k.help) out += "  # " + std::string(k.help);
            out += '\n';
        }
    }
    return out;
}

RunConfig parse_config(std::istream& in, const std::string& source, const std::filesystem::path& base_dir) {
    std::vector<Section> sections;
    std::string line;
    int number = 0;
    const auto fail = [&](const std::string& what) { throw ConfigError(source + ":" + std::to_string(number) + ": " + what); };
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail("malformed section header '" + t + "'");
            const std::string name = trim(std::string_view(t).substr(1, t.size() - 2));
            if (!section_spec(name)) fail("unknown section [" + name + "]");
            for (const auto& s : sections) {
                if (s.name == name) fail("duplicate section [" + name + "]");
            }
            sections.push_back({name, number, {}});
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) fail("expected 'key = value', got '" + t + "'");
        if (sections.empty()) fail("key outside of any section");
        const std::string key = trim(std::string_view(t).substr(0, eq));
        const std::string value = trim(std::string_view(t).substr(eq + 1));
        Section& sec = sections.back();
        const SectionSpec* spec = section_spec(sec.name);
        const bool known = std::any_of(spec->keys.begin(), spec->keys.end(),
                                       [&](const KeySpec& k) { return key == k.key; });
        if (!known) fail("unknown key '" + key + "' in [" + sec.name + "]");
        if (!sec.keys.emplace(key, Entry{value, number}).second) fail("duplicate key '" + key + "'");
    }

    const Parsed p(source, std::move(sections));
    RunConfig c;

    const auto path_key = [&](const char* key, std::filesystem::path& out) {
        std::string v;
        p.get("paths", key, v);
        if (v.empty()) return;
        std::filesystem::path path(v);
        out = path.is_absolute() ? path : base_dir / path;
    };
    path_key("grid", c.paths.grid);
    path_key("sim_map", c.paths.sim_map);
    path_key("truth_map", c.paths.truth_map);
    path_key("measurements", c.paths.measurements);
    path_key("augmented", c.paths.augmented);
    path_key("weights", c.paths.weights);
    path_key("finetuned", c.paths.finetuned);
    path_key("prediction", c.paths.prediction);
    path_key("report", c.paths.report);
    path_key("heatmap", c.paths.heatmap);

    p.get("scenario", "frequency", c.scenario.frequency);
    p.get("scenario", "tx_power", c.scenario.tx_power);
    p.get("scenario", "bs_x", c.bs_x);
    p.get("scenario", "bs_y", c.bs_y);
    p.get("scenario", "bs_altitude", c.scenario.bs_position.z);
    p.get("scenario", "ms_altitude", c.scenario.ms_altitude);
    p.get("scenario", "max_reflections", c.scenario.max_reflections);
    p.get("scenario", "max_diffractions", c.scenario.max_diffractions);
    p.get("scenario", "second_order_reflections", c.scenario.second_order_reflections);
    p.get("scenario", "wall_loss", c.scenario.wall_loss);
    p.get("scenario", "blockage_penalty", c.scenario.blockage_penalty);

    p.get("model", "window", c.model.window);
    p.get("model", "srp_size", c.model.srp_size);
    p.get("model", "wide_channels", c.model.wide_channels);
    p.get("model", "wide_kernels", c.model.wide_kernels);
    p.get("model", "local_channels", c.model.local_channels);
    p.get("model", "local_kernel", c.model.local_kernel);
    p.get("model", "head_hidden", c.model.head_hidden);
    std::string head;
    p.get("model", "head", head);
    if (!head.empty()) {
        if (head == "relu") {
            c.model.head_activation = HeadActivation::relu;
        } else if (head == "linear") {
            c.model.head_activation = HeadActivation::linear;
        } else {
            p.fail(p.find("model")->keys.at("head").line, "model.head: expected relu or linear, got '" + head + "'");
        }
    }
    p.get("model", "seed", c.model.seed);
    p.get("model", "mask_srp_center", c.mask_srp_center);

    const auto train_keys = [&](const char* section, TrainOptions& o) {
        p.get(section, "epochs", o.epochs);
        p.get(section, "batch_size", o.batch_size);
        p.get(section, "learning_rate", o.learning_rate);
        p.get(section, "seed", o.seed);
    };
    train_keys("pretrain", c.pretrain);
    p.get("pretrain", "validation_fraction", c.pretrain.validation_fraction);
    p.get("pretrain", "samples", c.pretrain_samples);
    train_keys("finetune", c.finetune);
    p.get("finetune", "validation_fraction", c.finetune.validation_fraction);
    train_keys("scratch", c.scratch);
    c.scratch.validation_fraction = 0.0;

    p.get("augment", "n", c.augment_n);

    p.get("perturbation", "seed", c.perturbation.seed);
    p.get("perturbation", "height_noise_sd", c.perturbation.height_noise_sd);
    p.get("perturbation", "shadowing_sd", c.perturbation.shadowing_sd);
    p.get("perturbation", "correlation_length", c.perturbation.shadowing_correlation_length);
    p.get("perturbation", "offset", c.perturbation.global_offset);

    p.get("measure", "count", c.measurement_count);
    p.get("measure", "sensitivity", c.sensitivity);
    p.get("measure", "seed", c.measure_seed);

    p.get("evaluate", "seeds", c.eval_seeds);
    p.get("evaluate", "compare_augmentation", c.compare_augmentation);
    p.get("evaluate", "reuse_weights", c.reuse_weights);
    p.get("run", "workers", c.workers);

    std::vector<SplitSpec> splits;
    std::vector<int> split_lines;
    for (const auto& s : p.sections()) {
        if (s.name.rfind("split.", 0) != 0) continue;
        SplitSpec spec;
        spec.name = s.name.substr(6);
        std::string mode = "random";
        p.get(&s, "mode", mode);
        if (mode == "random") {
            spec.mode = SplitSpec::Mode::random;
        } else if (mode == "area") {
            spec.mode = SplitSpec::Mode::area;
        } else {
            p.fail(s.keys.at("mode").line, s.name + ".mode: expected random or area, got '" + mode + "'");
        }
        p.get(&s, "ratio", spec.ratio);
        if (const auto it = s.keys.find("rect"); it != s.keys.end()) {
            std::vector<int> r;
            p.convert(it->second, s.name + ".rect", r);
            if (r.size() != 4) p.fail(it->second.line, s.name + ".rect: expected col0,row0,col1,row1");
            spec.rect = {r[0], r[1], r[2], r[3]};
        } else if (spec.mode == SplitSpec::Mode::area) {
            p.fail(s.line, s.name + ": area mode needs rect");
        }
        try {
            spec.validate();
        } catch (const ConfigError& e) {
            p.fail(s.line, e.what());
        }
        splits.push_back(spec);
        split_lines.push_back(s.line);
    }
    std::vector<std::string> names;
    p.get("evaluate", "splits", names);
    if (!names.empty()) {
        std::vector<SplitSpec> chosen;
        for (const auto& n : names) {
            const auto it = std::find_if(splits.begin(), splits.end(), [&](const SplitSpec& s) { return s.name == n; });
            if (it == splits.end()) {
                p.fail(p.find("evaluate")->keys.at("splits").line, "evaluate.splits: no section [split." + n + "]");
            }
            chosen.push_back(*it);
        }
        splits = std::move(chosen);
    }
    if (!splits.empty()) c.splits = std::move(splits);

    // Range checks that belong to the schema rather than to a command.
    const auto check = [&](bool ok, const char* section, const char* key, const std::string& what) {
        if (ok) return;
        const Section* s = p.find(section);
        int line = s ? s->line : 0;
        if (s) {
            if (const auto it = s->keys.find(key); it != s->keys.end()) line = it->second.line;
        }
        p.fail(line, std::string(section) + "." + key + ": " + what);
    };
    check(c.augment_n >= 1 && c.augment_n % 2 == 1, "augment", "n", "must be odd and positive");
    check(c.workers >= 1, "run", "workers", "must be >= 1");
    check(c.measurement_count >= 1, "measure", "count", "must be positive");
    check(c.pretrain.epochs >= 0, "pretrain", "epochs", "must be non-negative");
    check(c.finetune.epochs >= 0, "finetune", "epochs", "must be non-negative");
    check(c.scratch.epochs >= 0, "scratch", "epochs", "must be non-negative");
    check(c.pretrain.batch_size >= 1, "pretrain", "batch_size", "must be positive");
    check(c.finetune.batch_size >= 1, "finetune", "batch_size", "must be positive");
    check(c.scratch.batch_size >= 1, "scratch", "batch_size", "must be positive");
    check(c.pretrain.learning_rate > 0.0, "pretrain", "learning_rate", "must be positive");
    check(c.finetune.learning_rate > 0.0, "finetune", "learning_rate", "must be positive");
    check(c.scratch.learning_rate > 0.0, "scratch", "learning_rate", "must be positive");
    check(c.pretrain.validation_fraction >= 0.0 && c.pretrain.validation_fraction < 1.0, "pretrain",
          "validation_fraction", "must be in [0, 1)");
    check(c.finetune.validation_fraction >= 0.0 && c.finetune.validation_fraction < 1.0, "finetune",
          "validation_fraction", "must be in [0, 1)");
    try {
        c.model.validate();
    } catch (const ConfigError& e) {
        const Section* s = p.find("model");
        p.fail(s ? s->line : 0, e.what());
    }
    try {
        Scenario probe = c.scenario;
        probe.validate();
        c.perturbation.validate();
    } catch (const Error& e) {
        p.fail(0, e.what());
    }
    return c;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    return parse_config(in, path.string(), path.parent_path());
}

Scenario RunConfig::scenario_for(const HeightGrid& grid) const {
    Scenario s = scenario;
    const Scenario centre = default_scenario(grid);
    s.bs_position.x = bs_x.value_or(centre.bs_position.x);
    s.bs_position.y = bs_y.value_or(centre.bs_position.y);
    s.validate();
    return s;
}

BenchmarkConfig RunConfig::benchmark(const HeightGrid& grid) const {
    BenchmarkConfig b;
    b.scenario = scenario_for(grid);
    b.perturbation = perturbation;
    b.measurement_count = measurement_count;
    b.sensitivity = sensitivity;
    b.splits = splits;
    b.augment_n = augment_n;
    b.seeds = eval_seeds;
    b.model = model;
    b.pretrain_samples = pretrain_samples;
    b.mask_srp_center = mask_srp_center;
    b.pretrain = pretrain;
    b.finetune = finetune;
    b.scratch = scratch;
    b.compare_augmentation = compare_augmentation;
    b.workers = workers;
    return b;
}

}  // namespace rpp
