#include "rpp/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "rpp/error.hpp"
#include "rpp/random.hpp"

namespace rpp {

namespace {

constexpr char kMagic[4] = {'R', 'P', 'W', 'T'};
constexpr std::uint8_t kVersion = 1;

}  // namespace

void ModelConfig::validate() const {
    if (window < 1 || window % 2 == 0) throw ConfigError("model.window must be odd and positive");
    if (srp_size < 1 || srp_size % 2 == 0) throw ConfigError("model.srp_size must be odd and positive");
    if (wide_channels.empty()) throw ConfigError("model.wide_channels must not be empty");
    if (wide_channels.size() != wide_kernels.size()) {
        throw ConfigError("model.wide_kernels must list one kernel per wide stage");
    }
    for (std::size_t i = 0; i < wide_channels.size(); ++i) {
        if (wide_channels[i] < 1) throw ConfigError("model.wide_channels entries must be positive");
        if (wide_kernels[i] < 1 || wide_kernels[i] % 2 == 0) throw ConfigError("model.wide_kernels must be odd");
    }
    if (local_channels.empty()) throw ConfigError("model.local_channels must not be empty");
    for (int c : local_channels) {
        if (c < 1) throw ConfigError("model.local_channels entries must be positive");
    }
    if (local_kernel < 1 || local_kernel % 2 == 0) throw ConfigError("model.local_kernel must be odd");
    for (int h : head_hidden) {
        if (h < 1) throw ConfigError("model.head_hidden entries must be positive");
    }
    if (wide_output_side() < 1) {
        throw ConfigError("model.window " + std::to_string(window) + " is too small for " +
                          std::to_string(wide_channels.size()) + " pooling stages");
    }
    if (!(norm.distance > 0.0) || !(norm.height > 0.0) || !(norm.power_max > norm.power_min)) {
        throw ConfigError("model normalization constants are invalid");
    }
}

int ModelConfig::wide_output_side() const {
    int side = window;
    for (std::size_t i = 0; i < wide_channels.size(); ++i) side /= 2;
    return side;
}

std::size_t ModelConfig::wide_features() const {
    const auto side = static_cast<std::size_t>(wide_output_side());
    return static_cast<std::size_t>(wide_channels.back()) * side * side;
}

std::size_t ModelConfig::local_features() const {
    return static_cast<std::size_t>(local_channels.back()) * srp_size * srp_size;
}

Model::Model(const ModelConfig& config) : config_(config) {
    config_.validate();
    int in = 3;
    for (std::size_t i = 0; i < config_.wide_channels.size(); ++i) {
        wide_.add(std::make_unique<Conv2dLayer>(in, config_.wide_channels[i], config_.wide_kernels[i]));
        wide_.add(std::make_unique<BatchNormLayer>(config_.wide_channels[i]));
        wide_.add(std::make_unique<ReluLayer>());
        wide_.add(std::make_unique<AvgPool2Layer>());
        in = config_.wide_channels[i];
    }
    in = 1;
    for (int c : config_.local_channels) {
        local_.add(std::make_unique<Conv2dLayer>(in, c, config_.local_kernel));
        local_.add(std::make_unique<BatchNormLayer>(c));
        local_.add(std::make_unique<ReluLayer>());
        in = c;
    }
    int features = static_cast<int>(config_.wide_features() + config_.local_features());
    for (int h : config_.head_hidden) {
        head_.add(std::make_unique<DenseLayer>(features, h));
        if (config_.head_activation == HeadActivation::relu) head_.add(std::make_unique<ReluLayer>());
        features = h;
    }
    head_.add(std::make_unique<DenseLayer>(features, 1));

    const auto w = static_cast<std::size_t>(config_.window);
    const auto s = static_cast<std::size_t>(config_.srp_size);
    wide_out_shape_ = wide_.output_shape({1, 3, w, w});
    local_out_shape_ = local_.output_shape({1, 1, s, s});
}

std::size_t Model::parameter_count() const {
    auto& self = const_cast<Model&>(*this);
    std::size_t n = 0;
    for (const auto& p : self.parameters()) n += p.value->size();
    return n;
}

Tensor Model::forward(const Tensor& wide, const Tensor& srp, Mode mode) {
    const auto w = static_cast<std::size_t>(config_.window);
    const auto s = static_cast<std::size_t>(config_.srp_size);
    if (wide.rank() != 4 || wide.dim(1) != 3 || wide.dim(2) != w || wide.dim(3) != w) {
        throw ShapeError("model: wide input expected [N,3," + std::to_string(w) + "," + std::to_string(w) + "], got " +
                         to_string(wide.shape()));
    }
    if (srp.rank() != 4 || srp.dim(0) != wide.dim(0) || srp.dim(1) != 1 || srp.dim(2) != s || srp.dim(3) != s) {
        throw ShapeError("model: srp input expected [N,1," + std::to_string(s) + "," + std::to_string(s) + "], got " +
                         to_string(srp.shape()));
    }
    const std::size_t n = wide.dim(0);
    const Tensor a = wide_.forward(wide, mode);
    const Tensor b = local_.forward(srp, mode);
    const std::size_t fa = a.size() / n;
    const std::size_t fb = b.size() / n;
    Tensor merged({n, fa + fb});
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(a.data() + i * fa, fa, merged.data() + i * (fa + fb));
        std::copy_n(b.data() + i * fb, fb, merged.data() + i * (fa + fb) + fa);
    }
    return head_.forward(merged, mode);
}

void Model::backward(const Tensor& grad_output) {
    const Tensor g = head_.backward(grad_output, true);
    const std::size_t n = g.dim(0);
    const std::size_t fa = config_.wide_features();
    const std::size_t fb = config_.local_features();
    Shape sa = wide_out_shape_;
    Shape sb = local_out_shape_;
    sa[0] = n;
    sb[0] = n;
    Tensor ga(sa);
    Tensor gb(sb);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(g.data() + i * (fa + fb), fa, ga.data() + i * fa);
        std::copy_n(g.data() + i * (fa + fb) + fa, fb, gb.data() + i * fb);
    }
    wide_.backward(ga, false);
    local_.backward(gb, false);
}

double Model::to_dbm(double y) const {
    const Normalization& n = config_.norm;
    return std::clamp(n.denormalize_power(y), n.power_min - 10.0, n.power_max + 10.0);
}

double Model::predict(const FeatureTensor& features) {
    const FeatureTensor* p = &features;
    return predict(std::span<const FeatureTensor* const>(&p, 1)).front();
}

std::vector<double> Model::predict(std::span<const FeatureTensor* const> features) {
    Dataset data;
    data.rows.reserve(features.size());
    std::vector<std::size_t> idx;
    for (const auto* f : features) {
        idx.push_back(data.rows.size());
        data.rows.push_back({*f, {0, 0}, 0.0});
    }
    const Batch b = make_batch(data, idx, config_.norm);
    const Tensor y = forward(b.wide, b.srp, Mode::infer);
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = to_dbm(y[i]);
    return out;
}

std::vector<ParamRef> Model::parameters() {
    std::vector<ParamRef> out;
    const auto append = [&](Sequential& net, const char* prefix) {
        for (auto p : net.parameters()) {
            p.name = std::string(prefix) + "." + p.name;
            out.push_back(std::move(p));
        }
    };
    append(wide_, "wide");
    append(local_, "local");
    append(head_, "head");
    return out;
}

std::vector<Tensor*> Model::state() {
    std::vector<Tensor*> out;
    for (Sequential* net : {&wide_, &local_, &head_}) {
        for (auto* t : net->state()) out.push_back(t);
    }
    return out;
}

std::vector<std::pair<std::string, LayerSpec>> Model::layer_specs() const {
    std::vector<std::pair<std::string, LayerSpec>> out;
    const auto append = [&](const Sequential& net, const char* prefix) {
        for (std::size_t i = 0; i < net.size(); ++i) {
            out.emplace_back(std::string(prefix) + "." + std::to_string(i), net.layer(i).spec());
        }
    };
    append(wide_, "wide");
    append(local_, "local");
    append(head_, "head");
    return out;
}

Model build_model(const ModelConfig& config) {
    Model model(config);
    Rng rng(derive_seed(config.seed, 0x1417));
    he_uniform_init(model.wide(), rng);
    he_uniform_init(model.local(), rng);
    he_uniform_init(model.head(), rng);
    return model;
}

std::optional<std::string> config_mismatch(const ModelConfig& expected, const ModelConfig& actual) {
    if (expected.window != actual.window) {
        return "wide.0 (conv): window " + std::to_string(expected.window) + " vs " + std::to_string(actual.window);
    }
    if (expected.srp_size != actual.srp_size) {
        return "local.0 (conv): srp size " + std::to_string(expected.srp_size) + " vs " +
               std::to_string(actual.srp_size);
    }
    if (!(expected.norm == actual.norm)) return std::string("normalization constants differ");
    const Model a(expected);
    const Model b(actual);
    const auto sa = a.layer_specs();
    const auto sb = b.layer_specs();
    for (std::size_t i = 0; i < std::min(sa.size(), sb.size()); ++i) {
        if (sa[i].first != sb[i].first || !(sa[i].second == sb[i].second)) {
            return sa[i].first + " (" + to_string(sa[i].second.kind) + ") differs from " + sb[i].first + " (" +
                   to_string(sb[i].second.kind) + ")";
        }
    }
    if (sa.size() != sb.size()) {
        const auto& extra = sa.size() > sb.size() ? sa[sb.size()] : sb[sa.size()];
        return extra.first + " (" + to_string(extra.second.kind) + ") present in only one model";
    }
    return std::nullopt;
}

Batch make_batch(const Dataset& data, std::span<const std::size_t> rows, const Normalization& norm) {
    if (rows.empty()) throw ArgumentError("make_batch: no rows");
    const auto& first = data.rows.at(rows.front()).features;
    const auto w = static_cast<std::size_t>(first.window);
    const auto s = static_cast<std::size_t>(first.srp_size);
    const std::size_t n = rows.size();
    Batch b{Tensor({n, 3, w, w}), Tensor({n, 1, s, s}), Tensor({n, 1})};
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = data.rows.at(rows[i]);
        const auto& f = row.features;
        if (f.wide.size() != 3 * w * w || f.srp.size() != s * s) {
            throw ShapeError("make_batch: rows have mixed feature shapes");
        }
        std::copy(f.wide.begin(), f.wide.end(), b.wide.data() + i * 3 * w * w);
        std::copy(f.srp.begin(), f.srp.end(), b.srp.data() + i * s * s);
        b.target[i] = norm.normalize_power(row.target);
    }
    return b;
}

GradCheckReport model_grad_check(Model& model, const Batch& batch, Mode mode, const GradCheckOptions& options) {
    const auto loss = [&] { return mse_loss(model.forward(batch.wide, batch.srp, mode), batch.target); };
    const auto compute = [&] {
        const Tensor y = model.forward(batch.wide, batch.srp, mode);
        model.backward(mse_loss_backward(y, batch.target));
    };
    const auto params = model.parameters();
    return grad_check(loss, compute, params, options);
}

namespace {

void check_features(const Model& model, const Dataset& data, bool transfer) {
    const auto& c = model.config();
    for (const auto& row : data.rows) {
        if (row.features.window != c.window || row.features.srp_size != c.srp_size) {
            const std::string msg = "wide.0 (conv) expects window " + std::to_string(c.window) + " and srp " +
                                    std::to_string(c.srp_size) + ", dataset has " +
                                    std::to_string(row.features.window) + " and " +
                                    std::to_string(row.features.srp_size);
            if (transfer) throw TransferError(msg);
            throw ShapeError(msg);
        }
    }
}

double subset_loss(Model& model, const Dataset& data, std::span<const std::size_t> rows) {
    constexpr std::size_t chunk = 64;
    double sum = 0.0;
    for (std::size_t start = 0; start < rows.size(); start += chunk) {
        const auto part = rows.subspan(start, std::min(chunk, rows.size() - start));
        const Batch b = make_batch(data, part, model.config().norm);
        const Tensor y = model.forward(b.wide, b.srp, Mode::infer);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - b.target[i];
            sum += d * d;
        }
    }
    return sum / static_cast<double>(rows.size());
}

// Splits `order` into batches; in train mode a trailing batch of one row is
// merged into its predecessor.
std::vector<std::span<const std::size_t>> make_batches(std::span<const std::size_t> order, std::size_t batch,
                                                       bool merge_singletons) {
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch) {
        out.push_back(order.subspan(start, std::min(batch, order.size() - start)));
    }
    if (merge_singletons && out.size() > 1 && out.back().size() == 1) {
        const auto last = out.back();
        out.pop_back();
        out.back() = std::span<const std::size_t>(out.back().data(), out.back().size() + last.size());
    }
    return out;
}

TrainResult train_loop(Model& model, const Dataset& data, const TrainOptions& options, Mode mode,
                       bool use_validation) {
    if (options.batch_size == 0) throw ArgumentError("training: batch size must be positive");
    if (options.epochs < 0) throw ArgumentError("training: epochs must be non-negative");
    if (!(options.learning_rate > 0.0)) throw ArgumentError("training: learning rate must be positive");

    std::vector<std::size_t> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<std::size_t> train = all;
    std::vector<std::size_t> validation;
    if (use_validation && options.validation_fraction > 0.0) {
        if (options.validation_fraction >= 1.0) throw ArgumentError("training: validation fraction must be < 1");
        Rng split_rng(derive_seed(options.seed, 0x5917));
        split_rng.shuffle(std::span<std::size_t>(all));
        const auto n_val = static_cast<std::size_t>(std::llround(options.validation_fraction * all.size()));
        if (n_val >= 1 && n_val < all.size()) {
            validation.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
            train.assign(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
            std::sort(validation.begin(), validation.end());
            std::sort(train.begin(), train.end());
        }
    }
    if (mode == Mode::train && train.size() < 2) {
        throw ArgumentError("training: batch statistics need at least 2 training rows");
    }

    TrainResult result;
    OptimizerState opt;
    opt.config.learning_rate = options.learning_rate;
    Rng rng(derive_seed(options.seed, 0x0de1));
    std::optional<Model> best;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int epoch = 1; epoch <= options.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(train));
        double weighted = 0.0;
        for (const auto rows : make_batches(train, options.batch_size, mode == Mode::train)) {
            const Batch b = make_batch(data, rows, model.config().norm);
            const Tensor y = model.forward(b.wide, b.srp, mode);
            const Tensor target = b.target;
            weighted += mse_loss(y, target) * static_cast<double>(rows.size());
            model.backward(mse_loss_backward(y, target));
            nadam_step(model.parameters(), opt);
            ++result.steps;
        }
        EpochStats stats{epoch, weighted / static_cast<double>(train.size()),
                         std::numeric_limits<double>::quiet_NaN()};
        result.train_loss.push_back(stats.train_loss);
        if (!validation.empty()) {
            stats.validation_loss = subset_loss(model, data, validation);
            result.validation_loss.push_back(stats.validation_loss);
            if (stats.validation_loss < best_loss) {
                best_loss = stats.validation_loss;
                best = model;
                result.best_epoch = epoch;
            }
        }
        if (!std::isfinite(stats.train_loss)) throw NumericError("training diverged at epoch " + std::to_string(epoch));
        if (options.on_epoch) options.on_epoch(stats);
    }
    if (best) model = std::move(*best);
    return result;
}

}  // namespace

TrainResult pretrain(Model& model, const Dataset& data, const TrainOptions& options) {
    if (data.empty()) throw ArgumentError("pretrain: empty dataset");
    check_features(model, data, false);
    return train_loop(model, data, options, Mode::train, true);
}

TrainResult finetune(Model& model, const Dataset& data, const TrainOptions& options) {
    if (data.empty()) throw ArgumentError("finetune: empty dataset");
    check_features(model, data, true);
    return train_loop(model, data, options, Mode::infer, data.size() >= 40);
}

double evaluate_loss(Model& model, const Dataset& data) {
    if (data.empty()) throw ArgumentError("evaluate_loss: empty dataset");
    std::vector<std::size_t> rows(data.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return subset_loss(model, data, rows);
}

RadioMap predict_map(const Model& model, const HeightGrid& grid, const Scenario& scenario, const RadioMap& sim_map,
                     int workers) {
    if (!sim_map.same_shape(RadioMap::like(grid))) throw ShapeError("predict_map: radio map does not match grid");
    if (workers < 1) throw ArgumentError("predict_map: workers must be >= 1");
    std::vector<GridIndex> cells;
    for (int r = 0; r < grid.height(); ++r) {
        for (int c = 0; c < grid.width(); ++c) {
            if (sim_map.available({c, r})) cells.push_back({c, r});
        }
    }
    constexpr std::size_t chunk = 64;
    const std::size_t chunks = (cells.size() + chunk - 1) / chunk;
    std::vector<double> values(cells.size());
    const auto run = [&](std::size_t first) {
        Model local = model;
        const auto& c = local.config();
        for (std::size_t k = first; k < chunks; k += static_cast<std::size_t>(workers)) {
            const std::size_t begin = k * chunk;
            const std::size_t end = std::min(cells.size(), begin + chunk);
            std::vector<FeatureTensor> feats;
            feats.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                feats.push_back(make_features(grid, scenario, sim_map, cells[i], c.window, c.srp_size, c.norm));
            }
            std::vector<const FeatureTensor*> ptrs;
            for (const auto& f : feats) ptrs.push_back(&f);
            const auto out = local.predict(ptrs);
            std::copy(out.begin(), out.end(), values.begin() + static_cast<std::ptrdiff_t>(begin));
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(run, static_cast<std::size_t>(w));
    }
    RadioMap out = RadioMap::like(grid);
    for (std::size_t i = 0; i < cells.size(); ++i) out.set(cells[i], values[i]);
    return out;
}

// ---- weights file ---------------------------------------------------------

namespace {

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out_.insert(out_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void ints(const std::vector<int>& v) {
        u32(static_cast<std::uint32_t>(v.size()));
        for (int x : v) i32(x);
    }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) throw LoadError(LoadError::Kind::truncated, "weights file is truncated");
    }
    std::uint8_t u8() {
        need(1);
        return in_[pos_++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in_[pos_++]) << (8 * i);
        return v;
    }
    int i32() { return static_cast<int>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::vector<int> ints() {
        const std::uint32_t n = u32();
        if (n > 4096) throw LoadError(LoadError::Kind::shape_mismatch, "weights file: implausible layer list");
        std::vector<int> v(n);
        for (auto& x : v) x = i32();
        return v;
    }
    bool done() const { return pos_ == in_.size(); }
    std::size_t pos() const { return pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

// Layer-by-layer tensor lists in file order.
std::vector<std::pair<LayerKind, std::vector<Tensor*>>> layer_state(Model& model) {
    std::vector<std::pair<LayerKind, std::vector<Tensor*>>> out;
    for (Sequential* net : {&model.wide(), &model.local(), &model.head()}) {
        for (std::size_t i = 0; i < net->size(); ++i) {
            Layer& l = net->layer(i);
            out.emplace_back(l.kind(), l.state());
        }
    }
    return out;
}

}  // namespace

std::vector<std::uint8_t> serialize_weights(Model& model) {
    const ModelConfig& c = model.config();
    Writer w;
    w.bytes(kMagic, 4);
    w.u8(kVersion);
    w.i32(c.window);
    w.i32(c.srp_size);
    w.ints(c.wide_channels);
    w.ints(c.wide_kernels);
    w.ints(c.local_channels);
    w.i32(c.local_kernel);
    w.ints(c.head_hidden);
    w.u8(static_cast<std::uint8_t>(c.head_activation));
    w.f64(c.norm.distance);
    w.f64(c.norm.height);
    w.f64(c.norm.power_min);
    w.f64(c.norm.power_max);
    w.u64(c.seed);
    const auto layers = layer_state(model);
    w.u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& [kind, tensors] : layers) {
        w.u8(static_cast<std::uint8_t>(kind));
        w.u32(static_cast<std::uint32_t>(tensors.size()));
        for (const Tensor* t : tensors) {
            w.u32(static_cast<std::uint32_t>(t->rank()));
            for (std::size_t d : t->shape()) w.u64(d);
            for (double v : t->values()) w.f64(v);
        }
    }
    return w.take();
}

Model deserialize_weights(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw LoadError(LoadError::Kind::bad_magic, "not a weights file");
    for (int i = 0; i < 4; ++i) r.u8();
    const std::uint8_t version = r.u8();
    if (version != kVersion) {
        throw LoadError(LoadError::Kind::bad_version, "unsupported weights version " + std::to_string(version));
    }
    ModelConfig c;
    c.window = r.i32();
    c.srp_size = r.i32();
    c.wide_channels = r.ints();
    c.wide_kernels = r.ints();
    c.local_channels = r.ints();
    c.local_kernel = r.i32();
    c.head_hidden = r.ints();
    const std::uint8_t act = r.u8();
    if (act > 1) throw LoadError(LoadError::Kind::shape_mismatch, "weights file: unknown head activation");
    c.head_activation = static_cast<HeadActivation>(act);
    c.norm.distance = r.f64();
    c.norm.height = r.f64();
    c.norm.power_min = r.f64();
    c.norm.power_max = r.f64();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw LoadError(LoadError::Kind::shape_mismatch, std::string("weights file: ") + e.what());
    }

    Model model(c);
    const auto layers = layer_state(model);
    const std::uint32_t count = r.u32();
    if (count != layers.size()) {
        throw LoadError(LoadError::Kind::shape_mismatch, "weights file: expected " + std::to_string(layers.size()) +
                                                             " layers, found " + std::to_string(count));
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& [kind, tensors] = layers[i];
        const std::string where = "weights file layer " + std::to_string(i) + ": ";
        const std::uint8_t tag = r.u8();
        if (tag != static_cast<std::uint8_t>(kind)) {
            throw LoadError(LoadError::Kind::shape_mismatch, where + "expected " + to_string(kind));
        }
        const std::uint32_t n = r.u32();
        if (n != tensors.size()) throw LoadError(LoadError::Kind::shape_mismatch, where + "wrong tensor count");
        for (Tensor* t : tensors) {
            const std::uint32_t rank = r.u32();
            if (rank != t->rank()) throw LoadError(LoadError::Kind::shape_mismatch, where + "wrong tensor rank");
            Shape shape(rank);
            for (auto& d : shape) d = r.u64();
            if (shape != t->shape()) {
                throw LoadError(LoadError::Kind::shape_mismatch,
                                where + "expected " + to_string(t->shape()) + ", found " + to_string(shape));
            }
            r.need(8 * t->size());
            for (double& v : t->values()) v = r.f64();
        }
    }
    if (!r.done()) throw LoadError(LoadError::Kind::shape_mismatch, "weights file has trailing bytes");
    return model;
}

void save_weights(Model& model, const std::filesystem::path& path) {
    const auto bytes = serialize_weights(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

Model load_weights(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_weights(bytes);
}

Model load_weights(const std::filesystem::path& path, const ModelConfig& expected) {
    Model model = load_weights(path);
    if (auto diff = config_mismatch(expected, model.config())) throw TransferError("weights do not fit: " + *diff);
    return model;
}

}  // namespace rpp
