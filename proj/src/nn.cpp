#include "rpp/nn.hpp"

#include <algorithm>
#include <cmath>

#include "rpp/error.hpp"

namespace rpp {

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv: return "conv";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::relu: return "relu";
        case LayerKind::avgpool: return "avgpool";
        case LayerKind::dense: return "dense";
        case LayerKind::concat: return "concat";
    }
    return "unknown";
}

Conv2dLayer::Conv2dLayer(int in_channels, int out_channels, int kernel) {
    if (in_channels < 1 || out_channels < 1 || kernel < 1 || kernel % 2 == 0) {
        throw ArgumentError("conv layer needs positive channels and an odd kernel");
    }
    const auto k = static_cast<std::size_t>(kernel);
    weight_ = Tensor({static_cast<std::size_t>(out_channels), static_cast<std::size_t>(in_channels), k, k});
    bias_ = Tensor({static_cast<std::size_t>(out_channels)});
    grad_weight_ = Tensor(weight_.shape());
    grad_bias_ = Tensor(bias_.shape());
}

LayerSpec Conv2dLayer::spec() const {
    return {LayerKind::conv, static_cast<int>(weight_.dim(0)), static_cast<int>(weight_.dim(2)), 0};
}

Shape Conv2dLayer::output_shape(const Shape& input) const {
    if (input.size() != 4 || input[1] != weight_.dim(1)) {
        throw ShapeError("conv layer: expected [N," + std::to_string(weight_.dim(1)) + ",H,W], got " + to_string(input));
    }
    return {input[0], weight_.dim(0), input[2], input[3]};
}

Tensor Conv2dLayer::forward(const Tensor& input, Mode) {
    input_ = input;
    return conv2d(input, weight_, bias_);
}

Tensor Conv2dLayer::backward(const Tensor& grad_output, bool want_input_grad) {
    auto g = conv2d_backward(input_, weight_, grad_output, want_input_grad);
    grad_weight_ = std::move(g.kernels);
    grad_bias_ = std::move(g.bias);
    return std::move(g.input);
}

std::vector<ParamRef> Conv2dLayer::parameters() {
    return {{&weight_, &grad_weight_, "conv.weight"}, {&bias_, &grad_bias_, "conv.bias"}};
}

BatchNormLayer::BatchNormLayer(int channels) {
    if (channels < 1) throw ArgumentError("batchnorm layer needs positive channels");
    const Shape s{static_cast<std::size_t>(channels)};
    gamma_ = Tensor(s, 1.0);
    beta_ = Tensor(s, 0.0);
    grad_gamma_ = Tensor(s);
    grad_beta_ = Tensor(s);
    stats_.running_mean = Tensor(s, 0.0);
    stats_.running_var = Tensor(s, 1.0);
}

Tensor BatchNormLayer::forward(const Tensor& input, Mode mode) {
    return batchnorm(input, gamma_, beta_, stats_, mode, &cache_);
}

Tensor BatchNormLayer::backward(const Tensor& grad_output, bool) {
    auto g = batchnorm_backward(cache_, gamma_, grad_output);
    grad_gamma_ = std::move(g.gamma);
    grad_beta_ = std::move(g.beta);
    return std::move(g.input);
}

std::vector<ParamRef> BatchNormLayer::parameters() {
    return {{&gamma_, &grad_gamma_, "batchnorm.gamma"}, {&beta_, &grad_beta_, "batchnorm.beta"}};
}

Tensor ReluLayer::forward(const Tensor& input, Mode) {
    input_ = input;
    return relu(input);
}

Tensor ReluLayer::backward(const Tensor& grad_output, bool) { return relu_backward(input_, grad_output); }

Shape AvgPool2Layer::output_shape(const Shape& input) const {
    if (input.size() < 2) throw ShapeError("avgpool layer: rank must be >= 2");
    Shape out = input;
    out[out.size() - 2] /= 2;
    out[out.size() - 1] /= 2;
    if (out[out.size() - 2] == 0 || out[out.size() - 1] == 0) throw ShapeError("avgpool layer: input too small");
    return out;
}

Tensor AvgPool2Layer::forward(const Tensor& input, Mode) {
    input_shape_ = input.shape();
    return avgpool2(input);
}

Tensor AvgPool2Layer::backward(const Tensor& grad_output, bool) {
    return avgpool2_backward(input_shape_, grad_output);
}

DenseLayer::DenseLayer(int in_features, int out_features) {
    if (in_features < 1 || out_features < 1) throw ArgumentError("dense layer needs positive sizes");
    weight_ = Tensor({static_cast<std::size_t>(out_features), static_cast<std::size_t>(in_features)});
    bias_ = Tensor({static_cast<std::size_t>(out_features)});
    grad_weight_ = Tensor(weight_.shape());
    grad_bias_ = Tensor(bias_.shape());
}

Shape DenseLayer::output_shape(const Shape& input) const {
    if (input.size() != 2 || input[1] != weight_.dim(1)) {
        throw ShapeError("dense layer: expected [N," + std::to_string(weight_.dim(1)) + "], got " + to_string(input));
    }
    return {input[0], weight_.dim(0)};
}

Tensor DenseLayer::forward(const Tensor& input, Mode) {
    input_ = input;
    return dense(input, weight_, bias_);
}

Tensor DenseLayer::backward(const Tensor& grad_output, bool want_input_grad) {
    auto g = dense_backward(input_, weight_, grad_output, want_input_grad);
    grad_weight_ = std::move(g.weights);
    grad_bias_ = std::move(g.bias);
    return std::move(g.input);
}

std::vector<ParamRef> DenseLayer::parameters() {
    return {{&weight_, &grad_weight_, "dense.weight"}, {&bias_, &grad_bias_, "dense.bias"}};
}

Sequential::Sequential(const Sequential& other) {
    layers_.reserve(other.layers_.size());
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
    if (this != &other) {
        Sequential copy(other);
        *this = std::move(copy);
    }
    return *this;
}

Shape Sequential::output_shape(Shape input) const {
    for (const auto& l : layers_) input = l->output_shape(input);
    return input;
}

Tensor Sequential::forward(const Tensor& input, Mode mode) {
    Tensor x = input;
    for (auto& l : layers_) x = l->forward(x, mode);
    return x;
}

Tensor Sequential::backward(const Tensor& grad_output, bool want_input_grad) {
    Tensor g = grad_output;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        g = layers_[i]->backward(g, want_input_grad || i > 0);
    }
    return g;
}

std::vector<ParamRef> Sequential::parameters() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (auto p : layers_[i]->parameters()) {
            p.name = std::to_string(i) + "." + p.name;
            out.push_back(std::move(p));
        }
    }
    return out;
}

std::vector<Tensor*> Sequential::state() {
    std::vector<Tensor*> out;
    for (auto& l : layers_) {
        for (auto* t : l->state()) out.push_back(t);
    }
    return out;
}

void he_uniform_init(Sequential& net, Rng& rng) {
    for (std::size_t i = 0; i < net.size(); ++i) {
        Layer& l = net.layer(i);
        Tensor* w = nullptr;
        Tensor* b = nullptr;
        std::size_t fan_in = 0;
        if (auto* c = dynamic_cast<Conv2dLayer*>(&l)) {
            w = &c->weight();
            b = &c->bias();
            fan_in = w->dim(1) * w->dim(2) * w->dim(3);
        } else if (auto* d = dynamic_cast<DenseLayer*>(&l)) {
            w = &d->weight();
            b = &d->bias();
            fan_in = w->dim(1);
        } else {
            continue;
        }
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        for (double& v : w->values()) v = rng.uniform(-limit, limit);
        b->fill(0.0);
    }
}

void nadam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, OptimizerState& state) {
    if (params.size() != grads.size()) throw ShapeError("nadam_step: parameter/gradient count mismatch");
    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.emplace_back(p->shape());
            state.second_moment.emplace_back(p->shape());
        }
    }
    if (state.first_moment.size() != params.size()) throw ShapeError("nadam_step: optimizer state size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        expect_shape(grads[i]->shape(), params[i]->shape(), "nadam_step gradient");
        expect_shape(state.first_moment[i].shape(), params[i]->shape(), "nadam_step moment");
    }

    const NadamConfig& c = state.config;
    const double t = static_cast<double>(++state.step);
    const double m_correction = 1.0 - std::pow(c.beta1, t + 1.0);
    const double g_correction = 1.0 - std::pow(c.beta1, t);
    const double v_correction = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        double* theta = params[i]->data();
        const double* g = grads[i]->data();
        double* m = state.first_moment[i].data();
        double* v = state.second_moment[i].data();
        for (std::size_t j = 0; j < params[i]->size(); ++j) {
            m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
            v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
            const double m_hat = m[j] / m_correction;
            const double v_hat = v[j] / v_correction;
            const double direction = c.beta1 * m_hat + (1.0 - c.beta1) * g[j] / g_correction;
            theta[j] -= c.learning_rate * direction / (std::sqrt(v_hat) + c.epsilon);
        }
    }
}

void nadam_step(std::span<const ParamRef> params, OptimizerState& state) {
    std::vector<Tensor*> values;
    std::vector<const Tensor*> grads;
    for (const auto& p : params) {
        values.push_back(p.value);
        grads.push_back(p.grad);
    }
    nadam_step(values, grads, state);
}

GradCheckReport grad_check(const std::function<double()>& loss, const std::function<void()>& compute_gradients,
                           std::span<const ParamRef> params, const GradCheckOptions& options) {
    compute_gradients();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) {
        expect_shape(p.grad->shape(), p.value->shape(), "grad_check gradient");
        analytic.push_back(*p.grad);
    }

    Rng rng(options.seed);
    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& value = *params[k].value;
        std::vector<std::size_t> entries(value.size());
        for (std::size_t i = 0; i < entries.size(); ++i) entries[i] = i;
        if (entries.size() > options.max_entries_per_tensor) {
            rng.shuffle(std::span<std::size_t>(entries));
            entries.resize(options.max_entries_per_tensor);
            std::sort(entries.begin(), entries.end());
        }
        for (std::size_t idx : entries) {
            const double saved = value[idx];
            value[idx] = saved + options.step;
            const double plus = loss();
            value[idx] = saved - options.step;
            const double minus = loss();
            value[idx] = saved;
            const double numeric = (plus - minus) / (2.0 * options.step);
            const double exact = analytic[k][idx];
            const double scale = std::max(std::abs(numeric), std::abs(exact));
            ++report.checked;
            if (scale < options.negligible) {
                ++report.negligible;
                continue;
            }
            const double rel = std::abs(numeric - exact) / scale;
            if (rel > options.kink_tolerance) {
                const double base = loss();
                const double forward = (plus - base) / options.step;
                const double backward = (base - minus) / options.step;
                const double one_sided = std::min(std::abs(forward - exact), std::abs(backward - exact)) / scale;
                if (one_sided <= options.kink_tolerance && std::abs(forward - backward) / scale > options.kink_tolerance) {
                    ++report.kinks;
                    continue;
                }
            }
            if (!(rel <= report.max_relative_error)) {
                report.max_relative_error = rel;
                report.worst = params[k].name + "[" + std::to_string(idx) + "]";
            }
        }
    }
    return report;
}

GradCheckReport grad_check(Sequential& net, const Tensor& input, Mode mode, const GradCheckOptions& options) {
    Tensor x = input;
    Tensor dx(input.shape());
    const Shape out_shape = net.output_shape(input.shape());
    Rng rng(options.seed ^ 0xA5A5A5A5ull);
    Tensor projection(out_shape);
    for (double& v : projection.values()) v = rng.normal();

    const auto loss = [&] {
        const Tensor y = net.forward(x, mode);
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * projection[i];
        return s;
    };
    const auto gradients = [&] {
        net.forward(x, mode);
        dx = net.backward(projection, true);
    };
    auto params = net.parameters();
    params.push_back({&x, &dx, "input"});
    return grad_check(loss, gradients, params, options);
}

}  // namespace rpp
