#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rpp/random.hpp"
#include "rpp/tensor.hpp"

namespace rpp {

enum class LayerKind : std::uint8_t { conv = 1, batchnorm = 2, relu = 3, avgpool = 4, dense = 5, concat = 6 };

const char* to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int channels = 0;  // conv output channels, dense units
    int kernel = 0;    // conv kernel size (odd)
    int pool = 2;      // avgpool size

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Trainable tensor paired with its gradient buffer.
struct ParamRef {
    Tensor* value = nullptr;
    Tensor* grad = nullptr;
    std::string name;
};

class Layer {
public:
    virtual ~Layer() = default;

    virtual LayerKind kind() const = 0;
    virtual LayerSpec spec() const = 0;
    virtual Shape output_shape(const Shape& input) const = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;

    // Caches what backward needs; grads are overwritten by backward.
    virtual Tensor forward(const Tensor& input, Mode mode) = 0;
    virtual Tensor backward(const Tensor& grad_output, bool want_input_grad) = 0;

    virtual std::vector<ParamRef> parameters() { return {}; }
    // Every persisted tensor, parameters first, then buffers such as running stats.
    virtual std::vector<Tensor*> state() { return {}; }
};

class Conv2dLayer final : public Layer {
public:
    Conv2dLayer(int in_channels, int out_channels, int kernel);

    LayerKind kind() const override { return LayerKind::conv; }
    LayerSpec spec() const override;
    Shape output_shape(const Shape& input) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output, bool want_input_grad) override;
    std::vector<ParamRef> parameters() override;
    std::vector<Tensor*> state() override { return {&weight_, &bias_}; }

    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }

private:
    Tensor weight_, bias_, grad_weight_, grad_bias_, input_;
};

class BatchNormLayer final : public Layer {
public:
    explicit BatchNormLayer(int channels);

    LayerKind kind() const override { return LayerKind::batchnorm; }
    LayerSpec spec() const override { return {LayerKind::batchnorm, static_cast<int>(gamma_.size()), 0, 0}; }
    Shape output_shape(const Shape& input) const override { return input; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<BatchNormLayer>(*this); }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output, bool want_input_grad) override;
    std::vector<ParamRef> parameters() override;
    std::vector<Tensor*> state() override {
        return {&gamma_, &beta_, &stats_.running_mean, &stats_.running_var};
    }

    const BatchNormStats& stats() const { return stats_; }
    BatchNormStats& stats() { return stats_; }

private:
    Tensor gamma_, beta_, grad_gamma_, grad_beta_;
    BatchNormStats stats_;
    BatchNormCache cache_;
};

class ReluLayer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::relu; }
    LayerSpec spec() const override { return {LayerKind::relu, 0, 0, 0}; }
    Shape output_shape(const Shape& input) const override { return input; }
    std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output, bool want_input_grad) override;

private:
    Tensor input_;
};

class AvgPool2Layer final : public Layer {
public:
    LayerKind kind() const override { return LayerKind::avgpool; }
    LayerSpec spec() const override { return {LayerKind::avgpool, 0, 0, 2}; }
    Shape output_shape(const Shape& input) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool2Layer>(*this); }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output, bool want_input_grad) override;

private:
    Shape input_shape_;
};

class DenseLayer final : public Layer {
public:
    DenseLayer(int in_features, int out_features);

    LayerKind kind() const override { return LayerKind::dense; }
    LayerSpec spec() const override { return {LayerKind::dense, static_cast<int>(weight_.dim(0)), 0, 0}; }
    Shape output_shape(const Shape& input) const override;
    std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
    Tensor forward(const Tensor& input, Mode mode) override;
    Tensor backward(const Tensor& grad_output, bool want_input_grad) override;
    std::vector<ParamRef> parameters() override;
    std::vector<Tensor*> state() override { return {&weight_, &bias_}; }

    Tensor& weight() { return weight_; }
    Tensor& bias() { return bias_; }

private:
    Tensor weight_, bias_, grad_weight_, grad_bias_, input_;
};

// Ordered stack of layers with value semantics (copies clone every layer).
class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& other);
    Sequential& operator=(const Sequential& other);
    Sequential(Sequential&&) noexcept = default;
    Sequential& operator=(Sequential&&) noexcept = default;

    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    std::size_t size() const noexcept { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }
    const Layer& layer(std::size_t i) const { return *layers_.at(i); }

    Shape output_shape(Shape input) const;
    Tensor forward(const Tensor& input, Mode mode);
    // want_input_grad = false skips the input gradient of the first layer.
    Tensor backward(const Tensor& grad_output, bool want_input_grad = true);
    std::vector<ParamRef> parameters();
    std::vector<Tensor*> state();

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// He-uniform weights (limit sqrt(6 / fan_in)), zero biases, gamma = 1, beta = 0.
void he_uniform_init(Sequential& net, Rng& rng);

struct NadamConfig {
    double learning_rate = 0.002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    NadamConfig config;
};

// One Nadam update. Moments are created on the first call.
void nadam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads, OptimizerState& state);
void nadam_step(std::span<const ParamRef> params, OptimizerState& state);

struct GradCheckOptions {
    double step = 1e-5;
    std::size_t max_entries_per_tensor = 200;
    // Entries where both gradients are below this are treated as exact.
    double negligible = 1e-8;
    // An entry whose central estimate is off by more than this, but whose
    // analytic gradient matches one one-sided difference within it while the
    // two one-sided differences disagree by more than it, straddles a kink and is
    // counted in `kinks` instead.
    double kink_tolerance = 1e-4;
    std::uint64_t seed = 1;
};

struct GradCheckReport {
    double max_relative_error = 0.0;
    std::string worst;  // "<tensor>[index]"
    std::size_t checked = 0;
    std::size_t negligible = 0;
    std::size_t kinks = 0;
};

// Central-difference check of `params` against the gradients produced by
// `compute_gradients` at the current parameter values.
GradCheckReport grad_check(const std::function<double()>& loss, const std::function<void()>& compute_gradients,
                           std::span<const ParamRef> params, const GradCheckOptions& options = {});

// Checks a layer stack, including the input gradient, with loss sum(r * f(x))
// for a fixed random projection r.
GradCheckReport grad_check(Sequential& net, const Tensor& input, Mode mode, const GradCheckOptions& options = {});

}  // namespace rpp
