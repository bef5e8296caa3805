#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rpp/dataset.hpp"
#include "rpp/features.hpp"
#include "rpp/grid.hpp"
#include "rpp/nn.hpp"

namespace rpp {

enum class HeadActivation : std::uint8_t { relu = 0, linear = 1 };

struct ModelConfig {
    int window = 65;
    int srp_size = 3;
    // One stage per entry: conv (same padding), batch norm, ReLU, 2x2 average pool.
    std::vector<int> wide_channels{16, 32, 32};
    std::vector<int> wide_kernels{5, 5, 3};
    // One stage per entry: conv, batch norm, ReLU.
    std::vector<int> local_channels{8, 8};
    int local_kernel = 3;
    std::vector<int> head_hidden{64};
    HeadActivation head_activation = HeadActivation::relu;
    Normalization norm;
    std::uint64_t seed = 1;

    // Throws ConfigError.
    void validate() const;
    int wide_output_side() const;
    std::size_t wide_features() const;
    std::size_t local_features() const;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Dual-branch network: a wide branch over the three W x W maps and a local
// branch over the S x S SRP map, concatenated into a dense head that emits a
// normalised power.
class Model {
public:
    explicit Model(const ModelConfig& config);

    const ModelConfig& config() const noexcept { return config_; }
    std::size_t parameter_count() const;

    // wide [N,3,W,W], srp [N,1,S,S] -> normalised predictions [N,1].
    Tensor forward(const Tensor& wide, const Tensor& srp, Mode mode);
    // Back-propagates dL/dy [N,1] into every parameter gradient.
    void backward(const Tensor& grad_output);

    double predict(const FeatureTensor& features);  // dBm, infer mode
    std::vector<double> predict(std::span<const FeatureTensor* const> features);

    std::vector<ParamRef> parameters();
    // Persisted tensors in file order.
    std::vector<Tensor*> state();
    // (name, spec) for every layer in file order, e.g. ("wide.0", conv).
    std::vector<std::pair<std::string, LayerSpec>> layer_specs() const;

    Sequential& wide() { return wide_; }
    Sequential& local() { return local_; }
    Sequential& head() { return head_; }

    // Clamps a normalised output to the reported dBm range [P_min - 10, P_max + 10].
    double to_dbm(double y) const;

private:
    ModelConfig config_;
    Sequential wide_, local_, head_;
    Shape wide_out_shape_, local_out_shape_;
};

// Fresh model with He-uniform weights drawn from config.seed.
Model build_model(const ModelConfig& config);

// First difference between two configurations as a layer name, or nullopt.
std::optional<std::string> config_mismatch(const ModelConfig& expected, const ModelConfig& actual);

struct Batch {
    Tensor wide, srp, target;  // target normalised, [N,1]
};
Batch make_batch(const Dataset& data, std::span<const std::size_t> rows, const Normalization& norm);

// grad_check of every parameter under the batch MSE loss.
GradCheckReport model_grad_check(Model& model, const Batch& batch, Mode mode, const GradCheckOptions& options = {});

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_loss = 0.0;  // NaN without a validation split
};

struct TrainOptions {
    int epochs = 300;
    std::size_t batch_size = 64;
    double learning_rate = 0.002;
    double validation_fraction = 0.25;
    std::uint64_t seed = 1;
    std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
    std::vector<double> train_loss;       // mean normalised MSE per epoch
    std::vector<double> validation_loss;  // empty without a validation split
    int best_epoch = -1;                  // 1-based; -1: final weights kept
    std::size_t steps = 0;
};

// Mini-batch Nadam with batch statistics. With a validation split the
// snapshot with the lowest validation loss is kept.
TrainResult pretrain(Model& model, const Dataset& data, const TrainOptions& options = {});

inline TrainOptions default_finetune_options() {
    TrainOptions o;
    o.learning_rate = 0.0005;
    o.validation_fraction = 0.0;
    return o;
}

// Same loop with batch-norm statistics frozen. A validation split is only
// used when requested and the dataset has at least 40 rows.
TrainResult finetune(Model& model, const Dataset& data, const TrainOptions& options = default_finetune_options());

// Mean normalised MSE in infer mode.
double evaluate_loss(Model& model, const Dataset& data);

// Features at every available cell of sim_map, predictions in infer mode.
// Results do not depend on `workers`.
RadioMap predict_map(const Model& model, const HeightGrid& grid, const Scenario& scenario, const RadioMap& sim_map,
                     int workers = 1);

void save_weights(Model& model, const std::filesystem::path& path);
// Throws LoadError for a bad magic, version, truncation or shape mismatch.
Model load_weights(const std::filesystem::path& path);
// As above, then TransferError when the stored config differs from `expected`.
Model load_weights(const std::filesystem::path& path, const ModelConfig& expected);

std::vector<std::uint8_t> serialize_weights(Model& model);
Model deserialize_weights(std::span<const std::uint8_t> bytes);

}  // namespace rpp
