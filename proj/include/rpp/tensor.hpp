#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace rpp {

using Shape = std::vector<std::size_t>;

// 64-byte aligned storage, so vectorised kernels see the same alignment on
// every run and results do not depend on heap addresses.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }

    template <typename U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
        return true;
    }
};

using AlignedBuffer = std::vector<double, AlignedAllocator<double>>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major array of doubles.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double& operator[](std::size_t i) noexcept { return values_[i]; }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    void fill(double v);
    // Same values under a new shape of equal size.
    Tensor reshaped(Shape shape) const;
    void reshape(Shape shape);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    AlignedBuffer values_;
};

// Throws ShapeError naming `what` unless `actual` equals `expected`.
void expect_shape(const Shape& actual, const Shape& expected, const char* what);

// ---- kernels -------------------------------------------------------------
// Rank-3 inputs [C,H,W] are treated as a batch of one.

// Cross-correlation with zero `same` padding. kernels [K,C,k,k], k odd.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGrads {
    Tensor input;  // empty when not requested
    Tensor kernels;
    Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            bool want_input_grad = true);

enum class Mode { train, infer };

struct BatchNormStats {
    Tensor running_mean;
    Tensor running_var;
};

struct BatchNormCache {
    Tensor normalized;              // x_hat
    std::vector<double> inv_std;    // per channel
    Mode mode = Mode::infer;
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.99;

// Per-channel normalisation over N,H,W of x [N,C,H,W] (or [N,C]). Train mode
// uses batch statistics and updates `stats`; infer mode uses `stats`.
Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                 BatchNormCache* cache = nullptr);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& grad_output);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

// 2x2 average pooling with floor semantics on the two trailing axes.
Tensor avgpool2(const Tensor& input);
Tensor avgpool2_backward(const Shape& input_shape, const Tensor& grad_output);

// x [N,in] (or [in]), weights [out,in], bias [out].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          bool want_input_grad = true);

double mse_loss(const Tensor& prediction, const Tensor& target);
Tensor mse_loss_backward(const Tensor& prediction, const Tensor& target);

}  // namespace rpp
