#include "rpp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "rpp/error.hpp"

namespace rpp {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;
using MapConstVec = Eigen::Map<const Eigen::VectorXd>;

struct Geometry {
    std::size_t n, c, h, w;
};

Geometry image_geometry(const Tensor& t, const char* what) {
    if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2)};
    if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
    throw ShapeError(std::string(what) + ": expected [C,H,W] or [N,C,H,W], got " + to_string(t.shape()));
}

Shape image_shape(const Tensor& like, std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    if (like.rank() == 3) return {c, h, w};
    return {n, c, h, w};
}

// cols [C*k*k, H*W] for one sample, zero `same` padding.
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* cols) {
    const long pad = static_cast<long>(k / 2);
    const std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = x + ch * hw;
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                double* dst = cols + ((ch * k + ki) * k + kj) * hw;
                const long dx = static_cast<long>(kj) - pad;
                const long x_lo = std::max(0L, -dx);
                const long x_hi = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + static_cast<long>(ki) - pad;
                    double* row = dst + y * w;
                    if (sy < 0 || sy >= static_cast<long>(h) || x_lo >= x_hi) {
                        std::fill(row, row + w, 0.0);
                        continue;
                    }
                    std::fill(row, row + x_lo, 0.0);
                    std::memcpy(row + x_lo, plane + sy * w + (x_lo + dx), sizeof(double) * (x_hi - x_lo));
                    std::fill(row + x_hi, row + w, 0.0);
                }
            }
        }
    }
}

void col2im_add(const double* cols, std::size_t c, std::size_t h, std::size_t w, std::size_t k, double* x) {
    const long pad = static_cast<long>(k / 2);
    const std::size_t hw = h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
        double* plane = x + ch * hw;
        for (std::size_t ki = 0; ki < k; ++ki) {
            for (std::size_t kj = 0; kj < k; ++kj) {
                const double* src = cols + ((ch * k + ki) * k + kj) * hw;
                const long dx = static_cast<long>(kj) - pad;
                const long x_lo = std::max(0L, -dx);
                const long x_hi = std::min(static_cast<long>(w), static_cast<long>(w) - dx);
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + static_cast<long>(ki) - pad;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    const double* row = src + y * w;
                    double* out = plane + sy * w + dx;
                    for (long xi = x_lo; xi < x_hi; ++xi) out[xi] += row[xi];
                }
            }
        }
    }
}

void check_conv_shapes(const Geometry& g, const Tensor& kernels, const Tensor* bias) {
    if (kernels.rank() != 4 || kernels.dim(1) != g.c || kernels.dim(2) != kernels.dim(3) || kernels.dim(2) % 2 == 0) {
        throw ShapeError("conv2d: kernels expected [K," + std::to_string(g.c) + ",k,k] with odd k, got " +
                         to_string(kernels.shape()));
    }
    if (bias) expect_shape(bias->shape(), {kernels.dim(0)}, "conv2d bias");
}

}  // namespace

std::string to_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (values_.size() != shape_size(shape_)) {
        throw ShapeError("tensor: " + std::to_string(values_.size()) + " values for shape " + to_string(shape_));
    }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

Tensor Tensor::reshaped(Shape shape) const {
    Tensor t = *this;
    t.reshape(std::move(shape));
    return t;
}

void Tensor::reshape(Shape shape) {
    if (shape_size(shape) != values_.size()) {
        throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
    }
    shape_ = std::move(shape);
}

void expect_shape(const Shape& actual, const Shape& expected, const char* what) {
    if (actual != expected) {
        throw ShapeError(std::string(what) + ": expected " + to_string(expected) + ", got " + to_string(actual));
    }
}

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    const Geometry g = image_geometry(input, "conv2d");
    check_conv_shapes(g, kernels, &bias);
    const std::size_t out_c = kernels.dim(0);
    const std::size_t k = kernels.dim(2);
    const std::size_t hw = g.h * g.w;
    const std::size_t ckk = g.c * k * k;

    Tensor out(image_shape(input, g.n, out_c, g.h, g.w));
    AlignedBuffer cols(ckk * hw);
    const MapConstMat wm(kernels.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(ckk));
    const MapConstVec b(bias.data(), static_cast<Eigen::Index>(out_c));
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.data() + n * g.c * hw, g.c, g.h, g.w, k, cols.data());
        const MapConstMat cm(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
        MapMat y(out.data() + n * out_c * hw, static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(hw));
        y.noalias() = wm * cm;
        y.colwise() += b;
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_output,
                            bool want_input_grad) {
    const Geometry g = image_geometry(input, "conv2d_backward");
    check_conv_shapes(g, kernels, nullptr);
    const std::size_t out_c = kernels.dim(0);
    const std::size_t k = kernels.dim(2);
    const std::size_t hw = g.h * g.w;
    const std::size_t ckk = g.c * k * k;
    expect_shape(grad_output.shape(), image_shape(input, g.n, out_c, g.h, g.w), "conv2d_backward grad_output");

    Conv2dGrads grads;
    grads.kernels = Tensor(kernels.shape());
    grads.bias = Tensor({out_c});
    if (want_input_grad) grads.input = Tensor(input.shape());

    AlignedBuffer cols(ckk * hw);
    AlignedBuffer dcols(want_input_grad ? ckk * hw : 0);
    const MapConstMat wm(kernels.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(ckk));
    MapMat dw(grads.kernels.data(), static_cast<Eigen::Index>(out_c), static_cast<Eigen::Index>(ckk));
    Eigen::Map<Eigen::VectorXd> db(grads.bias.data(), static_cast<Eigen::Index>(out_c));
    for (std::size_t n = 0; n < g.n; ++n) {
        im2col(input.data() + n * g.c * hw, g.c, g.h, g.w, k, cols.data());
        const MapConstMat cm(cols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
        const MapConstMat dy(grad_output.data() + n * out_c * hw, static_cast<Eigen::Index>(out_c),
                             static_cast<Eigen::Index>(hw));
        dw.noalias() += dy * cm.transpose();
        db += dy.rowwise().sum();
        if (want_input_grad) {
            MapMat dc(dcols.data(), static_cast<Eigen::Index>(ckk), static_cast<Eigen::Index>(hw));
            dc.noalias() = wm.transpose() * dy;
            col2im_add(dcols.data(), g.c, g.h, g.w, k, grads.input.data() + n * g.c * hw);
        }
    }
    return grads;
}

namespace {

struct ChannelLayout {
    std::size_t n, c, inner;  // value (n, ch, i) lives at (n*c + ch)*inner + i
};

ChannelLayout channel_layout(const Tensor& x) {
    if (x.rank() == 4) return {x.dim(0), x.dim(1), x.dim(2) * x.dim(3)};
    if (x.rank() == 2) return {x.dim(0), x.dim(1), 1};
    throw ShapeError("batchnorm: expected [N,C,H,W] or [N,C], got " + to_string(x.shape()));
}

}  // namespace

Tensor batchnorm(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormStats& stats, Mode mode,
                 BatchNormCache* cache) {
    const ChannelLayout l = channel_layout(input);
    expect_shape(gamma.shape(), {l.c}, "batchnorm gamma");
    expect_shape(beta.shape(), {l.c}, "batchnorm beta");
    expect_shape(stats.running_mean.shape(), {l.c}, "batchnorm running mean");
    expect_shape(stats.running_var.shape(), {l.c}, "batchnorm running var");
    if (mode == Mode::train && l.n < 2) throw ArgumentError("batchnorm: train mode needs a batch of at least 2");

    const double count = static_cast<double>(l.n * l.inner);
    Tensor out(input.shape());
    Tensor x_hat(input.shape());
    std::vector<double> inv_std(l.c);
    for (std::size_t ch = 0; ch < l.c; ++ch) {
        double mean = 0.0;
        double var = 0.0;
        if (mode == Mode::train) {
            for (std::size_t n = 0; n < l.n; ++n) {
                const double* p = input.data() + (n * l.c + ch) * l.inner;
                for (std::size_t i = 0; i < l.inner; ++i) mean += p[i];
            }
            mean /= count;
            for (std::size_t n = 0; n < l.n; ++n) {
                const double* p = input.data() + (n * l.c + ch) * l.inner;
                for (std::size_t i = 0; i < l.inner; ++i) var += (p[i] - mean) * (p[i] - mean);
            }
            var /= count;
            stats.running_mean[ch] = kBatchNormMomentum * stats.running_mean[ch] + (1.0 - kBatchNormMomentum) * mean;
            stats.running_var[ch] = kBatchNormMomentum * stats.running_var[ch] + (1.0 - kBatchNormMomentum) * var;
        } else {
            mean = stats.running_mean[ch];
            var = stats.running_var[ch];
        }
        const double is = 1.0 / std::sqrt(var + kBatchNormEps);
        inv_std[ch] = is;
        for (std::size_t n = 0; n < l.n; ++n) {
            const std::size_t off = (n * l.c + ch) * l.inner;
            for (std::size_t i = 0; i < l.inner; ++i) {
                const double xh = (input[off + i] - mean) * is;
                x_hat[off + i] = xh;
                out[off + i] = gamma[ch] * xh + beta[ch];
            }
        }
    }
    if (cache) {
        cache->normalized = std::move(x_hat);
        cache->inv_std = std::move(inv_std);
        cache->mode = mode;
    }
    return out;
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma, const Tensor& grad_output) {
    expect_shape(grad_output.shape(), cache.normalized.shape(), "batchnorm_backward grad_output");
    const ChannelLayout l = channel_layout(grad_output);
    const double count = static_cast<double>(l.n * l.inner);
    BatchNormGrads g{Tensor(grad_output.shape()), Tensor({l.c}), Tensor({l.c})};
    for (std::size_t ch = 0; ch < l.c; ++ch) {
        double sum_dy = 0.0;
        double sum_dy_xh = 0.0;
        for (std::size_t n = 0; n < l.n; ++n) {
            const std::size_t off = (n * l.c + ch) * l.inner;
            for (std::size_t i = 0; i < l.inner; ++i) {
                sum_dy += grad_output[off + i];
                sum_dy_xh += grad_output[off + i] * cache.normalized[off + i];
            }
        }
        g.beta[ch] = sum_dy;
        g.gamma[ch] = sum_dy_xh;
        const double scale = gamma[ch] * cache.inv_std[ch];
        for (std::size_t n = 0; n < l.n; ++n) {
            const std::size_t off = (n * l.c + ch) * l.inner;
            for (std::size_t i = 0; i < l.inner; ++i) {
                if (cache.mode == Mode::train) {
                    g.input[off + i] = scale * (grad_output[off + i] - sum_dy / count -
                                                cache.normalized[off + i] * sum_dy_xh / count);
                } else {
                    g.input[off + i] = scale * grad_output[off + i];
                }
            }
        }
    }
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    expect_shape(grad_output.shape(), input.shape(), "relu_backward");
    Tensor g(input.shape());
    for (std::size_t i = 0; i < input.size(); ++i) g[i] = input[i] > 0.0 ? grad_output[i] : 0.0;
    return g;
}

Tensor avgpool2(const Tensor& input) {
    if (input.rank() < 2) throw ShapeError("avgpool2: rank must be >= 2, got " + to_string(input.shape()));
    const std::size_t h = input.dim(input.rank() - 2);
    const std::size_t w = input.dim(input.rank() - 1);
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    if (oh == 0 || ow == 0) throw ShapeError("avgpool2: input " + to_string(input.shape()) + " too small");
    Shape out_shape = input.shape();
    out_shape[out_shape.size() - 2] = oh;
    out_shape[out_shape.size() - 1] = ow;
    Tensor out(out_shape);
    const std::size_t planes = input.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = input.data() + p * h * w;
        double* dst = out.data() + p * oh * ow;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double* a = src + 2 * y * w + 2 * x;
                dst[y * ow + x] = 0.25 * (a[0] + a[1] + a[w] + a[w + 1]);
            }
        }
    }
    return out;
}

Tensor avgpool2_backward(const Shape& input_shape, const Tensor& grad_output) {
    if (input_shape.size() < 2) throw ShapeError("avgpool2_backward: bad input shape");
    const std::size_t h = input_shape[input_shape.size() - 2];
    const std::size_t w = input_shape[input_shape.size() - 1];
    Shape expected = input_shape;
    expected[expected.size() - 2] = h / 2;
    expected[expected.size() - 1] = w / 2;
    expect_shape(grad_output.shape(), expected, "avgpool2_backward grad_output");
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    Tensor g(input_shape);
    const std::size_t planes = g.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = grad_output.data() + p * oh * ow;
        double* dst = g.data() + p * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const double v = 0.25 * src[y * ow + x];
                double* a = dst + 2 * y * w + 2 * x;
                a[0] = v;
                a[1] = v;
                a[w] = v;
                a[w + 1] = v;
            }
        }
    }
    return g;
}

namespace {

std::pair<std::size_t, std::size_t> dense_rows(const Tensor& input, const Tensor& weights) {
    if (weights.rank() != 2) throw ShapeError("dense: weights expected [out,in], got " + to_string(weights.shape()));
    const std::size_t in = weights.dim(1);
    if (input.rank() == 1 && input.dim(0) == in) return {1, in};
    if (input.rank() == 2 && input.dim(1) == in) return {input.dim(0), in};
    throw ShapeError("dense: input expected [N," + std::to_string(in) + "], got " + to_string(input.shape()));
}

}  // namespace

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    const auto [n, in] = dense_rows(input, weights);
    const std::size_t out_dim = weights.dim(0);
    expect_shape(bias.shape(), {out_dim}, "dense bias");
    Tensor out(input.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim});
    const MapConstMat x(input.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
    const MapConstMat w(weights.data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in));
    MapMat y(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    y.noalias() = x * w.transpose();
    y.rowwise() += MapConstVec(bias.data(), static_cast<Eigen::Index>(out_dim)).transpose();
    return out;
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                          bool want_input_grad) {
    const auto [n, in] = dense_rows(input, weights);
    const std::size_t out_dim = weights.dim(0);
    expect_shape(grad_output.shape(), input.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim},
                 "dense_backward grad_output");
    DenseGrads g;
    g.weights = Tensor(weights.shape());
    g.bias = Tensor({out_dim});
    const MapConstMat x(input.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
    const MapConstMat w(weights.data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in));
    const MapConstMat dy(grad_output.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out_dim));
    MapMat(g.weights.data(), static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(in)).noalias() =
        dy.transpose() * x;
    Eigen::Map<Eigen::VectorXd>(g.bias.data(), static_cast<Eigen::Index>(out_dim)) = dy.colwise().sum().transpose();
    if (want_input_grad) {
        g.input = Tensor(input.shape());
        MapMat(g.input.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in)).noalias() = dy * w;
    }
    return g;
}

double mse_loss(const Tensor& prediction, const Tensor& target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw ShapeError("mse_loss: prediction " + to_string(prediction.shape()) + " vs target " +
                         to_string(target.shape()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < prediction.size(); ++i) {
        const double d = prediction[i] - target[i];
        sum += d * d;
    }
    return sum / static_cast<double>(prediction.size());
}

Tensor mse_loss_backward(const Tensor& prediction, const Tensor& target) {
    if (prediction.size() != target.size() || prediction.empty()) {
        throw ShapeError("mse_loss_backward: prediction " + to_string(prediction.shape()) + " vs target " +
                         to_string(target.shape()));
    }
    Tensor g(prediction.shape());
    const double scale = 2.0 / static_cast<double>(prediction.size());
    for (std::size_t i = 0; i < prediction.size(); ++i) g[i] = scale * (prediction[i] - target[i]);
    return g;
}

}  // namespace rpp
