#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "septensor/autodiff.hpp"
#include "septensor/rng.hpp"
#include "septensor/tensor.hpp"

namespace septensor {

enum class Activation { Tanh, Identity };

/// Per-axis univariate MLP: (depth - 1) activated hidden layers of equal
/// width followed by one affine output layer.
struct NetworkConfig {
    std::size_t depth = 4;
    std::size_t hidden_width = 1;
    std::size_t output_width = 1;
    Activation activation = Activation::Tanh;  // Identity only for test harnesses
    // The first layer sees input_scale * x + input_shift.
    double input_scale = 1.0;
    double input_shift = 0.0;

    void validate() const;
    [[nodiscard]] std::size_t parameter_count() const;

    bool operator==(const NetworkConfig&) const = default;
};

struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;  // out x in, row-major
    std::size_t bias_offset = 0;
    bool activated = false;
};

/// Layer table in parameter order: W_1, b_1, W_2, b_2, ...
[[nodiscard]] std::vector<LayerShape> layer_shapes(const NetworkConfig& config);

struct MLPParams {
    NetworkConfig config;
    std::vector<double> values;
};

/// Glorot-uniform weights, zero biases.
[[nodiscard]] MLPParams init_params(const NetworkConfig& config, std::uint64_t seed);
void init_params_into(const NetworkConfig& config, Rng& rng, std::span<double> values);

/// Value, first and second derivative rows of one network at one point.
template <class T>
struct JetRows {
    std::vector<T> value;
    std::vector<T> d1;
    std::vector<T> d2;
};

/// Value/first/second-derivative factor matrices of one axis network,
/// each n x output_width.
struct FactorBundle {
    FactorMatrix value;
    FactorMatrix d1;
    FactorMatrix d2;
};

namespace instrument {
/// Number of (network, point) evaluations on this thread since the last reset.
std::uint64_t network_point_evaluations();
void reset_network_point_evaluations();
void count_network_points(std::uint64_t n);
}  // namespace instrument

/// Propagates the input jet through the network. Works on plain
/// doubles and on tape variables.
template <class T>
JetRows<T> forward_jet(const NetworkConfig& config, std::span<const T> params, double x) {
    config.validate();
    if (params.size() != config.parameter_count()) throw DimensionError("parameter vector has wrong length");
    instrument::count_network_points(1);

    std::vector<ad::Jet2<T>> act{
        {T(config.input_scale * x + config.input_shift), T(config.input_scale), T(0.0)}};
    for (const auto& layer : layer_shapes(config)) {
        std::vector<ad::Jet2<T>> next(layer.out);
        for (std::size_t o = 0; o < layer.out; ++o) {
            const T* w = params.data() + layer.weight_offset + o * layer.in;
            T v = params[layer.bias_offset + o];
            T d1 = T(0.0);
            T d2 = T(0.0);
            for (std::size_t i = 0; i < layer.in; ++i) {
                v = v + w[i] * act[i].v;
                d1 = d1 + w[i] * act[i].d1;
                d2 = d2 + w[i] * act[i].d2;
            }
            ad::Jet2<T> z{v, d1, d2};
            next[o] = (layer.activated && config.activation == Activation::Tanh) ? ad::jet_tanh(z) : z;
        }
        act = std::move(next);
    }

    JetRows<T> rows;
    rows.value.reserve(act.size());
    rows.d1.reserve(act.size());
    rows.d2.reserve(act.size());
    for (const auto& j : act) {
        rows.value.push_back(j.v);
        rows.d1.push_back(j.d1);
        rows.d2.push_back(j.d2);
    }
    return rows;
}

/// One batched forward pass that keeps the intermediates needed to push
/// factor-matrix gradients back to the network parameters.
class NetworkPass {
public:
    const FactorBundle& forward(const NetworkConfig& config, std::span<const double> params,
                                std::span<const double> xs);

    /// Accumulates d loss / d params into `param_grad` given the gradients
    /// with respect to the value, d1 and d2 factor matrices.
    void backward(const FactorMatrix& grad_value, const FactorMatrix& grad_d1, const FactorMatrix& grad_d2,
                  std::span<double> param_grad) const;

    [[nodiscard]] const FactorBundle& output() const noexcept { return output_; }

private:
    struct LayerCache {
        // Inputs to the layer (jets) and pre-activation jets, n x width.
        std::vector<double> in_v, in_d1, in_d2;
        std::vector<double> z_v, z_d1, z_d2;
    };

    NetworkConfig config_;
    std::span<const double> params_;
    std::vector<LayerShape> layers_;
    std::vector<LayerCache> cache_;
    std::size_t rows_ = 0;
    FactorBundle output_;
};

struct JetCheck {
    double d1_error = 0.0;  // worst relative error of d1 against differences of the value row
    double d2_error = 0.0;  // worst relative error of d2 against differences of the d1 row
};

/// Central finite differences with step h at each of the points.
[[nodiscard]] JetCheck check_jets_fd(const NetworkConfig& config, std::span<const double> params,
                                     std::span<const double> xs, double h = 1e-4);

/// |a - b| / max(|a|, |b|, floor).
[[nodiscard]] inline double relative_difference(double a, double b, double floor) {
    const double scale = std::max({std::abs(a), std::abs(b), floor});
    return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

/// Row j equals forward_jet(params, xs[j]).
[[nodiscard]] FactorBundle forward_batch(const NetworkConfig& config, std::span<const double> params,
                                         std::span<const double> xs);

}  // namespace septensor
