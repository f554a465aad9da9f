#include "septensor/network.hpp"

#include <cmath>

namespace septensor {

void NetworkConfig::validate() const {
    if (depth < 2) throw DimensionError("network depth must be >= 2");
    if (hidden_width == 0 || output_width == 0) throw DimensionError("network widths must be >= 1");
    if (!std::isfinite(input_scale) || input_scale == 0.0 || !std::isfinite(input_shift))
        throw DimensionError("input scaling must be finite and non-zero");
}

std::vector<LayerShape> layer_shapes(const NetworkConfig& config) {
    config.validate();
    std::vector<LayerShape> layers;
    layers.reserve(config.depth);
    std::size_t offset = 0;
    std::size_t in = 1;
    for (std::size_t l = 0; l < config.depth; ++l) {
        LayerShape s;
        s.in = in;
        s.out = (l + 1 == config.depth) ? config.output_width : config.hidden_width;
        s.weight_offset = offset;
        s.bias_offset = offset + s.in * s.out;
        s.activated = l + 1 < config.depth;
        offset = s.bias_offset + s.out;
        in = s.out;
        layers.push_back(s);
    }
    return layers;
}

std::size_t NetworkConfig::parameter_count() const {
    const auto layers = layer_shapes(*this);
    return layers.back().bias_offset + layers.back().out;
}

void init_params_into(const NetworkConfig& config, Rng& rng, std::span<double> values) {
    if (values.size() != config.parameter_count()) throw DimensionError("parameter span has wrong length");
    for (const auto& layer : layer_shapes(config)) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
        for (std::size_t k = 0; k < layer.in * layer.out; ++k)
            values[layer.weight_offset + k] = rng.uniform(-bound, bound);
        for (std::size_t k = 0; k < layer.out; ++k) values[layer.bias_offset + k] = 0.0;
    }
}

MLPParams init_params(const NetworkConfig& config, std::uint64_t seed) {
    MLPParams p{config, std::vector<double>(config.parameter_count())};
    Rng rng(seed);
    init_params_into(config, rng, p.values);
    return p;
}

namespace instrument {
namespace {
thread_local std::uint64_t g_points = 0;
}
std::uint64_t network_point_evaluations() { return g_points; }
void reset_network_point_evaluations() { g_points = 0; }
void count_network_points(std::uint64_t n) { g_points += n; }
}  // namespace instrument

// ---------------------------------------------------------------------------

const FactorBundle& NetworkPass::forward(const NetworkConfig& config, std::span<const double> params,
                                         std::span<const double> xs) {
    config.validate();
    if (xs.empty()) throw ArityError("forward_batch needs at least one point");
    if (params.size() != config.parameter_count()) throw DimensionError("parameter vector has wrong length");
    instrument::count_network_points(xs.size());

    config_ = config;
    params_ = params;
    layers_ = layer_shapes(config);
    rows_ = xs.size();
    cache_.assign(layers_.size(), {});
    const bool use_tanh = config.activation == Activation::Tanh;

    std::vector<double> av(rows_);
    for (std::size_t j = 0; j < rows_; ++j) av[j] = config.input_scale * xs[j] + config.input_shift;
    std::vector<double> a1(rows_, config.input_scale);
    std::vector<double> a2(rows_, 0.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        auto& c = cache_[l];
        c.z_v.resize(rows_ * layer.out);
        c.z_d1.resize(rows_ * layer.out);
        c.z_d2.resize(rows_ * layer.out);
        std::vector<double> ov(rows_ * layer.out), o1(rows_ * layer.out), o2(rows_ * layer.out);
        for (std::size_t j = 0; j < rows_; ++j) {
            const double* xv = av.data() + j * layer.in;
            const double* x1 = a1.data() + j * layer.in;
            const double* x2 = a2.data() + j * layer.in;
            for (std::size_t o = 0; o < layer.out; ++o) {
                // Same operation order as forward_jet so both paths agree bitwise.
                const double* w = params.data() + layer.weight_offset + o * layer.in;
                double v = params[layer.bias_offset + o];
                double d1 = 0.0;
                double d2 = 0.0;
                for (std::size_t i = 0; i < layer.in; ++i) {
                    v = v + w[i] * xv[i];
                    d1 = d1 + w[i] * x1[i];
                    d2 = d2 + w[i] * x2[i];
                }
                const std::size_t k = j * layer.out + o;
                c.z_v[k] = v;
                c.z_d1[k] = d1;
                c.z_d2[k] = d2;
                if (layer.activated && use_tanh) {
                    const double y = std::tanh(v);
                    const double s = 1.0 - y * y;
                    ov[k] = y;
                    o1[k] = s * d1;
                    o2[k] = s * d2 - 2.0 * (y * s) * (d1 * d1);
                } else {
                    ov[k] = v;
                    o1[k] = d1;
                    o2[k] = d2;
                }
            }
        }
        c.in_v = std::move(av);
        c.in_d1 = std::move(a1);
        c.in_d2 = std::move(a2);
        av = std::move(ov);
        a1 = std::move(o1);
        a2 = std::move(o2);
    }

    const std::size_t width = config.output_width;
    output_.value = FactorMatrix(rows_, width, std::move(av));
    output_.d1 = FactorMatrix(rows_, width, std::move(a1));
    output_.d2 = FactorMatrix(rows_, width, std::move(a2));
    return output_;
}

void NetworkPass::backward(const FactorMatrix& grad_value, const FactorMatrix& grad_d1, const FactorMatrix& grad_d2,
                           std::span<double> param_grad) const {
    const std::size_t width = config_.output_width;
    for (const auto* g : {&grad_value, &grad_d1, &grad_d2})
        if (g->rows() != rows_ || g->cols() != width) throw DimensionError("factor gradient has wrong shape");
    if (param_grad.size() != params_.size()) throw DimensionError("parameter gradient span has wrong length");
    const bool use_tanh = config_.activation == Activation::Tanh;

    std::vector<double> gv(grad_value.data().begin(), grad_value.data().end());
    std::vector<double> g1(grad_d1.data().begin(), grad_d1.data().end());
    std::vector<double> g2(grad_d2.data().begin(), grad_d2.data().end());

    for (std::size_t l = layers_.size(); l-- > 0;) {
        const auto& layer = layers_[l];
        const auto& c = cache_[l];
        const std::size_t n_out = layer.out;

        // Adjoints of the pre-activation jet (z, z', z'').
        if (layer.activated && use_tanh) {
            for (std::size_t k = 0; k < rows_ * n_out; ++k) {
                const double y = std::tanh(c.z_v[k]);
                const double s = 1.0 - y * y;
                const double ys = y * s;
                const double z1 = c.z_d1[k];
                const double z2 = c.z_d2[k];
                const double dv = gv[k] * s + g1[k] * (-2.0 * ys * z1) +
                                  g2[k] * (-2.0 * ys * z2 - 2.0 * z1 * z1 * (s * s - 2.0 * y * ys));
                const double d1 = g1[k] * s + g2[k] * (-4.0 * ys * z1);
                const double d2 = g2[k] * s;
                gv[k] = dv;
                g1[k] = d1;
                g2[k] = d2;
            }
        }

        double* dw = param_grad.data() + layer.weight_offset;
        double* db = param_grad.data() + layer.bias_offset;
        const double* w = params_.data() + layer.weight_offset;
        std::vector<double> nv(rows_ * layer.in, 0.0), n1(rows_ * layer.in, 0.0), n2(rows_ * layer.in, 0.0);
        for (std::size_t j = 0; j < rows_; ++j) {
            const double* xv = c.in_v.data() + j * layer.in;
            const double* x1 = c.in_d1.data() + j * layer.in;
            const double* x2 = c.in_d2.data() + j * layer.in;
            double* pv = nv.data() + j * layer.in;
            double* p1 = n1.data() + j * layer.in;
            double* p2 = n2.data() + j * layer.in;
            for (std::size_t o = 0; o < n_out; ++o) {
                const std::size_t k = j * n_out + o;
                const double a = gv[k], b = g1[k], e = g2[k];
                db[o] += a;
                double* dwo = dw + o * layer.in;
                const double* wo = w + o * layer.in;
                for (std::size_t i = 0; i < layer.in; ++i) {
                    dwo[i] += a * xv[i] + b * x1[i] + e * x2[i];
                    pv[i] += a * wo[i];
                    p1[i] += b * wo[i];
                    p2[i] += e * wo[i];
                }
            }
        }
        gv = std::move(nv);
        g1 = std::move(n1);
        g2 = std::move(n2);
    }
}

FactorBundle forward_batch(const NetworkConfig& config, std::span<const double> params, std::span<const double> xs) {
    NetworkPass pass;
    return pass.forward(config, params, xs);
}

JetCheck check_jets_fd(const NetworkConfig& config, std::span<const double> params, std::span<const double> xs,
                       double h) {
    JetCheck out;
    for (double x : xs) {
        const auto at = forward_jet<double>(config, params, x);
        const auto up = forward_jet<double>(config, params, x + h);
        const auto dn = forward_jet<double>(config, params, x - h);
        double scale1 = 0.0, scale2 = 0.0;
        for (std::size_t c = 0; c < at.value.size(); ++c) {
            scale1 = std::max(scale1, std::abs(at.d1[c]));
            scale2 = std::max(scale2, std::abs(at.d2[c]));
        }
        for (std::size_t c = 0; c < at.value.size(); ++c) {
            const double fd1 = (up.value[c] - dn.value[c]) / (2.0 * h);
            const double fd2 = (up.d1[c] - dn.d1[c]) / (2.0 * h);
            out.d1_error = std::max(out.d1_error, relative_difference(at.d1[c], fd1, 1e-3 * scale1));
            out.d2_error = std::max(out.d2_error, relative_difference(at.d2[c], fd2, 1e-3 * scale2));
        }
    }
    return out;
}

}  // namespace septensor
