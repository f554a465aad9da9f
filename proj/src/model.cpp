#include "septensor/model.hpp"

#include <Eigen/Dense>

namespace septensor {

void ModelSpec::validate() const {
    if (dim < 2) throw ArityError("model needs at least two axes");
    if (rank < 1) throw DimensionError("model rank must be >= 1");
    if (networks.size() != dim) throw DimensionError("model needs one network config per axis");
    const auto ranks = tt_ranks(dim, rank);
    for (std::size_t k = 0; k < dim; ++k) {
        networks[k].validate();
        const std::size_t want = kind == Decomposition::TT ? ranks[k] * ranks[k + 1] : rank;
        if (networks[k].output_width != want) throw DimensionError("network output width inconsistent with model kind");
    }
}

std::vector<std::size_t> tt_ranks(std::size_t dim, std::size_t rank) {
    std::vector<std::size_t> r(dim + 1, rank);
    r.front() = 1;
    r.back() = 1;
    return r;
}

ModelSpec make_model_spec(Decomposition kind, std::size_t dim, std::size_t rank, std::size_t hidden_width,
                          std::size_t depth) {
    ModelSpec spec{kind, dim, rank, {}};
    if (dim < 2) throw ArityError("model needs at least two axes");
    if (rank < 1) throw DimensionError("model rank must be >= 1");
    const auto ranks = tt_ranks(dim, rank);
    for (std::size_t k = 0; k < dim; ++k) {
        NetworkConfig c;
        c.depth = depth;
        c.hidden_width = hidden_width == 0 ? rank : hidden_width;
        c.output_width = kind == Decomposition::TT ? ranks[k] * ranks[k + 1] : rank;
        spec.networks.push_back(c);
    }
    spec.validate();
    return spec;
}

ModelSpec make_model_spec(Decomposition kind, const std::vector<Interval>& domain, std::size_t rank,
                          std::size_t hidden_width, std::size_t depth) {
    ModelSpec spec = make_model_spec(kind, domain.size(), rank, hidden_width, depth);
    for (std::size_t k = 0; k < domain.size(); ++k) {
        const auto [lo, hi] = domain[k];
        if (!(hi > lo)) throw DimensionError("degenerate interval on axis " + std::to_string(k));
        spec.networks[k].input_scale = 2.0 / (hi - lo);
        spec.networks[k].input_shift = -(hi + lo) / (hi - lo);
    }
    return spec;
}

// ---------------------------------------------------------------------------

SeparatedModel::SeparatedModel(ModelSpec spec, std::vector<double> parameters)
    : spec_(std::move(spec)), params_(std::move(parameters)) {
    spec_.validate();
    std::size_t offset = 0;
    for (const auto& net : spec_.networks) {
        network_slots_.push_back({offset, net.parameter_count()});
        offset += net.parameter_count();
    }
    const std::size_t core_count = spec_.kind == Decomposition::Tucker ? shape_volume(core_shape()) : 0;
    core_slots_ = {offset, core_count};
    if (params_.size() != offset + core_count) throw DimensionError("parameter vector length does not match model spec");
}

SeparatedModel SeparatedModel::create(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::size_t total = 0;
    for (const auto& net : spec.networks) total += net.parameter_count();
    Shape cshape;
    if (spec.kind == Decomposition::Tucker) cshape.assign(spec.dim, spec.rank);
    const std::size_t core_count = cshape.empty() ? 0 : shape_volume(cshape);
    std::vector<double> params(total + core_count, 0.0);

    std::size_t offset = 0;
    for (std::size_t k = 0; k < spec.dim; ++k) {
        const std::size_t n = spec.networks[k].parameter_count();
        Rng rng(derive_seed(seed, k));
        init_params_into(spec.networks[k], rng, std::span<double>(params).subspan(offset, n));
        offset += n;
    }

    if (core_count > 0) {
        // Orthonormal columns of a Gaussian (R^(d-1) x R) matrix; its
        // row-major layout is the core with the last mode as the column index.
        const std::size_t cols = spec.rank;
        const std::size_t rows = core_count / cols;
        Rng rng(derive_seed(seed, spec.dim));
        Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index i = 0; i < g.rows(); ++i)
            for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = rng.normal();
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
        for (Eigen::Index i = 0; i < q.rows(); ++i)
            for (Eigen::Index j = 0; j < q.cols(); ++j)
                params[offset + static_cast<std::size_t>(i) * cols + static_cast<std::size_t>(j)] = q(i, j);
    }
    return SeparatedModel(spec, std::move(params));
}

std::span<const double> SeparatedModel::network_parameters(std::size_t axis) const {
    const auto s = network_slots_.at(axis);
    return std::span<const double>(params_).subspan(s.offset, s.count);
}

Shape SeparatedModel::core_shape() const {
    if (spec_.kind != Decomposition::Tucker) return {};
    return Shape(spec_.dim, spec_.rank);
}

CoreTensor SeparatedModel::core() const {
    if (spec_.kind != Decomposition::Tucker) throw std::logic_error("only Tucker models have a core tensor");
    auto data = std::span<const double>(params_).subspan(core_slots_.offset, core_slots_.count);
    return CoreTensor(core_shape(), std::vector<double>(data.begin(), data.end()));
}

std::vector<SlotRange> trainable_slots(const SeparatedModel& model) {
    std::vector<SlotRange> out;
    for (std::size_t k = 0; k < model.dim(); ++k) out.push_back(model.network_slots(k));
    if (model.core_slots().count > 0) out.push_back(model.core_slots());
    return out;
}

// ---------------------------------------------------------------------------

FactorAssembly::FactorAssembly(const ModelSpec& spec, const CoreTensor* core) : spec_(&spec), core_(core) {
    if (spec.kind == Decomposition::Tucker && core == nullptr) throw std::invalid_argument("Tucker assembly needs a core");
}

DenseTensor FactorAssembly::forward(std::vector<FactorMatrix> factors) {
    if (factors.size() != spec_->dim) throw DimensionError("assembly needs one factor per axis");
    widths_.clear();
    for (const auto& f : factors) widths_.push_back(f.cols());
    switch (spec_->kind) {
        case Decomposition::CP: return cp_.forward(factors);
        case Decomposition::Tucker: return tucker_.forward(*core_, factors);
        case Decomposition::TT: {
            auto parts = parts_from_factors<double>(*spec_, std::move(factors), {});
            return tt_.forward(parts.cores);
        }
    }
    throw std::logic_error("unreachable");
}

FactorAssembly::Gradients FactorAssembly::backward(const DenseTensor& grad) const {
    Gradients out;
    switch (spec_->kind) {
        case Decomposition::CP: out.factors = cp_.backward(grad); break;
        case Decomposition::Tucker: {
            auto g = tucker_.backward(grad);
            out.factors = std::move(g.factors);
            out.core = std::move(g.core);
            break;
        }
        case Decomposition::TT: {
            const auto cores = tt_.backward(grad);
            for (const auto& c : cores) {
                FactorMatrix f(c.points(), c.left_rank() * c.right_rank());
                for (std::size_t a = 0; a < c.left_rank(); ++a)
                    for (std::size_t i = 0; i < c.points(); ++i)
                        for (std::size_t b = 0; b < c.right_rank(); ++b) f(i, a * c.right_rank() + b) = c(a, i, b);
                out.factors.push_back(std::move(f));
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<FactorBundle> evaluate_factors(const SeparatedModel& model, const AxisPoints& axis_points) {
    if (axis_points.size() != model.dim()) throw DimensionError("number of axis point lists != model dimension");
    std::vector<FactorBundle> bundles;
    bundles.reserve(model.dim());
    for (std::size_t k = 0; k < model.dim(); ++k) {
        if (axis_points[k].empty()) throw ArityError("axis point list is empty");
        bundles.push_back(forward_batch(model.spec().networks[k], model.network_parameters(k), axis_points[k]));
    }
    return bundles;
}

DenseTensor assemble_channels(const SeparatedModel& model, const std::vector<FactorBundle>& bundles,
                              std::span<const FactorChannel> channels) {
    std::vector<FactorMatrix> factors;
    factors.reserve(bundles.size());
    for (std::size_t k = 0; k < bundles.size(); ++k) {
        switch (channels[k]) {
            case FactorChannel::Value: factors.push_back(bundles[k].value); break;
            case FactorChannel::D1: factors.push_back(bundles[k].d1); break;
            case FactorChannel::D2: factors.push_back(bundles[k].d2); break;
        }
    }
    CoreTensor core;
    if (model.spec().kind == Decomposition::Tucker) core = model.core();
    FactorAssembly assembly(model.spec(), model.spec().kind == Decomposition::Tucker ? &core : nullptr);
    return assembly.forward(std::move(factors));
}

GridBundle model_forward(const SeparatedModel& model, const AxisPoints& axis_points) {
    const auto bundles = evaluate_factors(model, axis_points);
    const std::size_t d = model.dim();
    GridBundle out;
    out.axis_points = axis_points;
    std::vector<FactorChannel> channels(d, FactorChannel::Value);
    out.u = assemble_channels(model, bundles, channels);
    for (std::size_t k = 0; k < d; ++k) {
        channels[k] = FactorChannel::D1;
        out.first.push_back(assemble_channels(model, bundles, channels));
        channels[k] = FactorChannel::D2;
        out.second.push_back(assemble_channels(model, bundles, channels));
        channels[k] = FactorChannel::Value;
    }
    return out;
}

DenseTensor model_values(const SeparatedModel& model, const AxisPoints& axis_points) {
    const auto bundles = evaluate_factors(model, axis_points);
    const std::vector<FactorChannel> channels(model.dim(), FactorChannel::Value);
    return assemble_channels(model, bundles, channels);
}

DenseTensor mixed_partial(const SeparatedModel& model, const AxisPoints& axis_points, std::size_t i, std::size_t j) {
    if (i == j || i >= model.dim() || j >= model.dim()) throw IndexError("mixed partial needs two distinct axes");
    const auto bundles = evaluate_factors(model, axis_points);
    std::vector<FactorChannel> channels(model.dim(), FactorChannel::Value);
    channels[i] = FactorChannel::D1;
    channels[j] = FactorChannel::D1;
    return assemble_channels(model, bundles, channels);
}

double model_point_eval(const SeparatedModel& model, std::span<const double> x) {
    if (x.size() != model.dim()) throw DimensionError("point has wrong dimension");
    AxisPoints singleton;
    for (double xi : x) singleton.push_back({xi});
    return model_values(model, singleton)[0];
}

}  // namespace septensor
