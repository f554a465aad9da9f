#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "septensor/contraction.hpp"
#include "septensor/network.hpp"
#include "septensor/tensor.hpp"

namespace septensor {

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

struct ModelSpec {
    Decomposition kind = Decomposition::CP;
    std::size_t dim = 2;
    std::size_t rank = 1;
    std::vector<NetworkConfig> networks;  // one per axis

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Spec with the default per-axis networks: `depth` layers, hidden width
/// `hidden_width` (0 means "same as rank"), output width set by the kind.
[[nodiscard]] ModelSpec make_model_spec(Decomposition kind, std::size_t dim, std::size_t rank,
                                        std::size_t hidden_width = 0, std::size_t depth = 4);

/// Same, with each network's input mapped affinely from its domain interval onto [-1, 1].
[[nodiscard]] ModelSpec make_model_spec(Decomposition kind, const std::vector<Interval>& domain, std::size_t rank,
                                        std::size_t hidden_width = 0, std::size_t depth = 4);

/// Bond dimensions R_0..R_d of a uniform-rank tensor train (R_0 = R_d = 1).
[[nodiscard]] std::vector<std::size_t> tt_ranks(std::size_t dim, std::size_t rank);

struct SlotRange {
    std::size_t offset = 0;
    std::size_t count = 0;
};

/// Per-axis networks plus, for Tucker, a trainable core. All trainables
/// live in one flat vector: network 0, ..., network d-1, core.
class SeparatedModel {
public:
    SeparatedModel() = default;
    SeparatedModel(ModelSpec spec, std::vector<double> parameters);

    /// Glorot networks and, for Tucker, an orthogonal core.
    static SeparatedModel create(const ModelSpec& spec, std::uint64_t seed);

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] std::size_t dim() const noexcept { return spec_.dim; }
    [[nodiscard]] std::span<const double> parameters() const noexcept { return params_; }
    [[nodiscard]] std::span<double> parameters() noexcept { return params_; }

    [[nodiscard]] SlotRange network_slots(std::size_t axis) const { return network_slots_.at(axis); }
    [[nodiscard]] SlotRange core_slots() const noexcept { return core_slots_; }
    [[nodiscard]] std::span<const double> network_parameters(std::size_t axis) const;

    /// Tucker core shape, or empty for CP/TT.
    [[nodiscard]] Shape core_shape() const;
    [[nodiscard]] CoreTensor core() const;

private:
    ModelSpec spec_;
    std::vector<double> params_;
    std::vector<SlotRange> network_slots_;
    SlotRange core_slots_;
};

/// Every trainable block: one range per network, then the Tucker core.
[[nodiscard]] std::vector<SlotRange> trainable_slots(const SeparatedModel& model);

using AxisPoints = std::vector<std::vector<double>>;

/// Solution grid and the per-axis first/second derivative grids.
struct GridBundle {
    AxisPoints axis_points;
    DenseTensor u;
    std::vector<DenseTensor> first;
    std::vector<DenseTensor> second;
};

enum class FactorChannel { Value, D1, D2 };

/// Rearrange per-axis network output rows into decomposition parts.
/// TT axis k rows have width R_k * R_{k+1}, entry (a, b) at column a * R_{k+1} + b.
template <class T>
DecompositionParts<T> parts_from_factors(const ModelSpec& spec, std::vector<BasicFactorMatrix<T>> factors,
                                         BasicCoreTensor<T> core) {
    DecompositionParts<T> parts;
    parts.kind = spec.kind;
    if (spec.kind == Decomposition::TT) {
        const auto ranks = tt_ranks(spec.dim, spec.rank);
        for (std::size_t k = 0; k < spec.dim; ++k) {
            const auto& f = factors[k];
            const std::size_t left = ranks[k], right = ranks[k + 1];
            if (f.cols() != left * right) throw DimensionError("TT factor rows have the wrong width");
            BasicTTCore<T> c(left, f.rows(), right);
            for (std::size_t a = 0; a < left; ++a)
                for (std::size_t i = 0; i < f.rows(); ++i)
                    for (std::size_t b = 0; b < right; ++b) c(a, i, b) = f(i, a * right + b);
            parts.cores.push_back(std::move(c));
        }
    } else {
        parts.factors = std::move(factors);
        if (spec.kind == Decomposition::Tucker) parts.core = std::move(core);
    }
    return parts;
}

/// Assembly of one factor selection with its adjoint, working directly on
/// network-output layout so gradients come back in the same layout.
class FactorAssembly {
public:
    FactorAssembly(const ModelSpec& spec, const CoreTensor* core);

    DenseTensor forward(std::vector<FactorMatrix> factors);

    struct Gradients {
        std::vector<FactorMatrix> factors;
        CoreTensor core;  // Tucker only
    };
    [[nodiscard]] Gradients backward(const DenseTensor& grad) const;

private:
    const ModelSpec* spec_;
    const CoreTensor* core_;
    std::vector<std::size_t> widths_;
    CpContraction cp_;
    TtContraction tt_;
    TuckerContraction tucker_;
};

/// Per-axis network evaluation on the given points (once per point).
[[nodiscard]] std::vector<FactorBundle> evaluate_factors(const SeparatedModel& model, const AxisPoints& axis_points);

/// Assemble the grid for one channel choice per axis.
[[nodiscard]] DenseTensor assemble_channels(const SeparatedModel& model, const std::vector<FactorBundle>& bundles,
                                            std::span<const FactorChannel> channels);

[[nodiscard]] GridBundle model_forward(const SeparatedModel& model, const AxisPoints& axis_points);

/// Solution grid only.
[[nodiscard]] DenseTensor model_values(const SeparatedModel& model, const AxisPoints& axis_points);

/// d^2 u / dx_i dx_j for i != j by substituting two first-derivative factors.
[[nodiscard]] DenseTensor mixed_partial(const SeparatedModel& model, const AxisPoints& axis_points, std::size_t i,
                                        std::size_t j);

[[nodiscard]] double model_point_eval(const SeparatedModel& model, std::span<const double> x);

}  // namespace septensor
