#include "septensor/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "septensor/contraction.hpp"

namespace septensor {

std::string_view to_string(Decomposition kind) {
    switch (kind) {
        case Decomposition::CP: return "cp";
        case Decomposition::TT: return "tt";
        case Decomposition::Tucker: return "tucker";
    }
    return "?";
}

Decomposition parse_decomposition(std::string_view name) {
    if (name == "cp") return Decomposition::CP;
    if (name == "tt") return Decomposition::TT;
    if (name == "tucker") return Decomposition::Tucker;
    throw std::invalid_argument("unknown decomposition kind '" + std::string(name) + "'");
}

std::size_t shape_volume(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<std::size_t> row_major_strides(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t k = shape.size(); k-- > 1;) strides[k - 1] = strides[k] * shape[k];
    return strides;
}

// ---------------------------------------------------------------------------

DenseTensor::DenseTensor(Shape shape, double fill)
    : shape_(std::move(shape)), strides_(row_major_strides(shape_)), data_(shape_volume(shape_), fill) {
    for (auto e : shape_)
        if (e == 0) throw DimensionError("tensor extents must be positive");
}

DenseTensor::DenseTensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), strides_(row_major_strides(shape_)), data_(std::move(data)) {
    for (auto e : shape_)
        if (e == 0) throw DimensionError("tensor extents must be positive");
    if (data_.size() != shape_volume(shape_)) throw DimensionError("tensor data length != product of extents");
}

std::size_t DenseTensor::flat_index(std::span<const std::size_t> index) const {
    if (index.size() != shape_.size()) throw IndexError("index arity does not match tensor order");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < index.size(); ++k) {
        if (index[k] >= shape_[k]) throw IndexError("tensor index out of range");
        flat += index[k] * strides_[k];
    }
    return flat;
}

bool DenseTensor::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

// ---------------------------------------------------------------------------

void check_cp_parts(std::span<const FactorMatrix> factors) {
    if (factors.size() < 2) throw ArityError("CP assembly needs at least two factors");
    const std::size_t rank = factors[0].cols();
    for (const auto& f : factors)
        if (f.cols() != rank) throw DimensionError("CP factors must share the same rank");
}

void check_tt_parts(std::span<const TTCore> cores) {
    if (cores.size() < 2) throw ArityError("TT assembly needs at least two cores");
    if (cores.front().left_rank() != 1 || cores.back().right_rank() != 1)
        throw DimensionError("TT boundary ranks must be 1");
    for (std::size_t k = 0; k + 1 < cores.size(); ++k)
        if (cores[k].right_rank() != cores[k + 1].left_rank()) throw DimensionError("TT rank chain is broken");
}

void check_tucker_parts(const CoreTensor& core, std::span<const FactorMatrix> factors) {
    if (factors.size() < 2) throw ArityError("Tucker assembly needs at least two factors");
    if (core.order() != factors.size()) throw DimensionError("Tucker core order != number of factors");
    for (std::size_t k = 0; k < factors.size(); ++k)
        if (factors[k].cols() != core.shape()[k]) throw DimensionError("Tucker factor cols != core extent");
}

DenseTensor cp_assemble(std::span<const FactorMatrix> factors) {
    CpContraction c;
    return c.forward(factors);
}

DenseTensor tt_assemble(std::span<const TTCore> cores) {
    TtContraction c;
    return c.forward(cores);
}

DenseTensor tucker_assemble(const CoreTensor& core, std::span<const FactorMatrix> factors) {
    TuckerContraction c;
    return c.forward(core, factors);
}

CoreTensor superdiagonal_core(std::size_t order, std::size_t rank) {
    CoreTensor core(Shape(order, rank), 0.0);
    std::size_t stride = 0;
    for (std::size_t k = 0, s = 1; k < order; ++k, s *= rank) stride += s;
    for (std::size_t r = 0; r < rank; ++r) core.data()[r * stride] = 1.0;
    return core;
}

double relative_l2(const DenseTensor& pred, const DenseTensor& truth) {
    if (pred.shape() != truth.shape()) throw DimensionError("relative_l2: shape mismatch");
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double diff = pred[i] - truth[i];
        num += diff * diff;
        den += truth[i] * truth[i];
    }
    if (!(den > 0.0)) throw DegenerateReferenceError("relative_l2: reference tensor has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

double pointwise_oracle_checked(const DecompositionParts<double>& parts, std::span<const std::size_t> index) {
    switch (parts.kind) {
        case Decomposition::CP: check_cp_parts(parts.factors); break;
        case Decomposition::TT: check_tt_parts(parts.cores); break;
        case Decomposition::Tucker: check_tucker_parts(parts.core, parts.factors); break;
    }
    return pointwise_oracle(parts, index);
}

DenseTensor assemble(const DecompositionParts<double>& parts) {
    switch (parts.kind) {
        case Decomposition::CP: return cp_assemble(parts.factors);
        case Decomposition::TT: return tt_assemble(parts.cores);
        case Decomposition::Tucker: return tucker_assemble(parts.core, parts.factors);
    }
    throw std::logic_error("unreachable");
}

DecompositionParts<double> random_parts(Decomposition kind, Rng& rng, std::size_t max_order, std::size_t max_extent,
                                        std::size_t max_rank) {
    if (max_order < 2 || max_extent < 1 || max_rank < 1) throw std::invalid_argument("random_parts bounds too small");
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return lo + static_cast<std::size_t>(rng.next() % (hi - lo + 1));
    };
    auto fill = [&](std::span<double> v) {
        for (auto& e : v) e = rng.normal();
    };
    const std::size_t d = pick(2, max_order);
    DecompositionParts<double> parts;
    parts.kind = kind;
    switch (kind) {
        case Decomposition::CP: {
            const std::size_t r = pick(1, max_rank);
            for (std::size_t k = 0; k < d; ++k) {
                FactorMatrix f(pick(1, max_extent), r);
                fill(f.data());
                parts.factors.push_back(std::move(f));
            }
            break;
        }
        case Decomposition::TT: {
            std::vector<std::size_t> ranks(d + 1, 1);
            for (std::size_t k = 1; k < d; ++k) ranks[k] = pick(1, max_rank);
            for (std::size_t k = 0; k < d; ++k) {
                TTCore c(ranks[k], pick(1, max_extent), ranks[k + 1]);
                fill(c.data());
                parts.cores.push_back(std::move(c));
            }
            break;
        }
        case Decomposition::Tucker: {
            Shape cs;
            for (std::size_t k = 0; k < d; ++k) {
                cs.push_back(pick(1, max_rank));
                FactorMatrix f(pick(1, max_extent), cs.back());
                fill(f.data());
                parts.factors.push_back(std::move(f));
            }
            parts.core = CoreTensor(cs);
            fill(parts.core.data());
            break;
        }
    }
    return parts;
}

double oracle_max_deviation(const DecompositionParts<double>& parts) {
    const DenseTensor t = assemble(parts);
    const Shape ext = parts.extents();
    std::vector<std::size_t> idx(ext.size(), 0);
    double worst = 0.0;
    for (std::size_t flat = 0; flat < t.size(); ++flat) {
        worst = std::max(worst, std::abs(t[flat] - pointwise_oracle(parts, idx)));
        for (std::size_t k = ext.size(); k-- > 0;) {
            if (++idx[k] < ext[k]) break;
            idx[k] = 0;
        }
    }
    return worst;
}

}  // namespace septensor
