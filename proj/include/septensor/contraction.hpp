#pragma once

// Fast assembly kernels that remember what they need for the adjoint pass.
// Each object records one forward contraction; backward() maps a gradient
// with respect to the assembled tensor back onto the inputs.

#include <span>
#include <vector>

#include "septensor/tensor.hpp"

namespace septensor {

class CpContraction {
public:
    DenseTensor forward(std::span<const FactorMatrix> factors);
    /// Gradients with respect to each factor, same shapes as the inputs.
    [[nodiscard]] std::vector<FactorMatrix> backward(const DenseTensor& grad) const;

private:
    std::vector<FactorMatrix> factors_;
    // khatri_rao_[k] is the row-wise Khatri-Rao product of factors k..d-1,
    // shape (n_k * ... * n_{d-1}) x R. Entry 0 is unused.
    std::vector<std::vector<double>> khatri_rao_;
    Shape shape_;
};

class TtContraction {
public:
    DenseTensor forward(std::span<const TTCore> cores);
    [[nodiscard]] std::vector<TTCore> backward(const DenseTensor& grad) const;

private:
    std::vector<TTCore> cores_;
    // partial_[k]: (n_0 ... n_k) x R_k left-to-right chain product.
    std::vector<std::vector<double>> partial_;
    Shape shape_;
};

class TuckerContraction {
public:
    DenseTensor forward(const CoreTensor& core, std::span<const FactorMatrix> factors);

    struct Gradients {
        CoreTensor core;
        std::vector<FactorMatrix> factors;
    };
    [[nodiscard]] Gradients backward(const DenseTensor& grad) const;

private:
    // Mode products applied one axis at a time. stage_[k] holds the tensor
    // before contracting axis k, laid out with the k-th mode leading and the
    // already-contracted modes trailing.
    std::vector<std::vector<double>> stage_;
    std::vector<FactorMatrix> factors_;
    Shape core_shape_;
    Shape shape_;
};

/// Value grid V = C x_1 A_1 ... x_d A_d and, in the same sweep, the operator
/// grid S = sum_j C x_1 A_1 ... x_j B_j ... x_d A_d for the axes j that have
/// an operator factor B_j. Partial products are shared between the terms.
class TuckerOperatorContraction {
public:
    struct Output {
        DenseTensor value;  // empty unless requested
        DenseTensor op;
    };
    Output forward(const CoreTensor& core, std::span<const FactorMatrix> factors,
                   std::span<const FactorMatrix* const> op_factors, bool want_value);

    struct Gradients {
        CoreTensor core;
        std::vector<FactorMatrix> factors;
        std::vector<FactorMatrix> op_factors;  // default-constructed where no operator
    };
    /// `grad_value` may be null when the value grid does not enter the loss.
    [[nodiscard]] Gradients backward(const DenseTensor* grad_value, const DenseTensor& grad_op) const;

private:
    std::vector<std::vector<double>> stage_;
    std::vector<bool> stacked_;
    std::vector<FactorMatrix> factors_;
    std::vector<FactorMatrix> op_factors_;
    std::vector<FactorMatrix> joined_;  // [A_k B_k], n_k x 2R
    Shape core_shape_;
    Shape shape_;
    bool want_value_ = false;
};

}  // namespace septensor
