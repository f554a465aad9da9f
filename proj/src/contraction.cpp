#include "septensor/contraction.hpp"

#include <Eigen/Core>

namespace septensor {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

ConstMapMat view(std::span<const double> data, std::size_t rows, std::size_t cols) {
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}
MapMat view(std::span<double> data, std::size_t rows, std::size_t cols) {
    return {data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

void check_grad_shape(const DenseTensor& grad, const Shape& expected) {
    if (grad.shape() != expected) throw DimensionError("adjoint gradient shape does not match forward output");
}

}  // namespace

// ---------------------------------------------------------------------------
// CP

DenseTensor CpContraction::forward(std::span<const FactorMatrix> factors) {
    check_cp_parts(factors);
    const std::size_t d = factors.size();
    const std::size_t rank = factors[0].cols();
    factors_.assign(factors.begin(), factors.end());
    shape_.clear();
    for (const auto& f : factors) shape_.push_back(f.rows());

    khatri_rao_.assign(d, {});
    khatri_rao_[d - 1].assign(factors[d - 1].data().begin(), factors[d - 1].data().end());
    for (std::size_t k = d - 1; k-- > 1;) {
        const auto& next = khatri_rao_[k + 1];
        const std::size_t tail = next.size() / rank;
        const std::size_t n = factors[k].rows();
        auto& out = khatri_rao_[k];
        out.resize(n * tail * rank);
        for (std::size_t i = 0; i < n; ++i) {
            const double* f = &factors[k](i, 0);
            for (std::size_t j = 0; j < tail; ++j) {
                const double* src = next.data() + j * rank;
                double* dst = out.data() + (i * tail + j) * rank;
                for (std::size_t r = 0; r < rank; ++r) dst[r] = f[r] * src[r];
            }
        }
    }

    const std::size_t rest = khatri_rao_[1].size() / rank;
    DenseTensor out(shape_);
    view(out.data(), shape_[0], rest).noalias() =
        view(factors[0].data(), shape_[0], rank) * view(std::span<const double>(khatri_rao_[1]), rest, rank).transpose();
    return out;
}

std::vector<FactorMatrix> CpContraction::backward(const DenseTensor& grad) const {
    check_grad_shape(grad, shape_);
    const std::size_t d = factors_.size();
    const std::size_t rank = factors_[0].cols();
    const std::size_t rest = khatri_rao_[1].size() / rank;

    std::vector<FactorMatrix> out;
    out.reserve(d);
    for (const auto& f : factors_) out.emplace_back(f.rows(), rank);

    const auto g = view(grad.data(), shape_[0], rest);
    view(out[0].data(), shape_[0], rank).noalias() = g * view(std::span<const double>(khatri_rao_[1]), rest, rank);

    std::vector<double> dk(rest * rank);
    view(std::span<double>(dk), rest, rank).noalias() = g.transpose() * view(factors_[0].data(), shape_[0], rank);

    for (std::size_t k = 1; k + 1 < d; ++k) {
        const auto& next = khatri_rao_[k + 1];
        const std::size_t tail = next.size() / rank;
        const std::size_t n = factors_[k].rows();
        std::vector<double> dnext(tail * rank, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* f = &factors_[k](i, 0);
            double* df = &out[k](i, 0);
            for (std::size_t j = 0; j < tail; ++j) {
                const double* gk = dk.data() + (i * tail + j) * rank;
                const double* kn = next.data() + j * rank;
                double* dn = dnext.data() + j * rank;
                for (std::size_t r = 0; r < rank; ++r) {
                    df[r] += gk[r] * kn[r];
                    dn[r] += gk[r] * f[r];
                }
            }
        }
        dk = std::move(dnext);
    }
    std::copy(dk.begin(), dk.end(), out[d - 1].data().begin());
    return out;
}

// ---------------------------------------------------------------------------
// Tensor train

DenseTensor TtContraction::forward(std::span<const TTCore> cores) {
    check_tt_parts(cores);
    const std::size_t d = cores.size();
    cores_.assign(cores.begin(), cores.end());
    shape_.clear();
    for (const auto& c : cores) shape_.push_back(c.points());

    partial_.assign(d, {});
    partial_[0].assign(cores[0].data().begin(), cores[0].data().end());
    std::size_t leading = cores[0].points();
    for (std::size_t k = 1; k < d; ++k) {
        const auto& c = cores[k];
        partial_[k].resize(leading * c.points() * c.right_rank());
        view(std::span<double>(partial_[k]), leading, c.points() * c.right_rank()).noalias() =
            view(std::span<const double>(partial_[k - 1]), leading, c.left_rank()) *
            view(c.data(), c.left_rank(), c.points() * c.right_rank());
        leading *= c.points();
    }
    return DenseTensor(shape_, partial_[d - 1]);
}

std::vector<TTCore> TtContraction::backward(const DenseTensor& grad) const {
    check_grad_shape(grad, shape_);
    const std::size_t d = cores_.size();
    std::vector<TTCore> out;
    out.reserve(d);
    for (const auto& c : cores_) out.emplace_back(c.left_rank(), c.points(), c.right_rank());

    std::vector<double> dm(grad.data().begin(), grad.data().end());
    std::size_t leading = grad.size();
    for (std::size_t k = d; k-- > 1;) {
        const auto& c = cores_[k];
        leading /= c.points();
        const auto g = view(std::span<const double>(dm), leading, c.points() * c.right_rank());
        view(out[k].data(), c.left_rank(), c.points() * c.right_rank()).noalias() =
            view(std::span<const double>(partial_[k - 1]), leading, c.left_rank()).transpose() * g;
        std::vector<double> prev(leading * c.left_rank());
        view(std::span<double>(prev), leading, c.left_rank()).noalias() =
            g * view(c.data(), c.left_rank(), c.points() * c.right_rank()).transpose();
        dm = std::move(prev);
    }
    std::copy(dm.begin(), dm.end(), out[0].data().begin());
    return out;
}

// ---------------------------------------------------------------------------
// Tucker

DenseTensor TuckerContraction::forward(const CoreTensor& core, std::span<const FactorMatrix> factors) {
    check_tucker_parts(core, factors);
    const std::size_t d = factors.size();
    factors_.assign(factors.begin(), factors.end());
    core_shape_ = core.shape();
    shape_.clear();
    for (const auto& f : factors) shape_.push_back(f.rows());

    // Contract the leading mode and rotate it to the back:
    // (m_k, rest) -> (rest, n_k). After d steps the layout is (n_1, ..., n_d).
    stage_.assign(d + 1, {});
    stage_[0].assign(core.data().begin(), core.data().end());
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t m = core_shape_[k];
        const std::size_t n = shape_[k];
        const std::size_t rest = stage_[k].size() / m;
        stage_[k + 1].resize(rest * n);
        view(std::span<double>(stage_[k + 1]), rest, n).noalias() =
            view(std::span<const double>(stage_[k]), m, rest).transpose() * view(factors[k].data(), n, m).transpose();
    }
    DenseTensor out(shape_, std::move(stage_[d]));
    stage_.pop_back();
    return out;
}

TuckerContraction::Gradients TuckerContraction::backward(const DenseTensor& grad) const {
    check_grad_shape(grad, shape_);
    const std::size_t d = factors_.size();
    Gradients out;
    out.factors.reserve(d);
    for (const auto& f : factors_) out.factors.emplace_back(f.rows(), f.cols());

    std::vector<double> db(grad.data().begin(), grad.data().end());
    for (std::size_t k = d; k-- > 0;) {
        const std::size_t m = core_shape_[k];
        const std::size_t n = shape_[k];
        const std::size_t rest = stage_[k].size() / m;
        const auto g = view(std::span<const double>(db), rest, n);
        const auto a = view(std::span<const double>(stage_[k]), m, rest);
        view(out.factors[k].data(), n, m).noalias() = g.transpose() * a.transpose();
        std::vector<double> da(m * rest);
        view(std::span<double>(da), m, rest).noalias() = view(factors_[k].data(), n, m).transpose() * g.transpose();
        db = std::move(da);
    }
    out.core = CoreTensor(core_shape_, std::move(db));
    return out;
}

// ---------------------------------------------------------------------------
// Tucker with a summed operator


TuckerOperatorContraction::Output TuckerOperatorContraction::forward(const CoreTensor& core,
                                                                     std::span<const FactorMatrix> factors,
                                                                     std::span<const FactorMatrix* const> op_factors,
                                                                     bool want_value) {
    check_tucker_parts(core, factors);
    const std::size_t d = factors.size();
    if (op_factors.size() != d) throw DimensionError("operator factor list must have one entry per axis");
    factors_.assign(factors.begin(), factors.end());
    op_factors_.assign(d, FactorMatrix());
    joined_.assign(d, FactorMatrix());
    for (std::size_t k = 0; k < d; ++k) {
        if (!op_factors[k]) continue;
        const auto& b = *op_factors[k];
        if (b.rows() != factors[k].rows() || b.cols() != factors[k].cols())
            throw DimensionError("operator factor shape differs from the value factor");
        op_factors_[k] = b;
        const std::size_t n = b.rows(), m = b.cols();
        joined_[k] = FactorMatrix(n, 2 * m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                joined_[k](i, j) = factors[k](i, j);
                joined_[k](i, m + j) = b(i, j);
            }
    }
    core_shape_ = core.shape();
    shape_.clear();
    for (const auto& f : factors) shape_.push_back(f.rows());
    want_value_ = want_value;

    // stage_[k] is V (m x rest), or [S; V] (2m x rest) once an operator
    // factor has been applied.
    stage_.assign(d + 1, {});
    stacked_.assign(d + 1, false);
    stage_[0].assign(core.data().begin(), core.data().end());
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t m = core_shape_[k];
        const std::size_t n = shape_[k];
        const bool stacked = stacked_[k];
        const bool has_op = op_factors_[k].rows() > 0;
        const std::size_t rest = stage_[k].size() / (stacked ? 2 * m : m);
        const std::span<const double> in(stage_[k]);
        const auto v_in = in.subspan(stacked ? m * rest : 0, m * rest);
        const auto fk = view(factors_[k].data(), n, m);

        const bool out_stacked = stacked || has_op;
        const bool need_v = k + 1 < d || want_value;
        stacked_[k + 1] = out_stacked;
        auto& out = stage_[k + 1];
        out.assign((out_stacked ? 2 : 1) * rest * n, 0.0);
        const std::span<double> o(out);
        if (out_stacked) {
            auto s_out = view(o.subspan(0, rest * n), rest, n);
            if (stacked && has_op)
                s_out.noalias() = view(in, 2 * m, rest).transpose() * view(joined_[k].data(), n, 2 * m).transpose();
            else if (stacked)
                s_out.noalias() = view(in.subspan(0, m * rest), m, rest).transpose() * fk.transpose();
            else
                s_out.noalias() = view(v_in, m, rest).transpose() * view(op_factors_[k].data(), n, m).transpose();
        }
        if (need_v)
            view(o.subspan(out_stacked ? rest * n : 0, rest * n), rest, n).noalias() =
                view(v_in, m, rest).transpose() * fk.transpose();
    }

    const std::size_t total = shape_volume(shape_);
    Output result;
    auto& last = stage_[d];
    if (stacked_[d]) {
        result.op = DenseTensor(shape_, std::vector<double>(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(total)));
        if (want_value)
            result.value = DenseTensor(shape_, std::vector<double>(last.begin() + static_cast<std::ptrdiff_t>(total), last.end()));
    } else {
        result.op = DenseTensor(shape_, 0.0);
        if (want_value) result.value = DenseTensor(shape_, std::move(last));
    }
    stage_.pop_back();
    return result;
}

TuckerOperatorContraction::Gradients TuckerOperatorContraction::backward(const DenseTensor* grad_value,
                                                                         const DenseTensor& grad_op) const {
    check_grad_shape(grad_op, shape_);
    if (grad_value) {
        if (!want_value_) throw std::logic_error("value gradient given but the value grid was not requested");
        check_grad_shape(*grad_value, shape_);
    }
    const std::size_t d = factors_.size();
    Gradients out;
    for (std::size_t k = 0; k < d; ++k) {
        out.factors.emplace_back(factors_[k].rows(), factors_[k].cols());
        out.op_factors.push_back(op_factors_[k].rows() > 0 ? FactorMatrix(factors_[k].rows(), factors_[k].cols())
                                                           : FactorMatrix());
    }

    // g holds the gradient of stage k+1 in the same layout: gS' (if stacked)
    // followed by gV'.
    const std::size_t total = shape_volume(shape_);
    std::vector<double> g;
    bool have_gv = grad_value != nullptr;
    if (stacked_[d]) {
        g.assign(2 * total, 0.0);
        std::copy(grad_op.data().begin(), grad_op.data().end(), g.begin());
        if (have_gv) std::copy(grad_value->data().begin(), grad_value->data().end(), g.begin() + static_cast<std::ptrdiff_t>(total));
    } else if (have_gv) {
        g.assign(grad_value->data().begin(), grad_value->data().end());
    }

    for (std::size_t k = d; k-- > 0;) {
        const std::size_t m = core_shape_[k];
        const std::size_t n = shape_[k];
        const bool stacked = stacked_[k];
        const bool have_gs = stacked_[k + 1];
        const bool has_op = op_factors_[k].rows() > 0;
        const std::size_t rest = stage_[k].size() / (stacked ? 2 * m : m);
        if (!have_gs && !have_gv) break;

        const std::span<const double> in(stage_[k]);
        const auto s_in = view(in.subspan(0, m * rest), m, rest);
        const auto v_in = view(in.subspan(stacked ? m * rest : 0, m * rest), m, rest);
        const std::span<const double> gspan(g);
        const auto gs = view(gspan.subspan(0, have_gs ? rest * n : 0), have_gs ? rest : 0, n);
        const auto gv = view(gspan.subspan(have_gs ? rest * n : 0, have_gv ? rest * n : 0), have_gv ? rest : 0, n);
        const auto fk = view(factors_[k].data(), n, m);
        auto dA = view(out.factors[k].data(), n, m);

        std::vector<double> next((stacked ? 2 : 1) * m * rest, 0.0);
        const std::span<double> nx(next);
        auto next_gv = view(nx.subspan(stacked ? m * rest : 0, m * rest), m, rest);
        if (have_gs) {
            if (stacked && has_op) {
                RowMat both = gs.transpose() * view(in, 2 * m, rest).transpose();
                dA += both.leftCols(static_cast<Eigen::Index>(m));
                view(out.op_factors[k].data(), n, m) = both.rightCols(static_cast<Eigen::Index>(m));
                view(nx, 2 * m, rest).noalias() = view(joined_[k].data(), n, 2 * m).transpose() * gs.transpose();
            } else if (stacked) {
                dA.noalias() += gs.transpose() * s_in.transpose();
                view(nx.subspan(0, m * rest), m, rest).noalias() = fk.transpose() * gs.transpose();
            } else {
                view(out.op_factors[k].data(), n, m).noalias() = gs.transpose() * v_in.transpose();
                next_gv.noalias() = view(op_factors_[k].data(), n, m).transpose() * gs.transpose();
            }
        }
        if (have_gv) {
            dA.noalias() += gv.transpose() * v_in.transpose();
            next_gv.noalias() += fk.transpose() * gv.transpose();
        }
        have_gv = have_gv || (have_gs && has_op);
        g = std::move(next);
    }
    if (!have_gv || g.size() != shape_volume(core_shape_)) g.assign(shape_volume(core_shape_), 0.0);
    out.core = CoreTensor(core_shape_, std::move(g));
    return out;
}

}  // namespace septensor
