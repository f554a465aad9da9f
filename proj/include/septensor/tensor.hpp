#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "septensor/errors.hpp"
#include "septensor/rng.hpp"

namespace septensor {

enum class Decomposition { CP, TT, Tucker };

[[nodiscard]] std::string_view to_string(Decomposition kind);
/// Accepts "cp", "tt", "tucker" (case-sensitive). Throws std::invalid_argument.
[[nodiscard]] Decomposition parse_decomposition(std::string_view name);

using Shape = std::vector<std::size_t>;

[[nodiscard]] std::size_t shape_volume(const Shape& shape);
[[nodiscard]] std::vector<std::size_t> row_major_strides(const Shape& shape);

/// Row-major d-dimensional array of doubles.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(Shape shape, double fill = 0.0);
    DenseTensor(Shape shape, std::vector<double> data);

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] const std::vector<std::size_t>& strides() const noexcept { return strides_; }
    [[nodiscard]] std::size_t order() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    [[nodiscard]] std::span<double> data() noexcept { return data_; }
    [[nodiscard]] std::span<const double> data() const noexcept { return data_; }
    [[nodiscard]] std::vector<double>& storage() noexcept { return data_; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    /// Bounds-checked flat offset of a multi-index.
    [[nodiscard]] std::size_t flat_index(std::span<const std::size_t> index) const;
    [[nodiscard]] double at(std::span<const std::size_t> index) const { return data_[flat_index(index)]; }
    double& at(std::span<const std::size_t> index) { return data_[flat_index(index)]; }

    [[nodiscard]] bool all_finite() const noexcept;

private:
    Shape shape_;
    std::vector<std::size_t> strides_;
    std::vector<double> data_;
};

/// n_i x R matrix, row-major. Row j holds the outputs at the j-th axis point.
template <class T>
class BasicFactorMatrix {
public:
    BasicFactorMatrix() = default;
    BasicFactorMatrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {
        if (rows == 0 || cols == 0) throw DimensionError("factor matrix needs rows >= 1 and cols >= 1");
    }
    BasicFactorMatrix(std::size_t rows, std::size_t cols, std::vector<T> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (rows == 0 || cols == 0) throw DimensionError("factor matrix needs rows >= 1 and cols >= 1");
        if (data_.size() != rows * cols) throw DimensionError("factor matrix data length != rows * cols");
    }

    [[nodiscard]] std::size_t rows() const noexcept { return rows_; }
    [[nodiscard]] std::size_t cols() const noexcept { return cols_; }
    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

    /// Copy of rows [first, first + count).
    [[nodiscard]] BasicFactorMatrix row_block(std::size_t first, std::size_t count) const {
        if (first + count > rows_ || count == 0) throw IndexError("row block out of range");
        return BasicFactorMatrix(count, cols_,
                                 std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(first * cols_),
                                                data_.begin() + static_cast<std::ptrdiff_t>((first + count) * cols_)));
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// R_{k-1} x n_k x R_k tensor-train core.
template <class T>
class BasicTTCore {
public:
    BasicTTCore() = default;
    BasicTTCore(std::size_t left, std::size_t points, std::size_t right, T fill = T{})
        : left_(left), points_(points), right_(right), data_(left * points * right, fill) {
        if (left == 0 || points == 0 || right == 0) throw DimensionError("TT core extents must be >= 1");
    }
    BasicTTCore(std::size_t left, std::size_t points, std::size_t right, std::vector<T> data)
        : left_(left), points_(points), right_(right), data_(std::move(data)) {
        if (left == 0 || points == 0 || right == 0) throw DimensionError("TT core extents must be >= 1");
        if (data_.size() != left * points * right) throw DimensionError("TT core data length mismatch");
    }

    [[nodiscard]] std::size_t left_rank() const noexcept { return left_; }
    [[nodiscard]] std::size_t points() const noexcept { return points_; }
    [[nodiscard]] std::size_t right_rank() const noexcept { return right_; }
    T& operator()(std::size_t a, std::size_t i, std::size_t b) { return data_[(a * points_ + i) * right_ + b]; }
    const T& operator()(std::size_t a, std::size_t i, std::size_t b) const {
        return data_[(a * points_ + i) * right_ + b];
    }
    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

private:
    std::size_t left_ = 0;
    std::size_t points_ = 0;
    std::size_t right_ = 0;
    std::vector<T> data_;
};

/// Tucker core of shape (R_1, ..., R_d), row-major.
template <class T>
class BasicCoreTensor {
public:
    BasicCoreTensor() = default;
    explicit BasicCoreTensor(Shape shape, T fill = T{})
        : shape_(std::move(shape)), data_(shape_volume(shape_), fill) {
        validate();
    }
    BasicCoreTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate();
        if (data_.size() != shape_volume(shape_)) throw DimensionError("core tensor data length mismatch");
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t order() const noexcept { return shape_.size(); }
    [[nodiscard]] std::span<T> data() noexcept { return data_; }
    [[nodiscard]] std::span<const T> data() const noexcept { return data_; }

private:
    void validate() const {
        for (auto e : shape_)
            if (e == 0) throw DimensionError("core tensor extents must be >= 1");
    }

    Shape shape_;
    std::vector<T> data_;
};

using FactorMatrix = BasicFactorMatrix<double>;
using TTCore = BasicTTCore<double>;
using CoreTensor = BasicCoreTensor<double>;

/// Assembled tensor T[i] = sum_r prod_k A_k[i_k, r].
[[nodiscard]] DenseTensor cp_assemble(std::span<const FactorMatrix> factors);
/// Assembled tensor T[i] = A_1[:, i_1, :] A_2[:, i_2, :] ... A_d[:, i_d, :].
[[nodiscard]] DenseTensor tt_assemble(std::span<const TTCore> cores);
/// Assembled tensor T[i] = sum_r C[r] prod_k A_k[i_k, r_k].
[[nodiscard]] DenseTensor tucker_assemble(const CoreTensor& core, std::span<const FactorMatrix> factors);

/// Superdiagonal core: C[r,...,r] = 1, zero elsewhere.
[[nodiscard]] CoreTensor superdiagonal_core(std::size_t order, std::size_t rank);

/// Shape checks shared by the fast kernels and the oracle.
void check_cp_parts(std::span<const FactorMatrix> factors);
void check_tt_parts(std::span<const TTCore> cores);
void check_tucker_parts(const CoreTensor& core, std::span<const FactorMatrix> factors);

/// ||pred - truth||_2 / ||truth||_2 over flattened entries.
[[nodiscard]] double relative_l2(const DenseTensor& pred, const DenseTensor& truth);

/// The parts of one decomposition, generic over the scalar so the naive
/// oracle can run on plain doubles and on tape variables alike.
template <class T>
struct DecompositionParts {
    Decomposition kind = Decomposition::CP;
    std::vector<BasicFactorMatrix<T>> factors;  // CP, Tucker
    std::vector<BasicTTCore<T>> cores;          // TT
    BasicCoreTensor<T> core;                    // Tucker

    [[nodiscard]] Shape extents() const {
        Shape s;
        if (kind == Decomposition::TT)
            for (const auto& c : cores) s.push_back(c.points());
        else
            for (const auto& f : factors) s.push_back(f.rows());
        return s;
    }
};

/// Single entry of the assembled tensor by the plain summation definition.
template <class T>
T pointwise_oracle(const DecompositionParts<T>& parts, std::span<const std::size_t> index) {
    const Shape ext = parts.extents();
    if (index.size() != ext.size()) throw IndexError("oracle index has wrong arity");
    for (std::size_t k = 0; k < ext.size(); ++k)
        if (index[k] >= ext[k]) throw IndexError("oracle index out of range");
    const std::size_t d = ext.size();

    switch (parts.kind) {
        case Decomposition::CP: {
            const std::size_t rank = parts.factors.front().cols();
            T total{};
            for (std::size_t r = 0; r < rank; ++r) {
                T term = parts.factors[0](index[0], r);
                for (std::size_t k = 1; k < d; ++k) term = term * parts.factors[k](index[k], r);
                total = total + term;
            }
            return total;
        }
        case Decomposition::TT: {
            // Row vector times each core slice in turn.
            std::vector<T> row(parts.cores[0].right_rank());
            for (std::size_t b = 0; b < row.size(); ++b) row[b] = parts.cores[0](0, index[0], b);
            for (std::size_t k = 1; k < d; ++k) {
                const auto& core = parts.cores[k];
                std::vector<T> next(core.right_rank());
                for (std::size_t b = 0; b < core.right_rank(); ++b) {
                    T acc = row[0] * core(0, index[k], b);
                    for (std::size_t a = 1; a < core.left_rank(); ++a) acc = acc + row[a] * core(a, index[k], b);
                    next[b] = acc;
                }
                row = std::move(next);
            }
            return row[0];
        }
        case Decomposition::Tucker: {
            const Shape& cs = parts.core.shape();
            std::vector<std::size_t> r(d, 0);
            T total{};
            const auto core_data = parts.core.data();
            for (std::size_t flat = 0; flat < core_data.size(); ++flat) {
                T term = core_data[flat];
                for (std::size_t k = 0; k < d; ++k) term = term * parts.factors[k](index[k], r[k]);
                total = total + term;
                for (std::size_t k = d; k-- > 0;) {
                    if (++r[k] < cs[k]) break;
                    r[k] = 0;
                }
            }
            return total;
        }
    }
    return T{};
}

/// Double-typed convenience wrapper that also validates the parts.
[[nodiscard]] double pointwise_oracle_checked(const DecompositionParts<double>& parts,
                                              std::span<const std::size_t> index);

/// Full tensor from the fast assembly path for the given parts.
[[nodiscard]] DenseTensor assemble(const DecompositionParts<double>& parts);

/// Random instance with 2 <= d <= max_order, extents in [1, max_extent],
/// ranks in [1, max_rank] and standard normal entries.
[[nodiscard]] DecompositionParts<double> random_parts(Decomposition kind, Rng& rng, std::size_t max_order = 4,
                                                      std::size_t max_extent = 5, std::size_t max_rank = 4);

/// Largest |assemble - oracle| over every index of the instance.
[[nodiscard]] double oracle_max_deviation(const DecompositionParts<double>& parts);

}  // namespace septensor
