#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "septensor/tensor.hpp"

using namespace septensor;

namespace {

FactorMatrix random_factor(Rng& rng, std::size_t rows, std::size_t cols) {
    FactorMatrix f(rows, cols);
    for (auto& v : f.data()) v = rng.normal();
    return f;
}

TTCore random_core(Rng& rng, std::size_t l, std::size_t n, std::size_t r) {
    TTCore c(l, n, r);
    for (auto& v : c.data()) v = rng.normal();
    return c;
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(DenseTensor, StridesAndIndexing) {
    DenseTensor t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.strides(), (std::vector<std::size_t>{12, 4, 1}));
    const std::size_t idx[] = {1, 2, 3};
    EXPECT_EQ(t.flat_index(idx), 23u);
    const std::size_t bad[] = {2, 0, 0};
    EXPECT_THROW((void)t.flat_index(bad), IndexError);
    EXPECT_THROW(DenseTensor({2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(CpAssemble, AllOnesRankOne) {
    std::vector<FactorMatrix> f{FactorMatrix(3, 1, 1.0), FactorMatrix(2, 1, 1.0)};
    const auto t = cp_assemble(f);
    EXPECT_EQ(t.shape(), (Shape{3, 2}));
    for (double v : t.data()) EXPECT_EQ(v, 1.0);
}

TEST(CpAssemble, SeparableProduct) {
    std::vector<FactorMatrix> f(3, FactorMatrix(2, 1, std::vector<double>{1.0, 2.0}));
    const auto t = cp_assemble(f);
    const std::size_t last[] = {1, 1, 1};
    EXPECT_EQ(t.at(last), 8.0);
    const std::size_t mid[] = {0, 1, 1};
    EXPECT_EQ(t.at(mid), 4.0);
}

TEST(CpAssemble, SeededMatchesOracle) {
    Rng rng(11);
    DecompositionParts<double> parts;
    parts.kind = Decomposition::CP;
    for (std::size_t n : {3, 4, 5}) parts.factors.push_back(random_factor(rng, n, 4));
    EXPECT_LE(oracle_max_deviation(parts), 1e-12);
}

TEST(CpAssemble, Errors) {
    std::vector<FactorMatrix> mismatch{FactorMatrix(2, 2), FactorMatrix(2, 3)};
    EXPECT_THROW((void)cp_assemble(mismatch), DimensionError);
    std::vector<FactorMatrix> single{FactorMatrix(2, 2)};
    EXPECT_THROW((void)cp_assemble(single), ArityError);
}

TEST(CpAssemble, MultilinearInOneColumn) {
    Rng rng(3);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 3), random_factor(rng, 4, 3), random_factor(rng, 2, 3)};
    const auto base = cp_assemble(f);
    auto scaled = f;
    for (std::size_t i = 0; i < 4; ++i) scaled[1](i, 2) *= 2.5;
    const auto grown = cp_assemble(scaled);

    // Isolate column 2 by zeroing the other columns of one factor.
    auto only = f;
    for (std::size_t i = 0; i < 3; ++i) {
        only[0](i, 0) = 0.0;
        only[0](i, 1) = 0.0;
    }
    const auto contribution = cp_assemble(only);
    for (std::size_t i = 0; i < base.size(); ++i)
        EXPECT_NEAR(grown[i] - base[i], 1.5 * contribution[i], 1e-12);
}

TEST(TtAssemble, OrderTwoIsMatrixProduct) {
    Rng rng(5);
    std::vector<TTCore> cores{random_core(rng, 1, 3, 2), random_core(rng, 2, 4, 1)};
    const auto t = tt_assemble(cores);
    ASSERT_EQ(t.shape(), (Shape{3, 4}));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double expect = 0.0;
            for (std::size_t a = 0; a < 2; ++a) expect += cores[0](0, i, a) * cores[1](a, j, 0);
            EXPECT_NEAR(t[i * 4 + j], expect, 1e-14);
        }
}

TEST(TtAssemble, ZeroCores) {
    std::vector<TTCore> cores{TTCore(1, 2, 2), TTCore(2, 3, 2), TTCore(2, 2, 1)};
    const auto t = tt_assemble(cores);
    for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(TtAssemble, SeededChainMatchesOracle) {
    Rng rng(8);
    DecompositionParts<double> parts;
    parts.kind = Decomposition::TT;
    parts.cores = {random_core(rng, 1, 3, 2), random_core(rng, 2, 4, 2), random_core(rng, 2, 2, 1)};
    EXPECT_LE(oracle_max_deviation(parts), 1e-12);
    const auto t = tt_assemble(parts.cores);
    const std::size_t idx[] = {2, 1, 0};
    EXPECT_NEAR(pointwise_oracle(parts, std::span<const std::size_t>(idx)), t.at(idx), 1e-12);
}

TEST(TtAssemble, BrokenChain) {
    std::vector<TTCore> cores{TTCore(1, 2, 2), TTCore(3, 2, 1)};
    EXPECT_THROW((void)tt_assemble(cores), DimensionError);
    std::vector<TTCore> open{TTCore(2, 2, 2), TTCore(2, 2, 1)};
    EXPECT_THROW((void)tt_assemble(open), DimensionError);
}

TEST(TuckerAssemble, SuperdiagonalCoreIsCp) {
    Rng rng(13);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 3), random_factor(rng, 4, 3), random_factor(rng, 5, 3)};
    EXPECT_LE(max_abs_diff(tucker_assemble(superdiagonal_core(3, 3), f), cp_assemble(f)), 1e-14);
}

TEST(TuckerAssemble, ZeroCore) {
    Rng rng(2);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 2), random_factor(rng, 2, 2)};
    const auto t = tucker_assemble(CoreTensor({2, 2}), f);
    for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(TuckerAssemble, SeededMixedRanks) {
    Rng rng(21);
    DecompositionParts<double> parts;
    parts.kind = Decomposition::Tucker;
    parts.factors = {random_factor(rng, 4, 2), random_factor(rng, 3, 3), random_factor(rng, 5, 2)};
    parts.core = CoreTensor({2, 3, 2});
    for (auto& v : parts.core.data()) v = rng.normal();
    EXPECT_LE(oracle_max_deviation(parts), 1e-12);
}

TEST(TuckerAssemble, ExtentMismatch) {
    std::vector<FactorMatrix> f{FactorMatrix(2, 2), FactorMatrix(2, 3)};
    EXPECT_THROW((void)tucker_assemble(CoreTensor({2, 2}), f), DimensionError);
    EXPECT_THROW((void)tucker_assemble(CoreTensor({2, 2, 2}), f), DimensionError);
}

TEST(PointwiseOracle, TrivialCases) {
    DecompositionParts<double> cp;
    cp.kind = Decomposition::CP;
    cp.factors = {FactorMatrix(2, 1, 1.0), FactorMatrix(2, 1, 1.0)};
    const std::size_t origin[] = {0, 0};
    EXPECT_EQ(pointwise_oracle_checked(cp, origin), 1.0);
    const std::size_t out[] = {0, 2};
    EXPECT_THROW((void)pointwise_oracle_checked(cp, out), IndexError);

    DecompositionParts<double> tk;
    tk.kind = Decomposition::Tucker;
    tk.factors = {FactorMatrix(3, 2, 1.5), FactorMatrix(2, 2, -2.0)};
    tk.core = CoreTensor({2, 2});
    const std::size_t idx[] = {2, 1};
    EXPECT_EQ(pointwise_oracle_checked(tk, idx), 0.0);
}

TEST(PointwiseOracle, RandomInstancesAllKinds) {
    for (auto kind : {Decomposition::CP, Decomposition::TT, Decomposition::Tucker}) {
        Rng rng(100 + static_cast<int>(kind));
        for (int i = 0; i < 40; ++i) {
            const auto parts = random_parts(kind, rng);
            const auto ext = parts.extents();
            ASSERT_GE(ext.size(), 2u);
            ASSERT_LE(ext.size(), 4u);
            for (auto e : ext) ASSERT_LE(e, 5u);
            EXPECT_LE(oracle_max_deviation(parts), 1e-12);
        }
    }
}

TEST(RelativeL2, Examples) {
    DenseTensor truth({4}, std::vector<double>{1.0, 2.0, 2.0, 4.0});  // norm 5
    EXPECT_EQ(relative_l2(truth, truth), 0.0);

    DenseTensor twice = truth;
    for (auto& v : twice.data()) v *= 2.0;
    EXPECT_DOUBLE_EQ(relative_l2(twice, truth), 1.0);

    DenseTensor bumped = truth;
    bumped[0] += 0.5;  // |0.5| / 5
    EXPECT_NEAR(relative_l2(bumped, truth), 0.1, 1e-15);
}

TEST(RelativeL2, Errors) {
    DenseTensor a({4}), b({2, 2});
    EXPECT_THROW((void)relative_l2(a, b), DimensionError);
    EXPECT_THROW((void)relative_l2(a, DenseTensor({4})), DegenerateReferenceError);
}

TEST(Decomposition, NamesRoundTrip) {
    for (auto kind : {Decomposition::CP, Decomposition::TT, Decomposition::Tucker})
        EXPECT_EQ(parse_decomposition(to_string(kind)), kind);
    EXPECT_THROW((void)parse_decomposition("CP"), std::invalid_argument);
}
