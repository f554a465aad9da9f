#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "septensor/contraction.hpp"

using namespace septensor;

namespace {

FactorMatrix random_factor(Rng& rng, std::size_t rows, std::size_t cols) {
    FactorMatrix f(rows, cols);
    for (auto& v : f.data()) v = rng.normal();
    return f;
}

DenseTensor random_like(Rng& rng, const Shape& shape) {
    DenseTensor t(shape);
    for (auto& v : t.data()) v = rng.normal();
    return t;
}

double inner(const DenseTensor& a, const DenseTensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// Central differences of f over every entry of `values`, compared to `grad`.
void expect_matches_fd(std::span<double> values, std::span<const double> grad, const std::function<double()>& f) {
    ASSERT_EQ(values.size(), grad.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double keep = values[i];
        const double h = 1e-6;
        values[i] = keep + h;
        const double up = f();
        values[i] = keep - h;
        const double down = f();
        values[i] = keep;
        EXPECT_NEAR(grad[i], (up - down) / (2 * h), 1e-7 * std::max(1.0, std::abs(grad[i])));
    }
}

}  // namespace

TEST(CpContraction, ForwardMatchesAssemble) {
    Rng rng(1);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 4), random_factor(rng, 2, 4), random_factor(rng, 5, 4)};
    CpContraction c;
    const auto t = c.forward(f);
    const auto ref = cp_assemble(f);
    ASSERT_EQ(t.shape(), ref.shape());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t[i], ref[i], 1e-13);
}

TEST(CpContraction, BackwardMatchesFiniteDifferences) {
    Rng rng(2);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 3), random_factor(rng, 4, 3), random_factor(rng, 2, 3)};
    const auto w = random_like(rng, {3, 4, 2});
    CpContraction c;
    (void)c.forward(f);
    const auto g = c.backward(w);
    for (std::size_t k = 0; k < f.size(); ++k)
        expect_matches_fd(f[k].data(), g[k].data(), [&] { return inner(w, cp_assemble(f)); });
}

TEST(TtContraction, BackwardMatchesFiniteDifferences) {
    Rng rng(3);
    std::vector<TTCore> cores{TTCore(1, 3, 2), TTCore(2, 2, 3), TTCore(3, 4, 1)};
    for (auto& c : cores)
        for (auto& v : c.data()) v = rng.normal();
    const auto w = random_like(rng, {3, 2, 4});
    TtContraction c;
    const auto t = c.forward(cores);
    const auto ref = tt_assemble(cores);
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t[i], ref[i], 1e-13);
    const auto g = c.backward(w);
    for (std::size_t k = 0; k < cores.size(); ++k)
        expect_matches_fd(cores[k].data(), g[k].data(), [&] { return inner(w, tt_assemble(cores)); });
}

TEST(TuckerContraction, BackwardMatchesFiniteDifferences) {
    Rng rng(4);
    std::vector<FactorMatrix> f{random_factor(rng, 3, 2), random_factor(rng, 4, 3), random_factor(rng, 2, 2)};
    CoreTensor core({2, 3, 2});
    for (auto& v : core.data()) v = rng.normal();
    const auto w = random_like(rng, {3, 4, 2});
    TuckerContraction c;
    (void)c.forward(core, f);
    const auto g = c.backward(w);
    const auto loss = [&] { return inner(w, tucker_assemble(core, f)); };
    expect_matches_fd(core.data(), g.core.data(), loss);
    for (std::size_t k = 0; k < f.size(); ++k) expect_matches_fd(f[k].data(), g.factors[k].data(), loss);
}

class OperatorContraction : public ::testing::TestWithParam<std::vector<bool>> {};

TEST_P(OperatorContraction, MatchesUnfusedSumAndGradients) {
    const auto mask = GetParam();
    const std::size_t d = mask.size();
    Rng rng(50 + d);
    std::vector<FactorMatrix> a, b(d);
    Shape core_shape, shape;
    for (std::size_t k = 0; k < d; ++k) {
        const std::size_t n = 2 + k % 3, m = 1 + (k + 1) % 3;
        a.push_back(random_factor(rng, n, m));
        b[k] = random_factor(rng, n, m);
        core_shape.push_back(m);
        shape.push_back(n);
    }
    CoreTensor core(core_shape);
    for (auto& v : core.data()) v = rng.normal();
    std::vector<const FactorMatrix*> ops(d, nullptr);
    for (std::size_t k = 0; k < d; ++k)
        if (mask[k]) ops[k] = &b[k];

    const auto unfused = [&] {
        DenseTensor s(shape);
        for (std::size_t j = 0; j < d; ++j) {
            if (!ops[j]) continue;
            auto sub = a;
            sub[j] = b[j];
            const auto t = tucker_assemble(core, sub);
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += t[i];
        }
        return s;
    };

    TuckerOperatorContraction c;
    const auto out = c.forward(core, a, ops, true);
    const auto ref_value = tucker_assemble(core, a);
    const auto ref_op = unfused();
    for (std::size_t i = 0; i < ref_value.size(); ++i) {
        EXPECT_NEAR(out.value[i], ref_value[i], 1e-12);
        EXPECT_NEAR(out.op[i], ref_op[i], 1e-12);
    }

    const auto wv = random_like(rng, shape);
    const auto ws = random_like(rng, shape);
    const auto g = c.backward(&wv, ws);
    const auto loss = [&] { return inner(wv, tucker_assemble(core, a)) + inner(ws, unfused()); };
    expect_matches_fd(core.data(), g.core.data(), loss);
    for (std::size_t k = 0; k < d; ++k) {
        expect_matches_fd(a[k].data(), g.factors[k].data(), loss);
        if (mask[k]) expect_matches_fd(b[k].data(), g.op_factors[k].data(), loss);
    }

    // Without the value grid only the operator term contributes.
    TuckerOperatorContraction c2;
    const auto out2 = c2.forward(core, a, ops, false);
    for (std::size_t i = 0; i < ref_op.size(); ++i) EXPECT_NEAR(out2.op[i], ref_op[i], 1e-12);
    const auto g2 = c2.backward(nullptr, ws);
    expect_matches_fd(core.data(), g2.core.data(), [&] { return inner(ws, unfused()); });
}

INSTANTIATE_TEST_SUITE_P(Masks, OperatorContraction,
                         ::testing::Values(std::vector<bool>{true, true}, std::vector<bool>{false, true},
                                           std::vector<bool>{true, false, true},
                                           std::vector<bool>{true, true, true, true, true},
                                           std::vector<bool>{false, false, true, false}));

TEST(OperatorContraction, RejectsBadOperatorShapes) {
    std::vector<FactorMatrix> a{FactorMatrix(3, 2, 1.0), FactorMatrix(2, 2, 1.0)};
    FactorMatrix wrong(3, 3);
    std::vector<const FactorMatrix*> ops{&wrong, nullptr};
    TuckerOperatorContraction c;
    EXPECT_THROW((void)c.forward(CoreTensor({2, 2}), a, ops, true), DimensionError);
    std::vector<const FactorMatrix*> short_list{nullptr};
    EXPECT_THROW((void)c.forward(CoreTensor({2, 2}), a, short_list, true), DimensionError);
}
