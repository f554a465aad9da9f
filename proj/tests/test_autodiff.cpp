#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "septensor/autodiff.hpp"
#include "septensor/network.hpp"

using namespace septensor;
using ad::Jet2;
using ad::Tape;
using ad::Var;

namespace {

template <class F>
Jet2<double> fd_jet(F f, double x, double h = 1e-4) {
    const double fp = f(x + h), f0 = f(x), fm = f(x - h);
    return {f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)};
}

}  // namespace

TEST(Jets, SquareOfCoordinate) {
    const auto a = ad::jet_variable(2.0);
    const auto m = ad::jet_mul(a, a);
    EXPECT_EQ(m.v, 4.0);
    EXPECT_EQ(m.d1, 4.0);
    EXPECT_EQ(m.d2, 2.0);
}

TEST(Jets, AdditiveIdentity) {
    const Jet2<double> a{1.25, -0.5, 3.0};
    const auto s = ad::jet_add(a, Jet2<double>{});
    EXPECT_EQ(s.v, a.v);
    EXPECT_EQ(s.d1, a.d1);
    EXPECT_EQ(s.d2, a.d2);
    const auto z = ad::jet_sub(a, a);
    EXPECT_EQ(z.v, 0.0);
}

TEST(Jets, CubeAgainstFiniteDifferences) {
    const auto x = ad::jet_variable(1.5);
    const auto c = ad::jet_mul(ad::jet_mul(x, x), x);
    EXPECT_DOUBLE_EQ(c.v, 3.375);
    EXPECT_DOUBLE_EQ(c.d1, 6.75);
    EXPECT_DOUBLE_EQ(c.d2, 9.0);
    const auto fd = fd_jet([](double t) { return t * t * t; }, 1.5);
    EXPECT_NEAR(c.d1, fd.d1, 1e-4 * 6.75);
    EXPECT_NEAR(c.d2, fd.d2, 1e-4 * 9.0);
}

TEST(Jets, TanhRules) {
    const auto t0 = ad::jet_tanh(ad::jet_variable(0.0));
    EXPECT_EQ(t0.v, 0.0);
    EXPECT_EQ(t0.d1, 1.0);
    EXPECT_EQ(t0.d2, 0.0);

    const auto c = ad::jet_tanh(ad::jet_constant(0.7));
    EXPECT_DOUBLE_EQ(c.v, std::tanh(0.7));
    EXPECT_EQ(c.d1, 0.0);
    EXPECT_EQ(c.d2, 0.0);

    const auto t = ad::jet_tanh(ad::jet_variable(0.5));
    const auto fd = fd_jet([](double x) { return std::tanh(x); }, 0.5, 1e-4);
    EXPECT_NEAR(t.d1, fd.d1, 1e-6 * std::abs(t.d1));
    EXPECT_NEAR(t.d2, fd.d2, 1e-6 * std::abs(t.d2));
}

TEST(Jets, ComposedFunctionMatchesFiniteDifferences) {
    // f(x) = tanh(x^2 - 0.3 x) * x
    const auto f = [](double x) { return std::tanh(x * x - 0.3 * x) * x; };
    for (double x : {-1.2, -0.4, 0.1, 0.8, 1.7}) {
        const auto j = ad::jet_variable(x);
        const auto inner = ad::jet_sub(ad::jet_mul(j, j), ad::jet_scale(0.3, j));
        const auto y = ad::jet_mul(ad::jet_tanh(inner), j);
        const auto fd = fd_jet(f, x);
        EXPECT_NEAR(y.v, f(x), 1e-15);
        EXPECT_LE(relative_difference(y.d1, fd.d1, 1e-3), 1e-4);
        EXPECT_LE(relative_difference(y.d2, fd.d2, 1e-3), 1e-4);
    }
}

TEST(Tape, SquareGradient) {
    Tape tape;
    const Var t = tape.parameter(0, 3.0);
    const Var loss = t * t;
    EXPECT_EQ(loss.value(), 9.0);
    const auto g = tape.backward(loss);
    ASSERT_EQ(g.size(), 1u);
    EXPECT_EQ(g[0], 6.0);
}

TEST(Tape, IndependentSlotHasZeroGradient) {
    Tape tape;
    const double vals[] = {1.0, 2.0, 5.0};
    const auto p = tape.parameters(vals);
    const Var loss = p[0] * p[2] + ad::tanh(p[0]);
    const auto g = tape.backward(loss);
    EXPECT_EQ(g[1], 0.0);
    EXPECT_DOUBLE_EQ(g[2], 1.0);
    EXPECT_DOUBLE_EQ(g[0], 5.0 + 1.0 - std::tanh(1.0) * std::tanh(1.0));
}

TEST(Tape, BackwardTwiceIsAnError) {
    Tape tape;
    const Var t = tape.parameter(0, 1.0);
    const Var loss = t * t;
    (void)tape.backward(loss);
    EXPECT_THROW((void)tape.backward(loss), TapeError);
    tape.reset();
    const Var t2 = tape.parameter(0, 2.0);
    EXPECT_EQ(tape.backward(t2 * t2)[0], 4.0);
}

TEST(Tape, ForeignVariablesAreRejected) {
    Tape a, b;
    const Var x = a.parameter(0, 1.0);
    const Var y = b.parameter(0, 2.0);
    EXPECT_THROW((void)(x * y), TapeError);
    EXPECT_THROW((void)a.backward(y * y), TapeError);
}

TEST(Tape, ReverseOverJetMatchesFiniteDifferences) {
    // loss = sum_x (u'' + u' * u)^2 with u(x) = tanh(a x + b) * c
    const std::vector<double> theta{0.7, -0.2, 1.3};
    const std::vector<double> xs{-0.5, 0.25, 0.9};
    const auto eval = [&](auto& scalar_of, auto params) {
        using T = std::decay_t<decltype(params[0])>;
        T total = T(0.0);
        for (double x : xs) {
            const auto j = ad::jet_variable<T>(x);
            const Jet2<T> lin{params[0] * j.v + params[1], params[0] * j.d1, params[0] * j.d2};
            const auto u = ad::jet_scale(params[2], ad::jet_tanh(lin));
            const T r = u.d2 + u.d1 * u.v;
            total = total + r * r;
        }
        return scalar_of(total);
    };

    Tape tape;
    const auto vars = tape.parameters(theta);
    const auto id = [](const Var& v) { return v; };
    const Var loss = eval(id, vars);
    const auto grad = tape.backward(loss);

    const auto plain = [](double v) { return v; };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        auto up = theta, down = theta;
        const double h = 1e-6;
        up[i] += h;
        down[i] -= h;
        const double fd = (eval(plain, up) - eval(plain, down)) / (2 * h);
        EXPECT_LE(relative_difference(grad[i], fd, 1e-8), 1e-5) << "slot " << i;
    }
}

TEST(Tape, MlpMeanSquaredOutputGradient) {
    NetworkConfig cfg;
    cfg.hidden_width = 4;
    cfg.output_width = 2;
    const auto params = init_params(cfg, 17).values;
    const std::vector<double> xs{-0.9, -0.1, 0.4, 0.75};

    const auto plain_loss = [&](std::span<const double> p) {
        double s = 0.0;
        for (double x : xs)
            for (double v : forward_jet<double>(cfg, p, x).value) s += v * v;
        return s / static_cast<double>(xs.size() * cfg.output_width);
    };

    Tape tape;
    const auto vars = tape.parameters(params);
    Var total = 0.0;
    for (double x : xs)
        for (const auto& v : forward_jet<Var>(cfg, vars, x).value) total = total + v * v;
    const Var loss = total * Var(1.0 / static_cast<double>(xs.size() * cfg.output_width));
    EXPECT_DOUBLE_EQ(loss.value(), plain_loss(params));
    const auto grad = tape.backward(loss);

    double worst = 0.0, largest = 0.0;
    std::vector<double> fd(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params;
        const double h = 1e-6;
        p[i] += h;
        const double up = plain_loss(p);
        p[i] -= 2 * h;
        fd[i] = (up - plain_loss(p)) / (2 * h);
        largest = std::max(largest, std::abs(fd[i]));
    }
    for (std::size_t i = 0; i < params.size(); ++i)
        worst = std::max(worst, relative_difference(grad[i], fd[i], 1e-3 * largest));
    EXPECT_LT(worst, 1e-5);
}

TEST(Tape, DeterministicGradients) {
    const auto run = [] {
        Tape tape;
        const double vals[] = {0.3, -1.1};
        const auto p = tape.parameters(vals);
        Var acc = 0.0;
        for (int i = 0; i < 50; ++i) acc = acc + ad::tanh(p[0] * Var(i * 0.1) + p[1]) * p[0];
        return tape.backward(acc);
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}
