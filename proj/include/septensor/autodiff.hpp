#pragma once

// Reverse-mode tape over scalars, plus second-order forward jets whose
// components can be either plain doubles or tape variables. Jets of tape
// variables give exact parameter gradients of losses that contain first
// and second input derivatives (reverse over forward).

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "septensor/errors.hpp"

namespace septensor::ad {

class Tape;

/// A scalar on a tape, or a constant when it has no tape.
class Var {
public:
    static constexpr std::uint32_t kConstant = std::numeric_limits<std::uint32_t>::max();

    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

    [[nodiscard]] double value() const noexcept { return value_; }
    [[nodiscard]] bool is_constant() const noexcept { return id_ == kConstant; }
    [[nodiscard]] std::uint32_t id() const noexcept { return id_; }
    [[nodiscard]] const Tape* tape() const noexcept { return tape_; }

private:
    friend class Tape;
    Var(Tape* tape, std::uint32_t id, double value) : tape_(tape), id_(id), value_(value) {}

    Tape* tape_ = nullptr;
    std::uint32_t id_ = kConstant;
    double value_ = 0.0;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Declare slots 0..n-1 with the given values.
    std::vector<Var> parameters(std::span<const double> values);
    Var parameter(std::size_t slot, double value);

    [[nodiscard]] std::size_t slot_count() const noexcept { return slot_count_; }
    [[nodiscard]] std::size_t node_count() const noexcept { return nodes_.size(); }

    /// Drop all nodes and slots, keep the allocated capacity.
    void reset();

    Var unary(const Var& a, double value, double partial);
    Var binary(const Var& a, const Var& b, double value, double partial_a, double partial_b);

    /// d loss / d slot for every declared slot. One call per recorded pass.
    std::vector<double> backward(const Var& loss);

private:
    struct Node {
        std::uint32_t parent[2];
        double partial[2];
    };
    static constexpr std::uint32_t kNone = Var::kConstant;

    Var push(double value, std::uint32_t pa, double da, std::uint32_t pb, double db);
    void check_owner(const Var& v) const;

    std::vector<Node> nodes_;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> parameter_nodes_;  // (node, slot)
    std::size_t slot_count_ = 0;
    bool consumed_ = false;
};

/// Free-function form of Tape::backward.
inline std::vector<double> backward(Tape& tape, const Var& loss) { return tape.backward(loss); }

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator-(const Var& a);
inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
Var tanh(const Var& a);

inline double value_of(double x) { return x; }
inline double value_of(const Var& x) { return x.value(); }

// ---------------------------------------------------------------------------
// Second-order jets: value, d/dx, d^2/dx^2 with respect to one coordinate.

template <class T>
struct Jet2 {
    T v{};
    T d1{};
    T d2{};
};

/// Seed for the independent coordinate: (x, 1, 0).
template <class T = double>
Jet2<T> jet_variable(double x) {
    return {T(x), T(1.0), T(0.0)};
}

template <class T>
Jet2<T> jet_constant(const T& c) {
    return {c, T(0.0), T(0.0)};
}

template <class T>
Jet2<T> jet_add(const Jet2<T>& a, const Jet2<T>& b) {
    return {a.v + b.v, a.d1 + b.d1, a.d2 + b.d2};
}

template <class T>
Jet2<T> jet_sub(const Jet2<T>& a, const Jet2<T>& b) {
    return {a.v - b.v, a.d1 - b.d1, a.d2 - b.d2};
}

template <class T>
Jet2<T> jet_mul(const Jet2<T>& a, const Jet2<T>& b) {
    return {a.v * b.v, a.d1 * b.v + a.v * b.d1, a.d2 * b.v + T(2.0) * (a.d1 * b.d1) + a.v * b.d2};
}

/// c * a for a coefficient that does not depend on the coordinate.
template <class T>
Jet2<T> jet_scale(const T& c, const Jet2<T>& a) {
    return {c * a.v, c * a.d1, c * a.d2};
}

template <class T>
Jet2<T> jet_tanh(const Jet2<T>& a) {
    using std::tanh;
    const T y = tanh(a.v);
    const T s = T(1.0) - y * y;
    return {y, s * a.d1, s * a.d2 - T(2.0) * (y * s) * (a.d1 * a.d1)};
}

template <class T>
Jet2<T> operator+(const Jet2<T>& a, const Jet2<T>& b) { return jet_add(a, b); }
template <class T>
Jet2<T> operator-(const Jet2<T>& a, const Jet2<T>& b) { return jet_sub(a, b); }
template <class T>
Jet2<T> operator*(const Jet2<T>& a, const Jet2<T>& b) { return jet_mul(a, b); }
template <class T>
Jet2<T> operator-(const Jet2<T>& a) { return {-a.v, -a.d1, -a.d2}; }

// Elementary functions on double jets, used to differentiate closed-form
// exact solutions. Chain rule f(a)'' = f''(a) a'^2 + f'(a) a''.

using Jet = Jet2<double>;

inline Jet chain(const Jet& a, double f, double df, double d2f) {
    return {f, df * a.d1, d2f * a.d1 * a.d1 + df * a.d2};
}

inline Jet operator+(const Jet& a, double c) { return {a.v + c, a.d1, a.d2}; }
inline Jet operator+(double c, const Jet& a) { return a + c; }
inline Jet operator-(const Jet& a, double c) { return {a.v - c, a.d1, a.d2}; }
inline Jet operator-(double c, const Jet& a) { return {c - a.v, -a.d1, -a.d2}; }
inline Jet operator*(const Jet& a, double c) { return {a.v * c, a.d1 * c, a.d2 * c}; }
inline Jet operator*(double c, const Jet& a) { return a * c; }
inline Jet operator/(const Jet& a, double c) { return a * (1.0 / c); }

inline Jet reciprocal(const Jet& a) {
    const double r = 1.0 / a.v;
    return chain(a, r, -r * r, 2.0 * r * r * r);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(double c, const Jet& b) { return c * reciprocal(b); }

inline Jet sin(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return chain(a, s, c, -s);
}
inline Jet cos(const Jet& a) {
    const double s = std::sin(a.v), c = std::cos(a.v);
    return chain(a, c, -s, -c);
}
inline Jet tanh(const Jet& a) {
    const double y = std::tanh(a.v);
    const double s = 1.0 - y * y;
    return chain(a, y, s, -2.0 * y * s);
}
inline Jet cosh(const Jet& a) {
    const double c = std::cosh(a.v), s = std::sinh(a.v);
    return chain(a, c, s, c);
}
inline Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return chain(a, e, e, e);
}
inline Jet sqrt(const Jet& a) {
    const double r = std::sqrt(a.v);
    return chain(a, r, 0.5 / r, -0.25 / (r * a.v));
}

}  // namespace septensor::ad
