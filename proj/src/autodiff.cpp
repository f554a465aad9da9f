#include "septensor/autodiff.hpp"

namespace septensor::ad {

std::vector<Var> Tape::parameters(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out.push_back(parameter(i, values[i]));
    return out;
}

Var Tape::parameter(std::size_t slot, double value) {
    Var v = push(value, kNone, 0.0, kNone, 0.0);
    parameter_nodes_.emplace_back(v.id(), static_cast<std::uint32_t>(slot));
    if (slot + 1 > slot_count_) slot_count_ = slot + 1;
    return v;
}

void Tape::reset() {
    nodes_.clear();
    parameter_nodes_.clear();
    slot_count_ = 0;
    consumed_ = false;
}

Var Tape::push(double value, std::uint32_t pa, double da, std::uint32_t pb, double db) {
    if (nodes_.size() >= kNone) throw TapeError("tape capacity exhausted");
    consumed_ = false;
    nodes_.push_back(Node{{pa, pb}, {da, db}});
    return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1), value);
}

void Tape::check_owner(const Var& v) const {
    if (!v.is_constant() && (v.tape_ != this || v.id_ >= nodes_.size()))
        throw TapeError("variable does not belong to this tape");
}

Var Tape::unary(const Var& a, double value, double partial) {
    if (a.is_constant()) return Var(value);
    check_owner(a);
    return push(value, a.id_, partial, kNone, 0.0);
}

Var Tape::binary(const Var& a, const Var& b, double value, double partial_a, double partial_b) {
    if (a.is_constant() && b.is_constant()) return Var(value);
    if (a.is_constant()) return unary(b, value, partial_b);
    if (b.is_constant()) return unary(a, value, partial_a);
    check_owner(a);
    check_owner(b);
    return push(value, a.id_, partial_a, b.id_, partial_b);
}

std::vector<double> Tape::backward(const Var& loss) {
    std::vector<double> grad(slot_count_, 0.0);
    if (loss.is_constant()) return grad;
    check_owner(loss);
    if (consumed_) throw TapeError("backward already ran on this recording; record a new forward pass");
    consumed_ = true;

    std::vector<double> adjoint(loss.id_ + 1, 0.0);
    adjoint[loss.id_] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        const double a = adjoint[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        if (n.parent[0] != kNone) adjoint[n.parent[0]] += a * n.partial[0];
        if (n.parent[1] != kNone) adjoint[n.parent[1]] += a * n.partial[1];
    }
    for (const auto& [node, slot] : parameter_nodes_)
        if (node <= loss.id_) grad[slot] += adjoint[node];
    return grad;
}

namespace {

Tape* owner(const Var& a, const Var& b) {
    const Tape* ta = a.tape();
    const Tape* tb = b.tape();
    if (ta && tb && ta != tb) throw TapeError("cannot mix variables from different tapes");
    return const_cast<Tape*>(ta ? ta : tb);
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
    Tape* t = owner(a, b);
    const double v = a.value() + b.value();
    return t ? t->binary(a, b, v, 1.0, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
    Tape* t = owner(a, b);
    const double v = a.value() - b.value();
    return t ? t->binary(a, b, v, 1.0, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = owner(a, b);
    const double v = a.value() * b.value();
    return t ? t->binary(a, b, v, b.value(), a.value()) : Var(v);
}

Var operator-(const Var& a) {
    Tape* t = const_cast<Tape*>(a.tape());
    return t ? t->unary(a, -a.value(), -1.0) : Var(-a.value());
}

Var tanh(const Var& a) {
    const double y = std::tanh(a.value());
    Tape* t = const_cast<Tape*>(a.tape());
    return t ? t->unary(a, y, 1.0 - y * y) : Var(y);
}

}  // namespace septensor::ad
