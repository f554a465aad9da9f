#pragma once

#include <array>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "septensor/autodiff.hpp"
#include "septensor/model.hpp"

namespace septensor {

enum class FaceEnd { Low, High };

using PointFunction = std::function<double(std::span<const double>)>;

/// Dirichlet data on the face {x_axis = lo} or {x_axis = hi}.
struct BoundarySpec {
    std::size_t axis = 0;
    FaceEnd end = FaceEnd::Low;
    PointFunction target;
};

/// coefficient(x) * d^order u / dx_axis^order. A missing coefficient
/// function means the constant `scale`.
struct DerivativeTerm {
    std::size_t axis = 0;
    int order = 2;
    double scale = 1.0;
    PointFunction coefficient;
};

/// Problems of the form
///     sum_terms c_t(x) D_t u + sum_j reaction[j] u^j - source(x) = 0
/// on a box, with Dirichlet data on selected faces.
struct PDEProblem {
    std::string name;
    std::size_t dim = 0;
    std::vector<Interval> domain;
    std::vector<std::string> axis_names;

    std::vector<DerivativeTerm> terms;
    std::vector<double> reaction;  // polynomial coefficients in u, lowest order first
    PointFunction source;

    PointFunction exact;
    /// Exact solution as a jet along one axis: (u*, du*/dx_axis, d2u*/dx_axis^2).
    std::function<ad::Jet(std::span<const double>, std::size_t)> exact_jet;

    std::vector<BoundarySpec> boundary;
    /// Points excluded from manufactured-solution checks (coefficient singularities).
    std::function<bool(std::span<const double>)> singular;
    std::vector<std::string> warnings;

    [[nodiscard]] bool uses_value() const { return !reaction.empty(); }
    [[nodiscard]] double coefficient(const DerivativeTerm& term, std::span<const double> x) const {
        return term.coefficient ? term.scale * term.coefficient(x) : term.scale;
    }

    /// Residual at one point from the pointwise fields. Generic over the scalar
    /// so the same definition serves plain evaluation and the tape.
    template <class T>
    T residual_at(const T& u, std::span<const T> first, std::span<const T> second, std::span<const double> x) const {
        T r = T(-source(x));
        for (const auto& term : terms) {
            const T& field = term.order == 1 ? first[term.axis] : second[term.axis];
            r = r + T(coefficient(term, x)) * field;
        }
        if (!reaction.empty()) {
            T p = T(reaction.back());
            for (std::size_t j = reaction.size() - 1; j-- > 0;) p = p * u + T(reaction[j]);
            r = r + p;
        }
        return r;
    }

    /// Derivative of the reaction polynomial at u.
    [[nodiscard]] double reaction_derivative(double u) const;

    /// Residual over the whole lattice of the bundle.
    [[nodiscard]] DenseTensor residual(const GridBundle& grids) const;

    void validate() const;
};

struct HelmholtzOptions {
    std::array<double, 3> a{1.0, 1.0, 1.0};
    double k = 1.0;
    bool operator==(const HelmholtzOptions&) const = default;
};

[[nodiscard]] PDEProblem klein_gordon();
[[nodiscard]] PDEProblem helmholtz3d(const HelmholtzOptions& options = {});
[[nodiscard]] PDEProblem poisson5d();
[[nodiscard]] PDEProblem flow_mixing();

/// Largest |residual(u*)| over the probe lattice, skipping singular points.
[[nodiscard]] double verify_manufactured(const PDEProblem& problem, const Shape& probe_extents);

/// Default probe lattice for registration checks.
[[nodiscard]] Shape default_probe_extents(const PDEProblem& problem);

constexpr double kManufacturedTolerance = 1e-5;

/// Registered names: "klein-gordon", "helmholtz3d", "poisson5d", "flow-mixing".
[[nodiscard]] std::vector<std::string> problem_names();

/// Builds the named problem without the residual check.
[[nodiscard]] PDEProblem build_problem(const std::string& name, const HelmholtzOptions& helmholtz = {});

/// Builds the named problem and verifies its manufactured solution; throws
/// std::invalid_argument for unknown names and std::runtime_error when the
/// residual check fails.
[[nodiscard]] PDEProblem make_problem(const std::string& name, const HelmholtzOptions& helmholtz = {});

/// Uniform lattice including the endpoints of every axis.
[[nodiscard]] AxisPoints uniform_axis_points(const std::vector<Interval>& domain, const Shape& extents);

/// Exact solution sampled on a lattice.
[[nodiscard]] DenseTensor exact_grid(const PDEProblem& problem, const AxisPoints& axis_points);

}  // namespace septensor
