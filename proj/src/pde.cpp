#include "septensor/pde.hpp"

#include <cmath>
#include <stdexcept>
#include <type_traits>

namespace septensor {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFlowVtMax = 0.385;

/// Installs both the plain and the jet form of an exact solution written
/// once as a generic callable over span<const T>.
template <class F>
void set_exact(PDEProblem& p, F f) {
    const std::size_t dim = p.dim;
    p.exact = [f](std::span<const double> x) { return f(x); };
    p.exact_jet = [f, dim](std::span<const double> x, std::size_t axis) {
        std::vector<ad::Jet> jx(dim);
        for (std::size_t k = 0; k < dim; ++k)
            jx[k] = k == axis ? ad::jet_variable<double>(x[k]) : ad::jet_constant<double>(x[k]);
        return f(std::span<const ad::Jet>(jx));
    };
}

void add_face(PDEProblem& p, std::size_t axis, FaceEnd end) {
    p.boundary.push_back({axis, end, p.exact});
}

void add_all_faces(PDEProblem& p) {
    for (std::size_t k = 0; k < p.dim; ++k) {
        add_face(p, k, FaceEnd::Low);
        add_face(p, k, FaceEnd::High);
    }
}

template <class T>
T tanh_over_r(const T& r) {
    using std::tanh;
    if constexpr (std::is_same_v<T, double>) {
        if (r < 1e-8) return 1.0 - r * r / 3.0;
    }
    return tanh(r) / r;
}

/// Angular speed of the vortex: v_t / (r v_t,max) with v_t = sech^2(r) tanh(r).
template <class T>
T vortex_omega(const T& r) {
    using std::cosh;
    const T c = cosh(r);
    return tanh_over_r(r) / (c * c) / kFlowVtMax;
}

}  // namespace

double PDEProblem::reaction_derivative(double u) const {
    double p = 0.0;
    for (std::size_t j = reaction.size(); j-- > 1;) p = p * u + static_cast<double>(j) * reaction[j];
    return p;
}

void PDEProblem::validate() const {
    if (dim < 2) throw ArityError("problem needs at least two axes");
    if (domain.size() != dim) throw DimensionError("problem domain has wrong number of intervals");
    for (const auto& iv : domain)
        if (!(iv.hi > iv.lo)) throw std::invalid_argument("degenerate domain interval");
    for (const auto& t : terms)
        if (t.axis >= dim || (t.order != 1 && t.order != 2)) throw std::invalid_argument("invalid derivative term");
    for (const auto& b : boundary)
        if (b.axis >= dim) throw std::invalid_argument("boundary face axis out of range");
    if (!source || !exact || !exact_jet) throw std::invalid_argument("problem is missing source or exact solution");
}

DenseTensor PDEProblem::residual(const GridBundle& grids) const {
    if (grids.axis_points.size() != dim) throw DimensionError("grid bundle dimension does not match problem");
    const Shape& shape = grids.u.shape();
    DenseTensor out(shape);
    std::vector<std::size_t> idx(dim, 0);
    std::vector<double> x(dim), first(dim), second(dim);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        for (std::size_t k = 0; k < dim; ++k) {
            x[k] = grids.axis_points[k][idx[k]];
            first[k] = grids.first.empty() ? 0.0 : grids.first[k][flat];
            second[k] = grids.second.empty() ? 0.0 : grids.second[k][flat];
        }
        out[flat] = residual_at<double>(grids.u[flat], first, second, x);
        for (std::size_t k = dim; k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

PDEProblem klein_gordon() {
    // u_tt - (u_xx + u_yy) + u^2 = s, axes (x, y, t).
    PDEProblem p;
    p.name = "klein-gordon";
    p.dim = 3;
    p.domain = {{-1.0, 1.0}, {-1.0, 1.0}, {0.0, 10.0}};
    p.axis_names = {"x", "y", "t"};
    p.terms = {{2, 2, 1.0, {}}, {0, 2, -1.0, {}}, {1, 2, -1.0, {}}};
    p.reaction = {0.0, 0.0, 1.0};
    set_exact(p, [](auto x) {
        using std::cos;
        using std::sin;
        return (x[0] + x[1]) * cos(2.0 * x[2]) + x[0] * x[1] * sin(2.0 * x[2]);
    });
    // u*_tt = -4 u* and the spatial Laplacian of u* vanishes.
    p.source = [exact = p.exact](std::span<const double> x) {
        const double u = exact(x);
        return -4.0 * u + u * u;
    };
    add_face(p, 0, FaceEnd::Low);
    add_face(p, 0, FaceEnd::High);
    add_face(p, 1, FaceEnd::Low);
    add_face(p, 1, FaceEnd::High);
    add_face(p, 2, FaceEnd::Low);
    p.validate();
    return p;
}

PDEProblem helmholtz3d(const HelmholtzOptions& options) {
    // u_xx + u_yy + u_zz + k^2 u = q.
    PDEProblem p;
    p.name = "helmholtz3d";
    p.dim = 3;
    p.domain = {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
    p.axis_names = {"x", "y", "z"};
    p.terms = {{0, 2, 1.0, {}}, {1, 2, 1.0, {}}, {2, 2, 1.0, {}}};
    const double k2 = options.k * options.k;
    p.reaction = {0.0, k2};
    const auto a = options.a;
    for (double ai : a) {
        if (!(ai > 0.0)) throw std::invalid_argument("helmholtz coefficients must be positive");
        if (ai != std::round(ai))
            p.warnings.push_back("helmholtz coefficient a=" + std::to_string(ai) +
                                 " is not an integer; u* does not vanish on the boundary");
    }
    set_exact(p, [a](auto x) {
        using std::sin;
        return sin(a[0] * kPi * x[0]) * sin(a[1] * kPi * x[1]) * sin(a[2] * kPi * x[2]);
    });
    const double lap = -(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]) * kPi * kPi;
    p.source = [exact = p.exact, lap, k2](std::span<const double> x) {
        const double u = exact(x);
        return lap * u + k2 * u;
    };
    add_all_faces(p);
    p.validate();
    return p;
}

PDEProblem poisson5d() {
    // sum_i u_{x_i x_i} = -(pi^2 / 4) sum_i sin(pi x_i / 2) on [0, 1]^5.
    PDEProblem p;
    p.name = "poisson5d";
    p.dim = 5;
    p.domain.assign(5, {0.0, 1.0});
    for (std::size_t k = 0; k < 5; ++k) {
        p.axis_names.push_back("x" + std::to_string(k + 1));
        p.terms.push_back({k, 2, 1.0, {}});
    }
    set_exact(p, [](auto x) {
        using std::sin;
        auto s = sin(0.5 * kPi * x[0]);
        for (std::size_t k = 1; k < 5; ++k) s = s + sin(0.5 * kPi * x[k]);
        return s;
    });
    p.source = [](std::span<const double> x) {
        double s = 0.0;
        for (double xi : x) s += std::sin(0.5 * kPi * xi);
        return -0.25 * kPi * kPi * s;
    };
    add_all_faces(p);
    p.validate();
    return p;
}

PDEProblem flow_mixing() {
    // u_t + a(x, y) u_x + b(x, y) u_y = 0, axes (x, y, t).
    PDEProblem p;
    p.name = "flow-mixing";
    p.dim = 3;
    p.domain = {{-4.0, 4.0}, {-4.0, 4.0}, {0.0, 4.0}};
    p.axis_names = {"x", "y", "t"};
    const PointFunction coef_a = [](std::span<const double> x) {
        const double r = std::hypot(x[0], x[1]);
        return -vortex_omega(r) * x[1];
    };
    const PointFunction coef_b = [](std::span<const double> x) {
        const double r = std::hypot(x[0], x[1]);
        return vortex_omega(r) * x[0];
    };
    p.terms = {{2, 1, 1.0, {}}, {0, 1, 1.0, coef_a}, {1, 1, 1.0, coef_b}};
    set_exact(p, [](auto x) {
        using std::cos;
        using std::sin;
        using std::sqrt;
        using std::tanh;
        using T = std::remove_cvref_t<decltype(x[0])>;
        T w;
        if constexpr (std::is_same_v<T, double>) {
            w = vortex_omega(std::hypot(x[0], x[1]));
        } else {
            w = vortex_omega(sqrt(x[0] * x[0] + x[1] * x[1]));
        }
        const T angle = w * x[2];
        return -tanh(0.5 * x[1] * cos(angle) - 0.5 * x[0] * sin(angle));
    });
    p.source = [](std::span<const double>) { return 0.0; };
    add_face(p, 2, FaceEnd::Low);
    p.singular = [](std::span<const double> x) { return std::hypot(x[0], x[1]) < 1e-3; };
    p.validate();
    return p;
}

// ---------------------------------------------------------------------------

AxisPoints uniform_axis_points(const std::vector<Interval>& domain, const Shape& extents) {
    if (extents.size() != domain.size()) throw DimensionError("extents do not match domain dimension");
    AxisPoints out(domain.size());
    for (std::size_t k = 0; k < domain.size(); ++k) {
        const std::size_t n = extents[k];
        if (n == 0) throw ArityError("lattice extent must be positive");
        out[k].resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out[k][i] = n == 1 ? domain[k].lo
                               : domain[k].lo + (domain[k].hi - domain[k].lo) * static_cast<double>(i) /
                                                    static_cast<double>(n - 1);
        if (n > 1) out[k].back() = domain[k].hi;
    }
    return out;
}

DenseTensor exact_grid(const PDEProblem& problem, const AxisPoints& axis_points) {
    Shape shape;
    for (const auto& a : axis_points) shape.push_back(a.size());
    DenseTensor out(shape);
    const std::size_t d = shape.size();
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d);
    for (std::size_t flat = 0; flat < out.size(); ++flat) {
        for (std::size_t k = 0; k < d; ++k) x[k] = axis_points[k][idx[k]];
        out[flat] = problem.exact(x);
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < shape[k]) break;
            idx[k] = 0;
        }
    }
    return out;
}

double verify_manufactured(const PDEProblem& problem, const Shape& probe_extents) {
    if (probe_extents.size() != problem.dim) throw ArityError("probe lattice must have one extent per axis");
    for (auto e : probe_extents)
        if (e == 0) throw ArityError("probe lattice is empty");
    const auto axes = uniform_axis_points(problem.domain, probe_extents);
    const std::size_t d = problem.dim;
    std::vector<std::size_t> idx(d, 0);
    std::vector<double> x(d), first(d), second(d);
    const std::size_t total = shape_volume(probe_extents);
    double worst = 0.0;
    for (std::size_t flat = 0; flat < total; ++flat) {
        for (std::size_t k = 0; k < d; ++k) x[k] = axes[k][idx[k]];
        if (!problem.singular || !problem.singular(x)) {
            double u = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const ad::Jet j = problem.exact_jet(x, k);
                u = j.v;
                first[k] = j.d1;
                second[k] = j.d2;
            }
            const double r = problem.residual_at<double>(u, first, second, x);
            worst = std::max(worst, std::isfinite(r) ? std::abs(r) : HUGE_VAL);
        }
        for (std::size_t k = d; k-- > 0;) {
            if (++idx[k] < probe_extents[k]) break;
            idx[k] = 0;
        }
    }
    return worst;
}

Shape default_probe_extents(const PDEProblem& problem) {
    return Shape(problem.dim, problem.dim <= 3 ? 8 : 4);
}

std::vector<std::string> problem_names() { return {"klein-gordon", "helmholtz3d", "poisson5d", "flow-mixing"}; }

PDEProblem build_problem(const std::string& name, const HelmholtzOptions& helmholtz) {
    if (name == "klein-gordon") return klein_gordon();
    if (name == "helmholtz3d") return helmholtz3d(helmholtz);
    if (name == "poisson5d") return poisson5d();
    if (name == "flow-mixing") return flow_mixing();
    throw std::invalid_argument("unknown problem '" + name + "'");
}

PDEProblem make_problem(const std::string& name, const HelmholtzOptions& helmholtz) {
    PDEProblem p = build_problem(name, helmholtz);
    const double worst = verify_manufactured(p, default_probe_extents(p));
    if (!(worst < kManufacturedTolerance))
        throw std::runtime_error("problem '" + name + "' failed the manufactured-solution check: max residual " +
                                 std::to_string(worst));
    return p;
}

}  // namespace septensor
