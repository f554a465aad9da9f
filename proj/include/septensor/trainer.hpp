#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "septensor/autodiff.hpp"
#include "septensor/model.hpp"
#include "septensor/pde.hpp"
#include "septensor/rng.hpp"

namespace septensor {

struct TrainConfig {
    std::size_t rank = 16;
    std::size_t points_per_axis = 64;
    std::size_t iterations = 50000;
    double learning_rate = 1e-3;
    double lambda = 1.0;
    std::uint64_t seed = 0;
    std::size_t resample_every = 100;  // 0 keeps the first draw
    Shape test_grid;                   // empty: default_test_grid(dim)
    std::size_t loss_stride = 1;       // record every n-th loss

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

/// 32 points per axis up to three axes, 12 beyond.
[[nodiscard]] Shape default_test_grid(std::size_t dim);

struct AdamState {
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Bias-corrected Adam update in place. Throws DivergenceError on a
/// non-finite gradient, leaving state and parameters untouched.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double learning_rate);

/// Per axis: both endpoints plus n - 2 uniform interior draws, sorted.
[[nodiscard]] AxisPoints sample_axis_points(const PDEProblem& problem, std::size_t n, Rng& rng);

/// Axis-aligned block of lattice indices: rows [first[k], first[k] + count[k]).
struct SubLattice {
    std::vector<std::size_t> first;
    std::vector<std::size_t> count;

    [[nodiscard]] std::size_t size() const;
};

/// Everything about one collocation draw that does not depend on the model:
/// the physics block (lattice minus constrained faces), coordinate-dependent
/// coefficients and source on it, and the data blocks with their targets.
class CollocationLattice {
public:
    struct DataBlock {
        SubLattice block;
        std::vector<double> targets;
    };

    static CollocationLattice for_problem(const PDEProblem& problem, AxisPoints points);
    /// Regression on the full lattice, no physics term.
    static CollocationLattice for_fit(AxisPoints points, const PointFunction& target);

    AxisPoints points;
    SubLattice interior;
    std::size_t physics_points = 0;
    std::vector<double> source;                     // on the interior block
    std::vector<std::vector<double>> coefficients;  // per term, empty when constant
    std::vector<DataBlock> data;
    std::size_t data_points = 0;
    std::vector<std::string> warnings;

    /// Total coordinates fed to the networks: sum of the axis list lengths.
    [[nodiscard]] std::size_t coordinate_count() const;
};

struct LossTerms {
    double total = 0.0;
    double data = 0.0;
    double physics = 0.0;
};

struct LossGradient {
    LossTerms terms;
    std::vector<double> gradient;  // over model.parameters()
};

/// L = L_data + lambda * L_physics and its exact parameter gradient through
/// the batched jet pass and the assembly adjoints. `problem` may be null for
/// a regression lattice.
[[nodiscard]] LossGradient loss_and_gradient(const SeparatedModel& model, const PDEProblem* problem,
                                             const CollocationLattice& lattice, double lambda);

/// Same loss recorded scalar by scalar on the tape, with every model
/// parameter declared as a slot in model order.
ad::Var loss(ad::Tape& tape, const SeparatedModel& model, const PDEProblem* problem,
             const CollocationLattice& lattice, double lambda);
ad::Var loss(ad::Tape& tape, const SeparatedModel& model, const PDEProblem& problem, const AxisPoints& axis_points,
             double lambda);

struct GradientCheck {
    std::size_t parameters = 0;
    double max_relative_error = 0.0;   // per component, floored at 1e-3 of the largest |gradient|
    double norm_relative_error = 0.0;  // ||g - fd|| / ||fd||
};

/// Fast gradient against central differences of the loss in every parameter.
[[nodiscard]] GradientCheck check_gradient_fd(const SeparatedModel& model, const PDEProblem* problem,
                                              const CollocationLattice& lattice, double lambda, double h = 1e-5);

/// Worst floored relative difference between the tape gradient and the fast
/// gradient, and between the two loss values.
struct RouteComparison {
    double gradient_difference = 0.0;
    double loss_difference = 0.0;
};
[[nodiscard]] RouteComparison compare_gradient_routes(const SeparatedModel& model, const PDEProblem* problem,
                                                      const CollocationLattice& lattice, double lambda);

struct LossPoint {
    std::size_t iteration = 0;
    double loss = 0.0;
};

struct TrainReport {
    TrainConfig config;
    std::string problem;
    Decomposition kind = Decomposition::CP;
    std::vector<LossPoint> loss_curve;
    double initial_relative_l2 = 0.0;
    double final_relative_l2 = 0.0;
    std::size_t iterations_completed = 0;
    double wall_seconds = 0.0;
    double iterations_per_second = 0.0;
    std::size_t collocation_coordinates = 0;
    double network_evaluations_per_iteration = 0.0;
    bool diverged = false;
    std::string divergence_message;
    std::vector<std::string> warnings;
};

using TrainObserver = std::function<void(std::size_t iteration, const LossTerms& terms)>;

/// Relative L2 of the model against the exact solution on a uniform lattice.
[[nodiscard]] double evaluate_relative_l2(const SeparatedModel& model, const PDEProblem& problem,
                                          const Shape& test_grid);

/// Runs config.iterations of resample / loss / gradient / Adam. A non-finite
/// loss or gradient stops the run and returns a partial report.
TrainReport train(SeparatedModel& model, const PDEProblem& problem, const TrainConfig& config,
                  const TrainObserver& observer = {});

struct FitReport {
    std::vector<double> losses;
    double final_mse = 0.0;
    std::size_t iterations = 0;
};

/// Adam regression of the model onto `target` over the lattice, stopping
/// early once the mean squared error drops below `stop_below`.
FitReport fit_function(SeparatedModel& model, const AxisPoints& axis_points, const PointFunction& target,
                       std::size_t max_iterations, double learning_rate, double stop_below = 0.0);

}  // namespace septensor
