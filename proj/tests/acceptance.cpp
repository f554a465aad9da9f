// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. Verdict lines are also appended to
// the file named by SEPTENSOR_ACCEPTANCE_LOG when that variable is set.
// Usage: septensor_acceptance [N ...]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "septensor/runtime.hpp"
#include "septensor/tensor.hpp"
#include "septensor/trainer.hpp"

using namespace septensor;

namespace {

const Decomposition kKinds[] = {Decomposition::CP, Decomposition::TT, Decomposition::Tucker};

struct Verdict {
    bool pass = false;
    std::string detail;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Verdict assembly_oracle() {
    const double t0 = cpu_seconds();
    double worst = 0.0;
    std::size_t instances = 0;
    for (auto kind : kKinds) {
        Rng rng(derive_seed(2024, static_cast<std::uint64_t>(kind)));
        for (int i = 0; i < 250; ++i, ++instances) worst = std::max(worst, oracle_max_deviation(random_parts(kind, rng)));
    }
    const double secs = cpu_seconds() - t0;
    return {worst <= 1e-12 && secs < 10.0,
            fmt("%zu instances (250 per kind), max |assembled - oracle| %.2e <= 1e-12, %.2f s < 10 s", instances, worst,
                secs)};
}

Verdict autodiff_exactness() {
    const double t0 = cpu_seconds();
    const auto p = klein_gordon();
    double grad_worst = 0.0, jet_worst = 0.0;
    std::size_t params = 0;
    for (auto kind : kKinds) {
        const auto model = SeparatedModel::create(make_model_spec(kind, p.domain, 4), 5);
        Rng rng(17);
        const auto lat = CollocationLattice::for_problem(p, sample_axis_points(p, 5, rng));
        const auto chk = check_gradient_fd(model, &p, lat, 1.0, 1e-5);
        grad_worst = std::max(grad_worst, chk.max_relative_error);
        params += chk.parameters;
        for (std::size_t k = 0; k < model.dim(); ++k) {
            const auto& iv = p.domain[k];
            std::vector<double> xs;
            for (int j = 0; j < 5; ++j) xs.push_back(iv.lo + (iv.hi - iv.lo) * (0.1 + 0.2 * j));
            const auto jets = check_jets_fd(model.spec().networks[k], model.network_parameters(k), xs);
            jet_worst = std::max({jet_worst, jets.d1_error, jets.d2_error});
        }
    }
    const double secs = cpu_seconds() - t0;
    return {grad_worst < 1e-5 && jet_worst < 1e-4 && secs < 30.0,
            fmt("rank 4 d=3 klein-gordon loss, %zu parameters over cp/tt/tucker: gradient rel err %.2e < 1e-5, "
                "jet rel err %.2e < 1e-4, %.2f s < 30 s",
                params, grad_worst, jet_worst, secs)};
}

Verdict manufactured() {
    const double t0 = cpu_seconds();
    std::string detail;
    bool ok = true;
    for (const auto& name : problem_names()) {
        const auto p = build_problem(name);
        const double r = verify_manufactured(p, default_probe_extents(p));
        ok = ok && r < 1e-5;
        detail += fmt("%s %.1e, ", name.c_str(), r);
    }
    const double secs = cpu_seconds() - t0;
    return {ok && secs < 5.0, detail + fmt("all < 1e-5, %.3f s < 5 s", secs)};
}

Verdict expressivity() {
    const double t0 = cpu_seconds();
    auto model = SeparatedModel::create(make_model_spec(Decomposition::CP, 2, 2), 0);
    const auto pts = uniform_axis_points({{-1, 1}, {-1, 1}}, {32, 32});
    const auto target = [](std::span<const double> x) {
        return std::sin(std::numbers::pi * x[0]) * std::sin(std::numbers::pi * x[1]);
    };
    const auto fit = fit_function(model, pts, target, 10000, 1e-3);
    const double secs = cpu_seconds() - t0;
    return {fit.final_mse < 1e-4 && secs < 120.0,
            fmt("sin(pi x) sin(pi y), cp rank 2, 32x32: mse %.2e < 1e-4 after %zu Adam steps (<= 10000), %.1f s < 120 s",
                fit.final_mse, fit.iterations, secs)};
}

struct RunResult {
    double l2 = 0.0;
    double cpu = 0.0;
    TrainReport report;
};

// Cached so that criteria sharing a configuration train it once.
std::map<std::string, RunResult> g_runs;

const RunResult& train_run(const std::string& pde, Decomposition kind, std::size_t rank, std::size_t points,
                           std::size_t iterations, std::uint64_t seed) {
    const std::string key = fmt("%s/%d/%zu/%zu/%zu/%llu", pde.c_str(), static_cast<int>(kind), rank, points,
                                iterations, static_cast<unsigned long long>(seed));
    if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;
    const auto p = make_problem(pde);
    TrainConfig cfg;
    cfg.rank = rank;
    cfg.points_per_axis = points;
    cfg.iterations = iterations;
    cfg.seed = seed;
    cfg.loss_stride = 100;
    auto model = SeparatedModel::create(make_model_spec(kind, p.domain, rank), seed);
    const double t0 = cpu_seconds();
    RunResult r;
    r.report = train(model, p, cfg);
    r.cpu = cpu_seconds() - t0;
    r.l2 = r.report.diverged ? HUGE_VAL : r.report.final_relative_l2;
    std::fprintf(stderr, "  %s %s r%zu n%zu seed %llu: rel L2 %.4f, %.1f s cpu, %.0f it/s%s\n", pde.c_str(),
                 std::string(to_string(kind)).c_str(), rank, points, static_cast<unsigned long long>(seed), r.l2, r.cpu,
                 r.report.iterations_per_second, r.report.diverged ? " (diverged)" : "");
    return g_runs.emplace(key, std::move(r)).first->second;
}

Verdict best_of_three(const std::string& pde, Decomposition kind, std::size_t rank, std::size_t points,
                      std::size_t iterations, double gate, double cpu_budget, const std::string& extra = {}) {
    double best = HUGE_VAL, total_cpu = 0.0;
    std::string seeds;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const auto& r = train_run(pde, kind, rank, points, iterations, s);
        best = std::min(best, r.l2);
        total_cpu += r.cpu;
        seeds += fmt("%s%.4f", s ? " " : "", r.l2);
    }
    // Runtime budgets are per run of the protocol.
    const double per_run = total_cpu / 3.0;
    return {best <= gate && per_run <= cpu_budget,
            fmt("%s %s rank %zu, %zu pts/axis, %zu it: best rel L2 %.4f <= %.2f (seeds %s); cpu %.0f s/run <= %.0f s",
                pde.c_str(), std::string(to_string(kind)).c_str(), rank, points, iterations, best, gate,
                seeds.c_str(), per_run, cpu_budget) +
                extra};
}

Verdict klein_gordon_run() { return best_of_three("klein-gordon", Decomposition::CP, 16, 32, 20000, 0.10, 1200.0); }

Verdict helmholtz_run() { return best_of_three("helmholtz3d", Decomposition::CP, 32, 32, 20000, 0.15, 1500.0); }

Verdict poisson_run() {
    auto v = best_of_three("poisson5d", Decomposition::Tucker, 8, 16, 15000, 0.12, 1800.0);
    const auto& r = train_run("poisson5d", Decomposition::Tucker, 8, 16, 15000, 0);
    const bool economical = r.report.collocation_coordinates == 80 && r.report.network_evaluations_per_iteration == 80.0;
    v.pass = v.pass && economical && r.report.config.test_grid == Shape(5, 12);
    v.detail += fmt("; test grid 12^5; collocation coordinates %zu == 80, network evaluations/iter %.0f == 80",
                    r.report.collocation_coordinates, r.report.network_evaluations_per_iteration);
    return v;
}

Verdict rank_trend() {
    const std::size_t ranks[] = {8, 16, 32};
    double means[3];
    std::string detail = "klein-gordon cp, 32 pts/axis, 20000 it, mean of 3 seeds:";
    for (int i = 0; i < 3; ++i) {
        double sum = 0.0;
        for (std::uint64_t s = 0; s < 3; ++s) sum += train_run("klein-gordon", Decomposition::CP, ranks[i], 32, 20000, s).l2;
        means[i] = sum / 3.0;
        detail += fmt(" r%zu %.4f", ranks[i], means[i]);
    }
    const bool ok = means[1] <= 1.1 * means[0] && means[2] <= 1.1 * means[1];
    return {ok, detail + "; each <= 1.1 x previous"};
}

Verdict determinism() {
    const auto p = klein_gordon();
    TrainConfig cfg;
    cfg.rank = 8;
    cfg.points_per_axis = 16;
    cfg.iterations = 300;
    cfg.seed = 3;
    cfg.test_grid = {8, 8, 8};
    std::vector<TrainReport> reports;
    std::vector<std::vector<double>> params;
    for (int i = 0; i < 2; ++i) {
        auto m = SeparatedModel::create(make_model_spec(Decomposition::Tucker, p.domain, cfg.rank), cfg.seed);
        reports.push_back(train(m, p, cfg));
        params.emplace_back(m.parameters().begin(), m.parameters().end());
    }
    const auto& a = reports[0].loss_curve;
    const auto& b = reports[1].loss_curve;
    bool same = a.size() == b.size() && a.size() == 300 && params[0] == params[1];
    for (std::size_t i = 0; same && i < a.size(); ++i)
        same = a[i].iteration == b[i].iteration && std::memcmp(&a[i].loss, &b[i].loss, sizeof(double)) == 0;
    return {same, fmt("two tucker rank-8 klein-gordon runs, seed 3, 300 it with resampling: %zu loss values and "
                      "final parameters bitwise %s",
                      a.size(), same ? "identical" : "DIFFERENT")};
}

Verdict throughput() {
    const auto p = klein_gordon();
    std::string detail = "recorded, not gated:";
    bool finite = true;
    for (auto kind : kKinds) {
        TrainConfig cfg;
        cfg.rank = 16;
        cfg.points_per_axis = 32;
        cfg.iterations = 300;
        cfg.test_grid = {8, 8, 8};
        auto m = SeparatedModel::create(make_model_spec(kind, p.domain, cfg.rank), 0);
        const auto r = train(m, p, cfg);
        finite = finite && std::isfinite(r.iterations_per_second) && r.iterations_per_second > 0.0;
        detail += fmt(" klein-gordon %s r16 n32 %.0f it/s;", std::string(to_string(kind)).c_str(),
                      r.iterations_per_second);
    }
    return {finite, detail + " single thread"};
}

}  // namespace

int main(int argc, char** argv) {
    configure_allocator();
    const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
        {1, {"assembly oracle equivalence", assembly_oracle}},
        {2, {"autodiff exactness", autodiff_exactness}},
        {3, {"manufactured-solution residuals", manufactured}},
        {4, {"expressivity fit", expressivity}},
        {5, {"klein-gordon desk scale", klein_gordon_run}},
        {6, {"helmholtz desk scale", helmholtz_run}},
        {7, {"5-d poisson desk scale", poisson_run}},
        {8, {"rank trend", rank_trend}},
        {9, {"determinism", determinism}},
        {10, {"throughput record", throughput}},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (!criteria.count(n)) {
            std::fprintf(stderr, "unknown criterion '%s'\n", argv[i]);
            return 2;
        }
        selected.insert(n);
    }
    if (selected.empty())
        for (const auto& [n, c] : criteria) selected.insert(n);

    std::ofstream log;
    if (const char* path = std::getenv("SEPTENSOR_ACCEPTANCE_LOG")) log.open(path, std::ios::app);
    bool all = true;
    for (int n : selected) {
        const auto& [name, fn] = criteria.at(n);
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        all = all && v.pass;
        const std::string line = fmt("criterion %2d %s  %s: ", n, v.pass ? "PASS" : "FAIL", name) + v.detail;
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (log) log << line << std::endl;
    }
    return all ? 0 : 1;
}
