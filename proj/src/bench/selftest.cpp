#include "septensor/bench/selftest.hpp"

#include <chrono>
#include <cstdio>
#include <sstream>

#include "septensor/checkpoint.hpp"
#include "septensor/pde.hpp"
#include "septensor/trainer.hpp"

namespace septensor::bench {

namespace {

template <class F>
SuiteResult timed(std::string name, F&& body) {
    SuiteResult r;
    r.name = std::move(name);
    const auto start = std::chrono::steady_clock::now();
    try {
        body(r);
    } catch (const std::exception& e) {
        r.passed = false;
        r.detail = std::string("exception: ") + e.what();
    }
    r.milliseconds = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace

SuiteResult suite_assembly() {
    return timed("assembly", [](SuiteResult& r) {
        Rng rng(derive_seed(20240601, 1));
        double worst = 0.0;
        std::size_t instances = 0;
        for (auto kind : {Decomposition::CP, Decomposition::TT, Decomposition::Tucker})
            for (int i = 0; i < 50; ++i, ++instances) worst = std::max(worst, oracle_max_deviation(random_parts(kind, rng)));
        r.passed = worst <= 1e-12;
        r.detail = std::to_string(instances) + " instances, max dev " + fmt("%.2e", worst);
    });
}

SuiteResult suite_autodiff() {
    return timed("autodiff", [](SuiteResult& r) {
        const auto problem = klein_gordon();
        Rng rng(7);
        const auto lattice = CollocationLattice::for_problem(problem, sample_axis_points(problem, 4, rng));
        double fd = 0.0, route = 0.0, jets = 0.0;
        for (auto kind : {Decomposition::CP, Decomposition::TT, Decomposition::Tucker}) {
            const auto model = SeparatedModel::create(make_model_spec(kind, problem.domain, 2), 11);
            fd = std::max(fd, check_gradient_fd(model, &problem, lattice, 1.0).max_relative_error);
            route = std::max(route, compare_gradient_routes(model, &problem, lattice, 1.0).gradient_difference);
            const std::vector<double> xs{-0.7, 0.1, 0.9};
            const auto j = check_jets_fd(model.spec().networks[0], model.network_parameters(0), xs);
            jets = std::max({jets, j.d1_error, j.d2_error});
        }
        r.passed = fd < 1e-5 && route < 1e-10 && jets < 1e-4;
        r.detail = "fd " + fmt("%.2e", fd) + ", tape vs batched " + fmt("%.2e", route) + ", jets " + fmt("%.2e", jets);
    });
}

SuiteResult suite_manufactured() {
    return timed("manufactured", [](SuiteResult& r) {
        std::ostringstream s;
        r.passed = true;
        for (const auto& name : problem_names()) {
            const PDEProblem p = build_problem(name);
            const double res = verify_manufactured(p, default_probe_extents(p));
            r.passed = r.passed && res < kManufacturedTolerance;
            s << name << ' ' << fmt("%.1e", res) << ' ';
        }
        r.detail = s.str();
        if (!r.detail.empty()) r.detail.pop_back();
    });
}

SuiteResult suite_checkpoint(const SelftestOptions& options) {
    return timed("checkpoint", [&](SuiteResult& r) {
        const auto model = SeparatedModel::create(make_model_spec(Decomposition::Tucker, 3, 3), 5);
        auto bytes = serialize_model(model);
        const auto back = deserialize_model(bytes);
        bool ok = back.spec() == model.spec() &&
                  std::equal(back.parameters().begin(), back.parameters().end(), model.parameters().begin());
        bytes[bytes.size() / 2] ^= 0x40;
        bool rejected = false;
        try {
            (void)deserialize_model(bytes);
        } catch (const CheckpointError&) {
            rejected = true;
        }
        r.detail = std::string("round trip ") + (ok ? "ok" : "MISMATCH") + ", corruption " +
                   (rejected ? "rejected" : "ACCEPTED");
        if (options.checkpoint) {
            try {
                const auto loaded = load_checkpoint(*options.checkpoint);
                r.detail += ", " + options.checkpoint->string() + " ok (" +
                            std::to_string(loaded.parameters().size()) + " parameters)";
            } catch (const std::exception& e) {
                ok = false;
                r.detail += ", " + options.checkpoint->string() + ": " + e.what();
            }
        }
        r.passed = ok && rejected;
    });
}

std::vector<SuiteResult> run_selftest(const SelftestOptions& options) {
    return {suite_assembly(), suite_autodiff(), suite_manufactured(), suite_checkpoint(options)};
}

std::string format_suite(const SuiteResult& r) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-13s %s %9.1f ms  ", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.milliseconds);
    return buf + r.detail;
}

}  // namespace septensor::bench
