// septensor: run single experiments, sweeps, and the built-in self checks.
//
//   septensor run --pde helmholtz3d --model cp --rank 32 --points 64 --iters 50000 --seed 0
//   septensor sweep ranks.json
//   septensor selftest
//
// Exit codes: 0 success, 1 selftest failure, 2 usage error, 3 divergence.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "septensor/bench/record.hpp"
#include "septensor/bench/selftest.hpp"
#include "septensor/bench/sweep.hpp"
#include "septensor/checkpoint.hpp"
#include "septensor/runtime.hpp"

namespace sb = septensor::bench;

namespace {

constexpr int kExitSelftest = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDiverged = 3;

int usage_error(const std::string& message) {
    std::cerr << "septensor: " << message << "\n";
    return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
    septensor::configure_allocator();

    CLI::App app{"Separable tensor-decomposition PINN experiments"};
    app.require_subcommand(1);

    sb::RunRequest req;
    std::string model_name = "cp";
    std::vector<double> helmholtz_a;
    double helmholtz_k = req.helmholtz.k;
    std::string checkpoint_out;
    std::size_t log_every = 0;

    auto* run = app.add_subcommand("run", "Train one model and write its result record");
    run->add_option("--pde", req.problem, "klein-gordon | helmholtz3d | poisson5d | flow-mixing")->capture_default_str();
    run->add_option("--model", model_name, "cp | tt | tucker")->capture_default_str();
    run->add_option("--rank", req.config.rank)->capture_default_str();
    run->add_option("--points", req.config.points_per_axis, "collocation points per axis")->capture_default_str();
    run->add_option("--iters", req.config.iterations)->capture_default_str();
    run->add_option("--lr", req.config.learning_rate)->capture_default_str();
    run->add_option("--lambda", req.config.lambda)->capture_default_str();
    run->add_option("--seed", req.config.seed)->capture_default_str();
    run->add_option("--resample-every", req.config.resample_every)->capture_default_str();
    run->add_option("--test-grid", req.config.test_grid, "comma-separated extents")->delimiter(',');
    run->add_option("--loss-stride", req.config.loss_stride)->capture_default_str();
    run->add_option("--out", req.output_dir, "output directory")->capture_default_str();
    run->add_option("--helmholtz-a", helmholtz_a, "a1,a2,a3")->delimiter(',')->expected(3);
    run->add_option("--helmholtz-k", helmholtz_k);
    run->add_option("--checkpoint", checkpoint_out, "also save the trained parameters here");
    run->add_option("--log-every", log_every, "print the loss to stderr every n iterations");

    std::string sweep_file;
    std::string sweep_out;
    auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments from a JSON file");
    sweep->add_option("config", sweep_file, "sweep file")->required();
    sweep->add_option("--out", sweep_out, "output directory (overrides the file)");

    std::string selftest_checkpoint;
    auto* selftest = app.add_subcommand("selftest", "Oracle, gradient, manufactured-solution and checkpoint checks");
    selftest->add_option("--checkpoint", selftest_checkpoint, "checkpoint file to validate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    if (*run) {
        try {
            req.kind = septensor::parse_decomposition(model_name);
            if (!helmholtz_a.empty()) std::copy(helmholtz_a.begin(), helmholtz_a.end(), req.helmholtz.a.begin());
            req.helmholtz.k = helmholtz_k;
            sb::validate_request(req);
        } catch (const std::invalid_argument& e) {
            return usage_error(e.what());
        }
        try {
            septensor::TrainObserver observer;
            if (log_every > 0)
                observer = [&](std::size_t it, const septensor::LossTerms& t) {
                    if (it % log_every == 0)
                        std::fprintf(stderr, "iter %zu  loss %.6e  data %.3e  physics %.3e\n", it, t.total, t.data,
                                     t.physics);
                };
            const auto outcome = sb::execute_run(req, observer);
            const auto files = sb::write_run_artifacts(outcome);
            if (!checkpoint_out.empty()) septensor::save_checkpoint(outcome.model, checkpoint_out);
            const auto& r = outcome.record;
            std::printf("%s %s rank %zu points %zu seed %llu: rel L2 %.4e -> %.4e, %zu iters, %.1f it/s%s\n",
                        req.problem.c_str(), std::string(septensor::to_string(req.kind)).c_str(), req.config.rank,
                        req.config.points_per_axis, static_cast<unsigned long long>(req.config.seed),
                        r.initial_relative_l2, r.final_relative_l2, r.iterations_completed, r.iterations_per_second,
                        r.diverged ? "  DIVERGED" : "");
            std::printf("record %s\nloss curve %s\n", files.record.c_str(), files.loss_curve.c_str());
            for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            return r.diverged ? kExitDiverged : 0;
        } catch (const std::exception& e) {
            std::cerr << "septensor: " << e.what() << "\n";
            return 1;
        }
    }

    if (*sweep) {
        std::ifstream in(sweep_file);
        if (!in) return usage_error("cannot read sweep file " + sweep_file);
        std::stringstream text;
        text << in.rdbuf();
        sb::SweepSpec spec;
        try {
            spec = sb::parse_sweep(text.str());
            if (!sweep_out.empty()) spec.output_dir = sweep_out;
            for (const auto& r : spec.expand()) sb::validate_request(r);
        } catch (const std::invalid_argument& e) {
            return usage_error(e.what());
        }
        const auto rows = sb::run_sweep(spec);
        std::size_t failed = 0;
        for (const auto& row : rows) {
            std::printf("%-40s %-10s rel L2 %.4e\n", sb::run_id(row.request).c_str(), row.status.c_str(),
                        row.record.final_relative_l2);
            failed += row.status == "ok" ? 0 : 1;
        }
        std::printf("%zu runs, %zu failed; tables in %s\n", rows.size(), failed, spec.output_dir.c_str());
        return 0;
    }

    if (*selftest) {
        sb::SelftestOptions options;
        if (!selftest_checkpoint.empty()) options.checkpoint = selftest_checkpoint;
        bool ok = true;
        for (const auto& suite : sb::run_selftest(options)) {
            std::printf("%s\n", sb::format_suite(suite).c_str());
            ok = ok && suite.passed;
        }
        std::printf("selftest %s\n", ok ? "PASS" : "FAIL");
        return ok ? 0 : kExitSelftest;
    }
    return 0;
}
