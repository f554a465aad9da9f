#pragma once

#include <string>
#include <vector>

#include "septensor/bench/record.hpp"

namespace septensor::bench {

/// Cartesian grid of runs. Every list left empty in the file means "no
/// runs" except `models`, `points` and `seeds`, which fall back to the
/// defaults of RunRequest.
struct SweepSpec {
    std::vector<std::string> problems;
    std::vector<Decomposition> models;
    std::vector<std::size_t> ranks;
    std::vector<std::size_t> points;
    std::vector<std::uint64_t> seeds;
    TrainConfig base;
    HelmholtzOptions helmholtz;
    std::string output_dir = "sweep";

    [[nodiscard]] std::vector<RunRequest> expand() const;
};

/// Parses the JSON sweep file. An empty or whitespace-only file is an
/// empty sweep. Throws std::invalid_argument on malformed input.
[[nodiscard]] SweepSpec parse_sweep(const std::string& text);

struct SweepRow {
    RunRequest request;
    std::string status;  // "ok", "diverged" or "error: ..."
    ResultRecord record;
};

struct AggregateRow {
    std::string problem;
    Decomposition kind = Decomposition::CP;
    std::size_t rank = 0;
    std::size_t points = 0;
    std::size_t runs = 0;
    std::size_t failed = 0;
    double mean_relative_l2 = 0.0;  // over successful seeds
    double min_relative_l2 = 0.0;
};

[[nodiscard]] std::vector<AggregateRow> aggregate(const std::vector<SweepRow>& rows);
[[nodiscard]] std::string runs_csv(const std::vector<SweepRow>& rows);
[[nodiscard]] std::string aggregate_csv(const std::vector<AggregateRow>& rows);

/// Worker count: SEPTENSOR_THREADS if set and positive, else the hardware
/// concurrency, never more than the number of runs.
[[nodiscard]] std::size_t sweep_workers(std::size_t runs);

/// Runs everything, writing per-run artifacts as each run finishes and the
/// two CSV tables at the end. Rows keep the expansion order.
std::vector<SweepRow> run_sweep(const SweepSpec& spec);

}  // namespace septensor::bench
