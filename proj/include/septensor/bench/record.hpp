#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "septensor/pde.hpp"
#include "septensor/trainer.hpp"

namespace septensor::bench {

struct RunRequest {
    std::string problem = "klein-gordon";
    Decomposition kind = Decomposition::CP;
    TrainConfig config;
    HelmholtzOptions helmholtz;
    std::string output_dir = "results";

    bool operator==(const RunRequest&) const = default;
};

struct ResultRecord {
    RunRequest request;
    double initial_relative_l2 = 0.0;
    double final_relative_l2 = 0.0;
    std::size_t iterations_completed = 0;
    double wall_seconds = 0.0;
    double iterations_per_second = 0.0;
    std::size_t collocation_coordinates = 0;
    bool diverged = false;
    std::string divergence_message;
    std::vector<std::string> warnings;
    std::string build_stamp;
    std::string timestamp;  // UTC, ISO 8601

    /// Field-wise; NaN compares equal to NaN.
    bool operator==(const ResultRecord& other) const;
};

/// Checks the problem name and kind against the registries. Throws
/// std::invalid_argument.
void validate_request(const RunRequest& request);

/// "<pde>_<kind>_r<rank>_n<points>_s<seed>", used for file names.
[[nodiscard]] std::string run_id(const RunRequest& request);

[[nodiscard]] std::string build_stamp();
[[nodiscard]] std::string utc_timestamp();

/// Stable key order; non-finite numbers are written as null.
[[nodiscard]] std::string to_json(const ResultRecord& record);
[[nodiscard]] ResultRecord record_from_json(const std::string& text);

/// Header "iteration,loss".
[[nodiscard]] std::string loss_curve_csv(const std::vector<LossPoint>& curve);

struct RunOutcome {
    ResultRecord record;
    TrainReport report;
    SeparatedModel model;  // trained parameters
};

/// Builds the problem and model from the request and trains. Files are not
/// written here.
[[nodiscard]] RunOutcome execute_run(const RunRequest& request, const TrainObserver& observer = {});

struct RunArtifacts {
    std::filesystem::path record;
    std::filesystem::path loss_curve;
};

/// Writes <id>.json and <id>_loss.csv under the request's output directory.
RunArtifacts write_run_artifacts(const RunOutcome& outcome);

/// Temporary sibling file plus rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace septensor::bench
