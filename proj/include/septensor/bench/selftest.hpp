#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace septensor::bench {

struct SuiteResult {
    std::string name;
    bool passed = false;
    double milliseconds = 0.0;
    std::string detail;
};

struct SelftestOptions {
    /// When set, the checkpoint suite also loads and validates this file.
    std::optional<std::filesystem::path> checkpoint;
};

[[nodiscard]] SuiteResult suite_assembly();
[[nodiscard]] SuiteResult suite_autodiff();
[[nodiscard]] SuiteResult suite_manufactured();
[[nodiscard]] SuiteResult suite_checkpoint(const SelftestOptions& options);

[[nodiscard]] std::vector<SuiteResult> run_selftest(const SelftestOptions& options = {});

/// "assembly      PASS   12.3 ms  <detail>"
[[nodiscard]] std::string format_suite(const SuiteResult& result);

}  // namespace septensor::bench
