#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "omt/app/config.hpp"

namespace omt::app {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int assertion_failed = 1;
inline constexpr int config_error = 2;
inline constexpr int numerical_failure = 3;
}  // namespace exit_code

/// Runs the task and writes result.csv, summary.json and plotdata/*.csv into
/// `out`. Returns the summary; "passed" tells whether every check held.
nlohmann::ordered_json run_task(const RunConfig& config, const std::filesystem::path& out,
                                unsigned threads, std::ostream& log);

/// Full `omt-term run` behaviour: load, override, validate, run, map errors
/// to exit codes. Diagnostics go to `err`.
int run_command(const std::filesystem::path& config_path, const std::filesystem::path& out,
                const std::vector<std::string>& overrides, unsigned threads, std::ostream& log,
                std::ostream& err);

}  // namespace omt::app
