#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "autonet/experiment.hpp"

namespace autonet {

/// Bad command-line input; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RunMode { Train, Infer };
std::string_view to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

struct RunManifest {
  ScenarioSpec scenario;
  std::filesystem::path topology;
  RunMode mode = RunMode::Train;
  std::filesystem::path out;
  std::optional<std::filesystem::path> policy;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;
inline constexpr int kUsage = 2;
}  // namespace exit_code

/// Throws UsageError when the manifest cannot describe a run.
void validate(const RunManifest& manifest);

/// Runs one scenario and writes every artifact under `manifest.out`.
/// Messages go to `out`/`err`; the return value is the process exit code.
int cmd_run(const RunManifest& manifest, std::ostream& out, std::ostream& err);

/// Aligns the runs in `dirs` into one table. Writes comparison.txt,
/// comparison.csv and comparison_summary.csv into `out_dir` when given.
int cmd_compare(const std::vector<std::filesystem::path>& dirs, const std::optional<std::filesystem::path>& out_dir,
                std::ostream& out, std::ostream& err);

/// Boots `topology`, registers every service name and prints who resolved.
int cmd_discover(const std::filesystem::path& topology, std::ostream& out, std::ostream& err);

/// Shortest decimal that reads back to the same double; "nan" for NaN.
std::string format_number(double value);

}  // namespace autonet
