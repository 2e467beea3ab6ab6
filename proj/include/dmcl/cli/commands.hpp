#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include "dmcl/cli/config.hpp"
#include "dmcl/error.hpp"

namespace dmcl::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitSchema = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitDomain = 5,
};

int exit_code_for(ErrorCategory c);

enum class Verbosity { Quiet, Normal, Verbose };

/// Everything a command needs besides its config document. Relative paths
/// inside the config resolve against `base_dir`.
struct CommandContext {
  std::filesystem::path out_dir;
  std::filesystem::path base_dir = ".";
  Verbosity verbosity = Verbosity::Normal;
  /// Progress lines (stderr in the tool).
  std::function<void(const std::string&)> log;
};

// Each command validates its whole config before touching the output
// directory, writes its files plus run_manifest.json under out_dir, and
// returns the summary that the tool prints.
json cmd_synth(const json& config, const CommandContext& ctx);
json cmd_train(const json& config, const CommandContext& ctx);
json cmd_eval(const json& config, const CommandContext& ctx);
json cmd_analyze(const json& config, const CommandContext& ctx);
json cmd_labels(const json& config, const CommandContext& ctx);

/// Full tool entry point: parses argv, dispatches and maps errors to exit codes.
int run_tool(int argc, char** argv);

}  // namespace dmcl::cli
