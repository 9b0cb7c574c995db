#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "ucvme/cli/config.hpp"

namespace ucvme::cli {

/// Exit statuses shared by every command.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_usage = 2,
  exit_diverged = 3,
};

struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  /// evaluate only: directory written by a previous `train`.
  std::string from_dir;
};

/// The commands throw on bad input; run() maps exceptions to exit codes.
int cmd_train(const CommandOptions& options, std::ostream& out);
int cmd_ablate(const CommandOptions& options, std::ostream& out);
int cmd_variance_demo(const CommandOptions& options, std::ostream& out);
int cmd_evaluate(const CommandOptions& options, std::ostream& out);

/// Parses argv (CLI11) and dispatches.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ucvme::cli
