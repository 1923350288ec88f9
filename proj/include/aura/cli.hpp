#pragma once

// Command-line front end: run, stats, export, replay.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "aura/orchestrator.hpp"

namespace aura::cli {

struct RunCommand {
  std::filesystem::path plan;
  std::filesystem::path out;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::vector<TrafficLevel>> traffic;
  std::optional<std::vector<Configuration>> configurations;
  std::optional<BackendKind> backend;
  std::optional<std::filesystem::path> replay_log;
  std::optional<int> batch_interval;
  std::optional<int> parallelism;
  std::optional<int> train_episodes;
  std::optional<int> test_episodes;
};

struct StatsCommand {
  std::filesystem::path results;
  std::filesystem::path out;
  std::string metric = "dropped_requests";
};

struct ExportCommand {
  std::filesystem::path results;
  std::string figure = "all";
  std::filesystem::path out;
};

struct ReplayCommand {
  std::filesystem::path events;
};

using Command = std::variant<RunCommand, StatsCommand, ExportCommand, ReplayCommand>;

enum ExitCode : int { kOk = 0, kRuntimeError = 1, kUsageError = 2 };

/// Either a parsed command or an exit code with the text to print (help or a
/// usage error).
struct ParseOutcome {
  std::optional<Command> command;
  int exit_code = kOk;
  std::string message;
};

ParseOutcome parse_args(int argc, const char* const* argv);

/// "1,2,5-8" style list.
std::vector<std::uint64_t> parse_seed_list(std::string_view text);

/// Applies command-line overrides on top of the loaded plan.
ExperimentPlan resolve_plan(const RunCommand& cmd);

int execute(const Command& cmd, std::ostream& out, std::ostream& err);

/// parse_args + execute, mapping exceptions to exit codes.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace aura::cli
