#pragma once

// Result tables on disk: results.csv, per-panel plot data, stats.csv, and
// recounts from events.jsonl.

#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "aura/orchestrator.hpp"
#include "aura/stats.hpp"

namespace aura {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain CSV table with a header row. Fields never contain commas or quotes.
struct ResultTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws ConfigError when absent
  bool has_column(std::string_view name) const;
  const std::string& cell(std::size_t row, std::string_view name) const;
  double number(std::size_t row, std::string_view name) const;
  /// Station ids that have per-agent columns, in header order.
  std::vector<std::string> agent_ids() const;
};

ResultTable results_table(const std::vector<CellResult>& results);
std::string to_csv(const ResultTable& table);
void write_csv(const ResultTable& table, const std::filesystem::path& path);
ResultTable read_csv(const std::filesystem::path& path);

/// Writes results.csv and events.jsonl; policies/ when the plan asks for it;
/// plotdata/ when the results cover every configuration and traffic level.
void write_experiment_outputs(const ExperimentPlan& plan, const std::vector<CellResult>& results,
                              const std::filesystem::path& out_dir);

enum class FigurePanel { DroppedRequests, UsageRate, FailureSteps };

/// Panel tables keyed like the figure: a (dropped requests), d (usage rate),
/// e (failure steps). Throws ConfigError naming the first missing
/// (configuration, traffic) cell.
ResultTable figure_panel(const ResultTable& results, FigurePanel panel);

/// `figure_id` is "a", "d", "e" or "all". Returns the written paths.
std::vector<std::filesystem::path> export_figure_data(const ResultTable& results, std::string_view figure_id,
                                                      const std::filesystem::path& out_dir);

/// Kruskal-Wallis across configurations with Dunn/Holm against marl_only,
/// per agent (plus "all" for system totals) and traffic level. `metric` is
/// dropped_requests, dropped_handoffs or dropped_admissions.
ResultTable stats_table(const ResultTable& results, std::string_view metric = "dropped_requests");

/// Column holding `metric` for `agent` ("all" means the system total).
std::string metric_column(std::string_view agent, std::string_view metric);

struct EventTotals {
  long test_episodes = 0;
  long dropped_requests = 0;
  long dropped_handoffs = 0;
  long failure_steps = 0;             // from episode summaries
  long failure_steps_from_steps = 0;  // from step events, when logged
  long delayed_rewards = 0;
};

/// Test-phase totals per (config, traffic, seed) recounted from an events
/// log.
std::map<std::tuple<std::string, std::string, std::uint64_t>, EventTotals> recount_events(
    const std::filesystem::path& events_path);

}  // namespace aura
