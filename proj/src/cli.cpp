#include "aura/cli.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "aura/report.hpp"

namespace aura::cli {

namespace {

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != ' ') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("not a seed: '" + std::string(s) + "'");
  return v;
}

template <typename T, typename Parse>
std::vector<T> parse_names(std::string_view text, Parse parse, const char* what) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) {
    const auto v = parse(item);
    if (!v) throw ConfigError(std::string("unknown ") + what + " '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      seeds.push_back(parse_u64(item));
      continue;
    }
    const std::uint64_t lo = parse_u64(std::string_view(item).substr(0, dash));
    const std::uint64_t hi = parse_u64(std::string_view(item).substr(dash + 1));
    if (hi < lo) throw ConfigError("empty seed range '" + item + "'");
    if (hi - lo >= 100000) throw ConfigError("seed range too large '" + item + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  return seeds;
}

ParseOutcome parse_args(int argc, const char* const* argv) {
  CLI::App app{"Cellular power-control experiments with LLM-advised Q-learning agents", "aura"};
  app.require_subcommand(1);

  RunCommand run;
  std::string seeds, traffic, configs, backend, replay_log;
  int batch = 0, par = 0, train = -1, test = 0;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment plan and write results");
  run_cmd->add_option("--plan", run.plan, "Plan file (JSON)")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run.out, "Output directory")->required();
  run_cmd->add_option("--seeds", seeds, "Seed list, e.g. 1,2,5-8");
  run_cmd->add_option("--traffic", traffic, "Traffic levels: low,normal,high");
  run_cmd->add_option("--config", configs, "Configurations: marl_only,guided_marl,aura");
  run_cmd->add_option("--backend", backend, "Advisor backend")
      ->check(CLI::IsMember({"scripted", "replay", "remote"}));
  run_cmd->add_option("--replay-log", replay_log, "Replay log for the replay backend")->check(CLI::ExistingFile);
  run_cmd->add_option("--batch-interval", batch, "Steps between advisor refreshes")->check(CLI::PositiveNumber);
  run_cmd->add_option("--parallelism", par, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_option("--train-episodes", train, "Training episodes per cell")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--test-episodes", test, "Test episodes per cell")->check(CLI::PositiveNumber);

  StatsCommand stats;
  auto* stats_cmd = app.add_subcommand("stats", "Kruskal-Wallis and Dunn tests over results.csv");
  stats_cmd->add_option("--results", stats.results, "results.csv")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", stats.out, "Output CSV")->required();
  stats_cmd->add_option("--metric", stats.metric, "Metric")
      ->check(CLI::IsMember({"dropped_requests", "dropped_handoffs", "dropped_admissions"}));

  ExportCommand exp;
  auto* export_cmd = app.add_subcommand("export", "Write plot data for figure panels");
  export_cmd->add_option("--results", exp.results, "results.csv")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--figure", exp.figure, "Panel id")->check(CLI::IsMember({"a", "d", "e", "all"}));
  export_cmd->add_option("--out", exp.out, "Output directory")->required();

  ReplayCommand replay;
  auto* replay_cmd = app.add_subcommand("replay", "Recount test-phase totals from an events log");
  replay_cmd->add_option("--events", replay.events, "events.jsonl")->required()->check(CLI::ExistingFile);

  ParseOutcome outcome;
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, err;
    outcome.exit_code = app.exit(e, o, err) == 0 ? kOk : kUsageError;
    outcome.message = o.str() + err.str();
    return outcome;
  }

  try {
    if (*run_cmd) {
      if (!seeds.empty()) run.seeds = parse_seed_list(seeds);
      if (!traffic.empty())
        run.traffic = parse_names<TrafficLevel>(traffic, parse_traffic_level, "traffic level");
      if (!configs.empty())
        run.configurations = parse_names<Configuration>(configs, parse_configuration, "configuration");
      if (!backend.empty()) run.backend = parse_backend_kind(backend);
      if (!replay_log.empty()) run.replay_log = replay_log;
      if (batch > 0) run.batch_interval = batch;
      if (par > 0) run.parallelism = par;
      if (train >= 0) run.train_episodes = train;
      if (test > 0) run.test_episodes = test;
      outcome.command = run;
    } else if (*stats_cmd) {
      outcome.command = stats;
    } else if (*export_cmd) {
      outcome.command = exp;
    } else {
      outcome.command = replay;
    }
  } catch (const ConfigError& e) {
    outcome.exit_code = kUsageError;
    outcome.message = std::string(e.what()) + "\n";
  }
  return outcome;
}

ExperimentPlan resolve_plan(const RunCommand& cmd) {
  ExperimentPlan plan = load_plan(cmd.plan);
  if (cmd.seeds) plan.seeds = *cmd.seeds;
  if (cmd.traffic) plan.traffic_levels = *cmd.traffic;
  if (cmd.configurations) plan.configurations = *cmd.configurations;
  if (cmd.backend) plan.backend.kind = *cmd.backend;
  if (cmd.replay_log) plan.backend.replay_log = *cmd.replay_log;
  if (cmd.batch_interval) plan.schedule.interval_steps = *cmd.batch_interval;
  if (cmd.parallelism) plan.parallelism = *cmd.parallelism;
  if (cmd.train_episodes) plan.train_episodes = *cmd.train_episodes;
  if (cmd.test_episodes) plan.test_episodes = *cmd.test_episodes;
  plan.validate();
  return plan;
}

int execute(const Command& cmd, std::ostream& out, std::ostream& err) {
  (void)err;
  return std::visit(
      [&out](const auto& c) -> int {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, RunCommand>) {
          const ExperimentPlan plan = resolve_plan(c);
          const auto results = run_experiment(plan);
          write_experiment_outputs(plan, results, c.out);
          out << "cells: " << results.size() << "\n";
          out << "results: " << (c.out / "results.csv").string() << "\n";
        } else if constexpr (std::is_same_v<T, StatsCommand>) {
          const ResultTable t = stats_table(read_csv(c.results), c.metric);
          if (c.out.has_parent_path()) std::filesystem::create_directories(c.out.parent_path());
          write_csv(t, c.out);
          out << to_csv(t);
        } else if constexpr (std::is_same_v<T, ExportCommand>) {
          for (const auto& p : export_figure_data(read_csv(c.results), c.figure, c.out)) out << p.string() << "\n";
        } else {
          out << "config,traffic,seed,test_episodes,dropped_requests,dropped_handoffs,failure_steps,"
                 "failure_steps_from_steps,delayed_rewards\n";
          for (const auto& [key, t] : recount_events(c.events)) {
            const auto& [config, traffic, seed] = key;
            out << config << ',' << traffic << ',' << seed << ',' << t.test_episodes << ',' << t.dropped_requests
                << ',' << t.dropped_handoffs << ',' << t.failure_steps << ',' << t.failure_steps_from_steps << ','
                << t.delayed_rewards << "\n";
          }
        }
        return kOk;
      },
      cmd);
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  const ParseOutcome parsed = parse_args(argc, argv);
  if (!parsed.command) {
    (parsed.exit_code == kOk ? out : err) << parsed.message;
    return parsed.exit_code;
  }
  try {
    return execute(*parsed.command, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace aura::cli
