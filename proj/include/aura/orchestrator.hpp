#pragma once

// Episode and experiment driver wiring environment, agents, advisor and the
// alignment controller together.

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "aura/advisor.hpp"
#include "aura/agent.hpp"
#include "aura/alignment.hpp"
#include "aura/environment.hpp"

namespace aura {

enum class Configuration { MarlOnly, GuidedMarl, Aura };

std::string_view configuration_name(Configuration c);
std::optional<Configuration> parse_configuration(std::string_view s);

inline bool uses_advisor(Configuration c) { return c != Configuration::MarlOnly; }
inline bool uses_alignment(Configuration c) { return c == Configuration::Aura; }

struct BatchSchedule {
  int interval_steps = 10;
  bool is_boundary(int step) const { return step % interval_steps == 0; }
};

struct AgentMetrics {
  std::string id;
  long dropped_requests = 0;
  long dropped_handoffs = 0;
  long dropped_admissions = 0;
  long llm_queries = 0;
  long llm_adoptions = 0;
  long decisions_with_suggestion = 0;  // suggestion present and different from the agent's own pick
  long translation_failures = 0;

  double usage_rate() const {
    return static_cast<double>(llm_adoptions) / static_cast<double>(std::max(1L, decisions_with_suggestion));
  }
};

struct RunMetrics {
  long dropped_requests_total = 0;
  long dropped_handoffs = 0;
  long dropped_admissions = 0;
  long failure_steps = 0;
  long llm_queries = 0;
  long llm_adoptions = 0;
  long llm_translation_failures = 0;
  long llm_errors = 0;
  long decisions_with_suggestion = 0;
  long delayed_reward_events = 0;
  long delayed_reward_flags = 0;
  long feedback_changes = 0;
  long long llm_latency_us = 0;
  std::vector<double> episode_returns;
  std::vector<AgentMetrics> agents;

  double usage_rate() const {
    return static_cast<double>(llm_adoptions) / static_cast<double>(std::max(1L, decisions_with_suggestion));
  }
  void merge(const RunMetrics& other);
};

struct AgentRuntime {
  std::string id;
  QTable q;
  TrustScore trust;
  Rng rng;
  AgentHistory history;
};

/// Per-step trace for tests and step-level event logging.
struct StepTrace {
  int episode = 0;
  int step = 0;
  std::vector<std::optional<Action>> held_suggestions;
  std::vector<Action> actions;
  std::vector<bool> adopted;
  StepOutcome outcome;
};

struct RunSettings {
  Configuration configuration = Configuration::MarlOnly;
  ScenarioConfig scenario;
  LearningParams learning;
  BatchSchedule schedule;
  int cac_interval_episodes = 2;
  bool verbal_feedback = false;
  bool step_events = false;

  void validate() const;
};

enum class Phase { Train, Test };

/// Owns one cell's agents across episodes. Episode seeds depend only on the
/// cell seed, phase and episode index, so every configuration sees the same
/// traffic for a given seed.
class EpisodeRunner {
 public:
  /// Throws ConfigError when the components do not match the configuration:
  /// MarlOnly takes neither backend nor evaluator, GuidedMarl a backend only,
  /// Aura both.
  EpisodeRunner(RunSettings settings, std::uint64_t seed, std::shared_ptr<AdvisorBackend> advisor,
                std::shared_ptr<Evaluator> evaluator);

  RunMetrics run_episode(Phase phase, int episode, double epsilon);

  /// Trains, freezes exploration at the floor, then tests; returns test-phase
  /// metrics.
  RunMetrics run_train_test(int train_episodes, int test_episodes);

  const std::vector<AgentRuntime>& agents() const { return agents_; }
  std::vector<AgentRuntime>& agents() { return agents_; }
  const RunSettings& settings() const { return settings_; }

  void set_trace(std::function<void(const StepTrace&)> trace) { trace_ = std::move(trace); }

  /// JSON-lines event log accumulated so far (delayed rewards, feedback
  /// changes, episode summaries, and step events when enabled).
  const std::string& events() const { return events_; }
  void set_event_tags(nlohmann::json tags) { tags_ = std::move(tags); }

 private:
  void emit(nlohmann::json event);
  void refresh_suggestions(const EnvironmentState& env, RunMetrics& m);
  void apply_feedback(const EnvironmentState& env);
  void run_alignment(RunMetrics& m, int episode);

  RunSettings settings_;
  ScenarioConfig live_scenario_;  // weights may move under verbal feedback
  double current_epsilon_ = 0.0;
  std::uint64_t seed_;
  std::shared_ptr<AdvisorBackend> advisor_;
  std::shared_ptr<Evaluator> evaluator_;
  std::vector<AgentRuntime> agents_;
  std::vector<std::optional<Action>> held_;
  std::uint64_t global_step_ = 0;
  int episodes_run_ = 0;
  std::function<void(const StepTrace&)> trace_;
  std::string events_;
  nlohmann::json tags_ = nlohmann::json::object();
};

std::uint64_t episode_seed(std::uint64_t cell_seed, Phase phase, int episode);

// Experiments.

struct BackendSpec {
  BackendKind kind = BackendKind::Scripted;
  std::filesystem::path replay_log;
};

struct ExperimentPlan {
  std::vector<Configuration> configurations{Configuration::MarlOnly, Configuration::GuidedMarl,
                                            Configuration::Aura};
  std::vector<TrafficLevel> traffic_levels{TrafficLevel::Low, TrafficLevel::Normal, TrafficLevel::High};
  std::vector<std::uint64_t> seeds;
  int train_episodes = 300;
  int test_episodes = 50;
  ScenarioConfig scenario;
  LearningParams learning;
  BatchSchedule schedule;
  int cac_interval_episodes = 2;
  bool verbal_feedback = false;
  bool step_events = false;
  bool save_policies = false;
  BackendSpec backend;
  int parallelism = 1;

  void validate() const;
};

/// Plan file: JSON object. See README for the schema. Relative replay-log
/// paths resolve against `base_dir`.
ExperimentPlan plan_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
ExperimentPlan load_plan(const std::filesystem::path& path);
ScenarioConfig scenario_from_json(const nlohmann::json& j, ScenarioConfig base = {});
ScenarioConfig load_scenario(const std::filesystem::path& path, ScenarioConfig base = {});

struct CellKey {
  Configuration configuration;
  TrafficLevel traffic;
  std::uint64_t seed;
};

struct CellResult {
  CellKey key;
  RunMetrics metrics;  // test phase
  std::vector<AgentRuntime> agents;
  std::string events;
};

struct ExperimentContext {
  /// Used only when the plan selects the remote backend.
  std::shared_ptr<Transport> transport;
  /// Remote settings; read from the environment when unset.
  std::optional<RemoteConfig> remote;
};

/// Runs every (configuration, traffic, seed) cell. Results come back in plan
/// order regardless of parallelism.
std::vector<CellResult> run_experiment(const ExperimentPlan& plan, const ExperimentContext& ctx = {});

}  // namespace aura
