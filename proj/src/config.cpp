// JSON plan and scenario files.

#include <fstream>
#include <set>

#include "aura/orchestrator.hpp"

namespace aura {

namespace {

using nlohmann::json;

void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, std::string_view where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(where) + ": bad value for '" + key + "'");
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

RewardWeights weights_from_json(const json& j, RewardWeights w) {
  check_keys(j, "weights", {"serve", "drop", "energy", "handoff", "wasted"});
  read(j, "serve", w.serve, "weights");
  read(j, "drop", w.drop, "weights");
  read(j, "energy", w.energy, "weights");
  read(j, "handoff", w.handoff, "weights");
  read(j, "wasted", w.wasted, "weights");
  return w;
}

TrafficLevel traffic_from(const json& j, std::string_view where) {
  if (!j.is_string()) throw ConfigError(std::string(where) + ": traffic level must be a string");
  const auto t = parse_traffic_level(j.get<std::string>());
  if (!t) throw ConfigError(std::string(where) + ": unknown traffic level '" + j.get<std::string>() + "'");
  return *t;
}

LearningParams learning_from_json(const json& j, LearningParams p) {
  check_keys(j, "learning",
             {"alpha", "gamma", "epsilon", "epsilon_decay", "epsilon_floor", "trust_eta", "reward_ema_beta",
              "trust_init", "delayed_alpha"});
  read(j, "alpha", p.alpha, "learning");
  read(j, "gamma", p.gamma, "learning");
  read(j, "epsilon", p.epsilon, "learning");
  read(j, "epsilon_decay", p.epsilon_decay, "learning");
  read(j, "epsilon_floor", p.epsilon_floor, "learning");
  read(j, "trust_eta", p.trust_eta, "learning");
  read(j, "reward_ema_beta", p.reward_ema_beta, "learning");
  read(j, "trust_init", p.trust_init, "learning");
  if (j.contains("delayed_alpha")) {
    double a = 0.0;
    read(j, "delayed_alpha", a, "learning");
    p.delayed_alpha = a;
  }
  p.validate();
  return p;
}

}  // namespace

ScenarioConfig scenario_from_json(const json& j, ScenarioConfig c) {
  check_keys(j, "scenario", {"stations", "traffic_level", "traffic", "weights", "perturbation", "episode_length"});
  if (j.contains("stations")) {
    const json& st = j.at("stations");
    if (!st.is_array()) throw ConfigError("scenario: stations must be an array");
    c.stations.clear();
    for (const json& s : st) {
      check_keys(s, "scenario.stations[]", {"id", "kind"});
      if (!s.contains("id") || !s.contains("kind")) throw ConfigError("scenario.stations[]: id and kind are required");
      StationConfig sc;
      read(s, "id", sc.id, "scenario.stations[]");
      std::string kind;
      read(s, "kind", kind, "scenario.stations[]");
      const auto k = parse_station_kind(kind);
      if (!k) throw ConfigError("scenario.stations[]: unknown kind '" + kind + "'");
      sc.kind = *k;
      c.stations.push_back(std::move(sc));
    }
  }
  if (j.contains("traffic_level")) c.traffic_level = traffic_from(j.at("traffic_level"), "scenario");
  if (j.contains("traffic")) {
    const json& t = j.at("traffic");
    check_keys(t, "scenario.traffic", {"low", "normal", "high"});
    for (const auto& [name, spec] : t.items()) {
      const auto level = *parse_traffic_level(name);
      TrafficSpec& ts = c.traffic[static_cast<std::size_t>(level)];
      check_keys(spec, "scenario.traffic." + name, {"arrival_rate", "departure_prob"});
      read(spec, "arrival_rate", ts.arrival_rate, "scenario.traffic");
      read(spec, "departure_prob", ts.departure_prob, "scenario.traffic");
    }
  }
  if (j.contains("weights")) c.weights = weights_from_json(j.at("weights"), c.weights);
  if (j.contains("perturbation")) {
    const json& p = j.at("perturbation");
    check_keys(p, "scenario.perturbation", {"signal_db", "snr_db"});
    read(p, "signal_db", c.perturbation.signal_db, "scenario.perturbation");
    read(p, "snr_db", c.perturbation.snr_db, "scenario.perturbation");
  }
  read(j, "episode_length", c.episode_length, "scenario");
  c.validate();
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path, ScenarioConfig base) {
  return scenario_from_json(read_json_file(path), std::move(base));
}

ExperimentPlan plan_from_json(const json& j, const std::filesystem::path& base_dir) {
  check_keys(j, "plan",
             {"configurations", "traffic_levels", "seeds", "seed_count", "seed_start", "train_episodes",
              "test_episodes", "episode_length", "scenario", "learning", "weights", "batch_interval",
              "cac_interval_episodes", "verbal_feedback", "step_events", "save_policies", "backend",
              "parallelism"});
  ExperimentPlan plan;
  if (j.contains("configurations")) {
    plan.configurations.clear();
    for (const json& c : j.at("configurations")) {
      const auto cfg = c.is_string() ? parse_configuration(c.get<std::string>()) : std::nullopt;
      if (!cfg) throw ConfigError("plan: unknown configuration " + c.dump());
      plan.configurations.push_back(*cfg);
    }
  }
  if (j.contains("traffic_levels")) {
    plan.traffic_levels.clear();
    for (const json& t : j.at("traffic_levels")) plan.traffic_levels.push_back(traffic_from(t, "plan"));
  }
  if (j.contains("seeds") && j.contains("seed_count")) throw ConfigError("plan: give either seeds or seed_count");
  if (j.contains("seeds")) {
    read(j, "seeds", plan.seeds, "plan");
  } else if (j.contains("seed_count")) {
    int count = 0;
    std::uint64_t start = 1;
    read(j, "seed_count", count, "plan");
    read(j, "seed_start", start, "plan");
    if (count <= 0) throw ConfigError("plan: seed_count must be positive");
    for (int i = 0; i < count; ++i) plan.seeds.push_back(start + static_cast<std::uint64_t>(i));
  }
  read(j, "train_episodes", plan.train_episodes, "plan");
  read(j, "test_episodes", plan.test_episodes, "plan");
  if (j.contains("scenario")) plan.scenario = scenario_from_json(j.at("scenario"), plan.scenario);
  read(j, "episode_length", plan.scenario.episode_length, "plan");
  if (j.contains("weights")) plan.scenario.weights = weights_from_json(j.at("weights"), plan.scenario.weights);
  if (j.contains("learning")) plan.learning = learning_from_json(j.at("learning"), plan.learning);
  read(j, "batch_interval", plan.schedule.interval_steps, "plan");
  read(j, "cac_interval_episodes", plan.cac_interval_episodes, "plan");
  read(j, "verbal_feedback", plan.verbal_feedback, "plan");
  read(j, "step_events", plan.step_events, "plan");
  read(j, "save_policies", plan.save_policies, "plan");
  read(j, "parallelism", plan.parallelism, "plan");
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    std::string kind;
    if (b.is_string()) {
      kind = b.get<std::string>();
    } else {
      check_keys(b, "plan.backend", {"kind", "replay_log"});
      read(b, "kind", kind, "plan.backend");
      std::string log;
      read(b, "replay_log", log, "plan.backend");
      if (!log.empty()) {
        std::filesystem::path p(log);
        plan.backend.replay_log = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      }
    }
    const auto k = parse_backend_kind(kind);
    if (!k) throw ConfigError("plan: unknown backend '" + kind + "'");
    plan.backend.kind = *k;
  }
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  return plan_from_json(read_json_file(path), path.parent_path());
}

}  // namespace aura
