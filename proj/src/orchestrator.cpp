#include "aura/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace aura {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng agent_stream(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xA6E7u,
                    static_cast<std::uint32_t>(index)};
  return Rng(seq);
}

std::string feedback_prompt(const StationSnapshot& target, const StationSnapshot& neighbor, TrafficLevel traffic) {
  std::string p = build_prompt(target, neighbor, traffic).text;
  p.resize(p.size() - kAnswerFormatSentence.size());
  p += "Instead of an action, reply with exactly one adjustment for the station's learner: "
       "increase_exploration, decrease_exploration, prioritize_handoffs, prioritize_energy, or none.";
  return p;
}

// Scripted counterpart of the feedback prompt: damp exploration while the
// station is shedding requests.
std::optional<VerbalInstruction> scripted_feedback(const StationSnapshot& target) {
  if (target.dropped_last_step >= 3) return VerbalInstruction::DecreaseExploration;
  return std::nullopt;
}

}  // namespace

std::string_view configuration_name(Configuration c) {
  switch (c) {
    case Configuration::MarlOnly: return "marl_only";
    case Configuration::GuidedMarl: return "guided_marl";
    case Configuration::Aura: return "aura";
  }
  return "?";
}

std::optional<Configuration> parse_configuration(std::string_view s) {
  if (s == "marl_only") return Configuration::MarlOnly;
  if (s == "guided_marl") return Configuration::GuidedMarl;
  if (s == "aura") return Configuration::Aura;
  return std::nullopt;
}

void RunMetrics::merge(const RunMetrics& o) {
  dropped_requests_total += o.dropped_requests_total;
  dropped_handoffs += o.dropped_handoffs;
  dropped_admissions += o.dropped_admissions;
  failure_steps += o.failure_steps;
  llm_queries += o.llm_queries;
  llm_adoptions += o.llm_adoptions;
  llm_translation_failures += o.llm_translation_failures;
  llm_errors += o.llm_errors;
  decisions_with_suggestion += o.decisions_with_suggestion;
  delayed_reward_events += o.delayed_reward_events;
  delayed_reward_flags += o.delayed_reward_flags;
  feedback_changes += o.feedback_changes;
  llm_latency_us += o.llm_latency_us;
  episode_returns.insert(episode_returns.end(), o.episode_returns.begin(), o.episode_returns.end());
  if (agents.empty()) {
    agents = o.agents;
    return;
  }
  for (std::size_t i = 0; i < std::min(agents.size(), o.agents.size()); ++i) {
    AgentMetrics& a = agents[i];
    const AgentMetrics& b = o.agents[i];
    a.dropped_requests += b.dropped_requests;
    a.dropped_handoffs += b.dropped_handoffs;
    a.dropped_admissions += b.dropped_admissions;
    a.llm_queries += b.llm_queries;
    a.llm_adoptions += b.llm_adoptions;
    a.decisions_with_suggestion += b.decisions_with_suggestion;
    a.translation_failures += b.translation_failures;
  }
}

void RunSettings::validate() const {
  scenario.validate();
  learning.validate();
  if (schedule.interval_steps <= 0) throw ConfigError("batch interval must be positive");
  if (cac_interval_episodes <= 0) throw ConfigError("cac_interval_episodes must be positive");
}

std::uint64_t episode_seed(std::uint64_t cell_seed, Phase phase, int episode) {
  const std::uint64_t tag = phase == Phase::Train ? 0x7261696EULL : 0x74657374ULL;
  return splitmix64(splitmix64(cell_seed ^ (tag << 32)) + static_cast<std::uint64_t>(episode));
}

EpisodeRunner::EpisodeRunner(RunSettings settings, std::uint64_t seed, std::shared_ptr<AdvisorBackend> advisor,
                             std::shared_ptr<Evaluator> evaluator)
    : settings_(std::move(settings)),
      live_scenario_(settings_.scenario),
      seed_(seed),
      advisor_(std::move(advisor)),
      evaluator_(std::move(evaluator)) {
  settings_.validate();
  const Configuration c = settings_.configuration;
  if (uses_advisor(c) != static_cast<bool>(advisor_)) {
    throw ConfigError(std::string(configuration_name(c)) +
                      (advisor_ ? ": advisor backend given but the configuration has no advisor"
                                : ": configuration requires an advisor backend"));
  }
  if (uses_alignment(c) != static_cast<bool>(evaluator_)) {
    throw ConfigError(std::string(configuration_name(c)) +
                      (evaluator_ ? ": evaluator given but the configuration has no alignment controller"
                                  : ": configuration requires an evaluator"));
  }
  for (std::size_t i = 0; i < settings_.scenario.stations.size(); ++i) {
    AgentRuntime a;
    a.id = settings_.scenario.stations[i].id;
    a.trust.value = settings_.learning.trust_init;
    a.rng = agent_stream(seed, i);
    a.history.agent_id = a.id;
    agents_.push_back(std::move(a));
  }
  held_.assign(agents_.size(), std::nullopt);
}

void EpisodeRunner::emit(nlohmann::json event) {
  nlohmann::json line = tags_;
  line.update(event);
  events_ += line.dump();
  events_ += '\n';
}

void EpisodeRunner::refresh_suggestions(const EnvironmentState& env, RunMetrics& m) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const std::size_t nb = neighbor_of(env, i);
    const AdvisorQuery q = make_query(snapshot_of(env.stations[i], env.users),
                                      snapshot_of(env.stations[nb], env.users), live_scenario_.traffic_level);
    const Suggestion s = advisor_->suggest(q);
    held_[i] = s.action;
    ++m.llm_queries;
    ++m.agents[i].llm_queries;
    m.llm_latency_us += s.latency.count();
    if (s.error) ++m.llm_errors;
    if (s.translation_failure) {
      ++m.llm_translation_failures;
      ++m.agents[i].translation_failures;
    }
  }
}

void EpisodeRunner::apply_feedback(const EnvironmentState& env) {
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const StationSnapshot target = snapshot_of(env.stations[i], env.users);
    std::optional<VerbalInstruction> instr;
    if (advisor_->kind() == BackendKind::Scripted) {
      instr = scripted_feedback(target);
    } else {
      const std::size_t nb = neighbor_of(env, i);
      const Completion c = advisor_->complete(
          feedback_prompt(target, snapshot_of(env.stations[nb], env.users), live_scenario_.traffic_level));
      if (c.text) instr = parse_instruction(*c.text);
    }
    if (!instr) continue;
    const FeedbackResult r = apply_verbal_feedback(*instr, current_epsilon_, live_scenario_.weights);
    current_epsilon_ = r.epsilon;
    live_scenario_.weights = r.weights;
    emit({{"type", "feedback"},
          {"agent", agents_[i].id},
          {"instruction", instruction_name(*instr)},
          {"param", r.change.name},
          {"before", r.change.before},
          {"after", r.change.after}});
  }
}

void EpisodeRunner::run_alignment(RunMetrics& m, int episode) {
  for (AgentRuntime& a : agents_) {
    if (a.history.empty()) continue;
    const DelayedReward r = evaluate(a.history, *evaluator_);
    apply_delayed(a.q, a.history, r, settings_.learning.effective_delayed_alpha());
    ++m.delayed_reward_events;
    if (r.flagged) ++m.delayed_reward_flags;
    emit({{"type", "delayed_reward"},
          {"episode", episode},
          {"agent", a.id},
          {"value", r.value},
          {"evaluator", evaluator_->name()},
          {"flagged", r.flagged}});
  }
}

RunMetrics EpisodeRunner::run_episode(Phase phase, int episode, double epsilon) {
  const std::size_t n = agents_.size();
  const bool guided = uses_advisor(settings_.configuration);
  const bool aligned = uses_alignment(settings_.configuration);

  RunMetrics m;
  for (const AgentRuntime& a : agents_) m.agents.push_back(AgentMetrics{.id = a.id});
  current_epsilon_ = epsilon;
  live_scenario_.weights = settings_.scenario.weights;

  EnvironmentState env = reset(live_scenario_, episode_seed(seed_, phase, episode));
  std::fill(held_.begin(), held_.end(), std::nullopt);

  std::vector<Observation> obs(n);
  std::vector<Action> actions(n);
  std::vector<bool> adopted(n);
  double episode_return = 0.0;

  for (int t = 0; t < live_scenario_.episode_length; ++t) {
    if (guided && settings_.schedule.is_boundary(t)) {
      refresh_suggestions(env, m);
      if (settings_.verbal_feedback) apply_feedback(env);
    }

    for (std::size_t i = 0; i < n; ++i) {
      AgentRuntime& a = agents_[i];
      obs[i] = observe(env.stations[i], env.users);
      const Action own = select_action(a.q, obs[i], current_epsilon_, a.rng);
      const Decision d = combine_decision(held_[i], own, a.trust, a.rng);
      actions[i] = d.action;
      adopted[i] = d.adopted_llm;
      if (held_[i] && *held_[i] != own) {
        ++m.decisions_with_suggestion;
        ++m.agents[i].decisions_with_suggestion;
      }
      if (d.adopted_llm) {
        ++m.llm_adoptions;
        ++m.agents[i].llm_adoptions;
      }
    }

    const StepOutcome out = step(live_scenario_, env, actions);

    for (std::size_t i = 0; i < n; ++i) {
      AgentRuntime& a = agents_[i];
      const double r = out.rewards[i];
      const Observation next = observe(env.stations[i], env.users);
      q_update(a.q, obs[i], actions[i], r, next, settings_.learning);
      a.trust = update_trust(a.trust, held_[i], actions[i], r, settings_.learning);
      if (aligned) accumulate(a.history, TransitionRecord{obs[i], actions[i], r, out.psi[i], global_step_});
      const StepCounters& c = env.stations[i].last_step;
      m.agents[i].dropped_admissions += c.dropped_admissions;
      m.agents[i].dropped_handoffs += c.handoff_failures;
      m.agents[i].dropped_requests += c.drops();
      episode_return += r;
    }
    m.dropped_requests_total += out.dropped_requests;
    m.dropped_handoffs += out.dropped_handoffs;
    m.dropped_admissions += out.dropped_admissions;
    if (out.is_failure_step) ++m.failure_steps;

    if (trace_ || settings_.step_events) {
      StepTrace tr{episode, t, held_, actions, adopted, out};
      if (settings_.step_events) {
        std::vector<int> codes;
        for (Action act : actions) codes.push_back(action_code(act));
        emit({{"type", "step"},
              {"phase", phase == Phase::Train ? "train" : "test"},
              {"episode", episode},
              {"step", t},
              {"actions", codes},
              {"dropped_requests", out.dropped_requests},
              {"dropped_handoffs", out.dropped_handoffs},
              {"dropped_admissions", out.dropped_admissions},
              {"failure", out.is_failure_step}});
      }
      if (trace_) trace_(tr);
    }
    ++global_step_;
  }

  m.episode_returns.push_back(episode_return);
  ++episodes_run_;
  if (aligned && episodes_run_ % settings_.cac_interval_episodes == 0) run_alignment(m, episode);

  emit({{"type", "episode"},
        {"phase", phase == Phase::Train ? "train" : "test"},
        {"episode", episode},
        {"dropped_requests", m.dropped_requests_total},
        {"dropped_handoffs", m.dropped_handoffs},
        {"dropped_admissions", m.dropped_admissions},
        {"failure_steps", m.failure_steps},
        {"llm_queries", m.llm_queries},
        {"llm_adoptions", m.llm_adoptions},
        {"llm_errors", m.llm_errors}});
  return m;
}

RunMetrics EpisodeRunner::run_train_test(int train_episodes, int test_episodes) {
  for (int e = 0; e < train_episodes; ++e) run_episode(Phase::Train, e, epsilon_for_episode(settings_.learning, e));
  RunMetrics total;
  for (const AgentRuntime& a : agents_) total.agents.push_back(AgentMetrics{.id = a.id});
  for (int e = 0; e < test_episodes; ++e) total.merge(run_episode(Phase::Test, e, settings_.learning.epsilon_floor));
  return total;
}

void ExperimentPlan::validate() const {
  if (configurations.empty()) throw ConfigError("plan: no configurations");
  if (traffic_levels.empty()) throw ConfigError("plan: no traffic levels");
  if (seeds.empty()) throw ConfigError("plan: seed list is empty");
  if (train_episodes < 0 || test_episodes <= 0)
    throw ConfigError("plan: train_episodes must be >= 0 and test_episodes > 0");
  if (parallelism <= 0) throw ConfigError("plan: parallelism must be positive");
  if (backend.kind == BackendKind::Replay && backend.replay_log.empty())
    throw ConfigError("plan: replay backend requires replay_log");
  RunSettings{Configuration::MarlOnly, scenario, learning, schedule, cac_interval_episodes}.validate();
}

std::vector<CellResult> run_experiment(const ExperimentPlan& plan, const ExperimentContext& ctx) {
  plan.validate();

  const bool any_advisor = std::any_of(plan.configurations.begin(), plan.configurations.end(), uses_advisor);
  std::shared_ptr<AdvisorBackend> backend;
  std::shared_ptr<Evaluator> evaluator;
  if (any_advisor) {
    switch (plan.backend.kind) {
      case BackendKind::Scripted:
        backend = std::make_shared<ScriptedAdvisor>();
        evaluator = std::make_shared<ScriptedEvaluator>();
        break;
      case BackendKind::Replay:
        backend = std::make_shared<ReplayAdvisor>(ReplayAdvisor::from_file(plan.backend.replay_log));
        evaluator = std::make_shared<LlmEvaluator>(backend);
        break;
      case BackendKind::Remote: {
        RemoteConfig rc = ctx.remote ? *ctx.remote : RemoteConfig::from_environment();
        auto transport = ctx.transport ? ctx.transport : std::make_shared<HttpTransport>();
        backend = std::make_shared<RemoteAdvisor>(std::move(rc), std::move(transport));
        evaluator = std::make_shared<LlmEvaluator>(backend);
        break;
      }
    }
  }

  std::vector<CellKey> cells;
  for (Configuration c : plan.configurations)
    for (TrafficLevel t : plan.traffic_levels)
      for (std::uint64_t s : plan.seeds) cells.push_back({c, t, s});

  std::vector<std::optional<CellResult>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) return;
      try {
        const CellKey& key = cells[idx];
        RunSettings rs;
        rs.configuration = key.configuration;
        rs.scenario = plan.scenario;
        rs.scenario.traffic_level = key.traffic;
        rs.learning = plan.learning;
        rs.schedule = plan.schedule;
        rs.cac_interval_episodes = plan.cac_interval_episodes;
        rs.verbal_feedback = plan.verbal_feedback;
        rs.step_events = plan.step_events;
        EpisodeRunner runner(rs, key.seed, uses_advisor(key.configuration) ? backend : nullptr,
                             uses_alignment(key.configuration) ? evaluator : nullptr);
        runner.set_event_tags({{"config", configuration_name(key.configuration)},
                               {"traffic", traffic_name(key.traffic)},
                               {"seed", key.seed}});
        RunMetrics m = runner.run_train_test(plan.train_episodes, plan.test_episodes);
        slots[idx] = CellResult{key, std::move(m), runner.agents(), runner.events()};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = cells.size();
        return;
      }
    }
  };

  const int threads = std::min<int>(plan.parallelism, static_cast<int>(cells.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<CellResult> results;
  results.reserve(slots.size());
  for (auto& s : slots) results.push_back(std::move(*s));
  return results;
}

}  // namespace aura
