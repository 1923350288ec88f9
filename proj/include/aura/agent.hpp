#pragma once

// Tabular Q-learning agent owned by one base station.

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>

#include <json.hpp>

#include "aura/environment.hpp"
#include "aura/types.hpp"

namespace aura {

/// Local view of one station: power offset from the kind's minimum, coverage
/// class, capacity flag and a bucketed count of last step's dropped requests.
struct Observation {
  int power_bucket = 0;
  Coverage coverage = Coverage::Good;
  bool at_capacity = false;
  int dropped_bucket = 0;  // 0: none, 1: one or two, 2: three or more

  auto operator<=>(const Observation&) const = default;

  /// Canonical key, e.g. "p2|Fair|cap0|d1".
  std::string key() const;
  static std::optional<Observation> from_key(std::string_view key);
};

int dropped_bucket(int drops);

Observation observe(const StationState& station, std::span<const UserState> users);

class QTable {
 public:
  using Row = std::array<double, kNumActions>;

  double value(const Observation& s, Action a) const;
  Row row(const Observation& s) const;
  double max_value(const Observation& s) const;
  void set(const Observation& s, Action a, double v);
  void add(const Observation& s, Action a, double delta);

  std::size_t size() const { return rows_.size(); }
  const std::map<Observation, Row>& rows() const { return rows_; }

  /// Value equality: a missing row equals an all-zero row.
  bool operator==(const QTable& other) const;

 private:
  std::map<Observation, Row> rows_;
};

nlohmann::json qtable_to_json(const QTable& q);
QTable qtable_from_json(const nlohmann::json& j);
void save_qtable(const QTable& q, const std::filesystem::path& path);
QTable load_qtable(const std::filesystem::path& path);

struct LearningParams {
  double alpha = 0.1;
  double gamma = 0.9;
  double epsilon = 0.3;  // starting exploration rate
  double epsilon_decay = 0.995;
  double epsilon_floor = 0.05;
  double trust_eta = 0.05;
  double reward_ema_beta = 0.9;
  double trust_init = 0.5;
  std::optional<double> delayed_alpha;  // defaults to alpha

  double effective_delayed_alpha() const { return delayed_alpha.value_or(alpha); }

  /// Throws ConfigError if any knob is outside its legal range.
  void validate() const;
};

/// Exploration rate for a training episode: start * decay^episode, floored.
double epsilon_for_episode(const LearningParams& params, int episode);

struct TrustScore {
  double value = 0.5;
  double reward_ema = 0.0;
};

struct TransitionRecord {
  Observation observation;
  Action action = Action::Maintain;
  double immediate_reward = 0.0;
  EnvParams psi;
  std::uint64_t step_index = 0;
};

/// argmax over actions; ties go to the lowest action code.
Action greedy_action(const QTable& q, const Observation& obs);

/// Epsilon-greedy. Always consumes one uniform draw, plus one more when it
/// explores.
Action select_action(const QTable& q, const Observation& obs, double epsilon, Rng& rng);

/// One-cell TD update:
///   Q(s,a) += alpha * (r + gamma * max_a' Q(s',a') - Q(s,a))
void q_update(QTable& q, const Observation& s, Action a, double reward, const Observation& next,
              const LearningParams& params);

struct Decision {
  Action action;
  bool adopted_llm;
};

/// Probabilistic gate: a differing suggestion is adopted with probability
/// `trust.value`. Agreement is not adoption. Draws from `rng` only when a
/// differing suggestion is present.
Decision combine_decision(std::optional<Action> suggestion, Action own, const TrustScore& trust, Rng& rng);

TrustScore update_trust(TrustScore trust, std::optional<Action> suggestion, Action taken, double reward,
                        const LearningParams& params);

}  // namespace aura
