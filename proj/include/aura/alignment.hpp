#pragma once

// Centralized alignment controller: per-agent transition histories scored
// into a delayed reward in [-1, 1] and applied as a flat bonus to every
// (observation, action) entry of the history.

#include <memory>
#include <string>
#include <vector>

#include "aura/advisor.hpp"
#include "aura/agent.hpp"

namespace aura {

struct AgentHistory {
  std::string agent_id;
  std::vector<TransitionRecord> records;
  std::uint64_t window_start_step = 0;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
};

/// Appends `record`; throws OrderingError unless its step index is strictly
/// greater than the last stored one.
void accumulate(AgentHistory& history, TransitionRecord record);

struct DelayedReward {
  double value = 0.0;
  std::string rationale;
  bool flagged = false;  // evaluator output was clamped or unparseable
};

class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual std::string name() const = 0;
  virtual DelayedReward score(const AgentHistory& history) = 0;
};

/// 1 - 2 * (drops / max(1, requests)) over the window, clamped to [-1, 1].
class ScriptedEvaluator final : public Evaluator {
 public:
  std::string name() const override { return "scripted"; }
  DelayedReward score(const AgentHistory& history) override;
};

/// Asks a text backend to grade the serialized history and parses the first
/// real number from the reply.
class LlmEvaluator final : public Evaluator {
 public:
  explicit LlmEvaluator(std::shared_ptr<AdvisorBackend> backend);
  std::string name() const override;
  DelayedReward score(const AgentHistory& history) override;

 private:
  std::shared_ptr<AdvisorBackend> backend_;
};

std::string build_evaluation_prompt(const AgentHistory& history);

/// Parses the first real number in `reply` (e.g. "0.4", "-1", "+.5").
std::optional<double> parse_reward(std::string_view reply);

/// Clamps to [-1, 1]; a non-finite or out-of-range value is flagged.
DelayedReward clamp_reward(double value, std::string rationale);

/// Throws PreconditionError on an empty history.
DelayedReward evaluate(const AgentHistory& history, Evaluator& evaluator);

/// Q(s,a) += alpha * r for every record, once per occurrence, then clears
/// the history.
void apply_delayed(QTable& q, AgentHistory& history, const DelayedReward& reward, double alpha);

}  // namespace aura
