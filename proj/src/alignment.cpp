#include "aura/alignment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace aura {

namespace {

std::string clip_rationale(std::string_view text) {
  constexpr std::size_t kMax = 200;
  return std::string(text.substr(0, kMax));
}

}  // namespace

void accumulate(AgentHistory& history, TransitionRecord record) {
  if (!history.records.empty() && record.step_index <= history.records.back().step_index) {
    throw OrderingError("accumulate: step " + std::to_string(record.step_index) + " does not follow step " +
                        std::to_string(history.records.back().step_index));
  }
  if (history.records.empty()) history.window_start_step = record.step_index;
  history.records.push_back(std::move(record));
}

DelayedReward clamp_reward(double value, std::string rationale) {
  DelayedReward r;
  r.rationale = std::move(rationale);
  if (!std::isfinite(value)) {
    r.value = 0.0;
    r.flagged = true;
    return r;
  }
  r.value = std::clamp(value, -1.0, 1.0);
  r.flagged = r.value != value;
  return r;
}

DelayedReward ScriptedEvaluator::score(const AgentHistory& history) {
  long drops = 0;
  long requests = 0;
  for (const auto& rec : history.records) {
    drops += rec.psi.drops_this_step;
    requests += rec.psi.requests_this_step;
  }
  const double fraction = static_cast<double>(drops) / static_cast<double>(std::max(1L, requests));
  const double value = std::clamp(1.0 - 2.0 * fraction, -1.0, 1.0);
  std::string label = value >= 0.5 ? "Excellent" : value > -0.5 ? "Mixed" : "Poor";
  return {value,
          label + ": " + std::to_string(drops) + " of " + std::to_string(requests) + " requests dropped",
          false};
}

LlmEvaluator::LlmEvaluator(std::shared_ptr<AdvisorBackend> backend) : backend_(std::move(backend)) {
  if (!backend_) throw ConfigError("LlmEvaluator: backend is null");
}

std::string LlmEvaluator::name() const { return std::string(backend_name(backend_->kind())); }

std::string build_evaluation_prompt(const AgentHistory& history) {
  std::ostringstream os;
  os << "Act as an expert evaluator of a cellular base station controller (station " << history.agent_id
     << "). Judge the trajectory below on network efficiency, fairness, adaptability and long-term "
        "performance.\n";
  os << "Each line: step, observation, action, immediate reward, load, requests, drops.\n";
  for (const auto& rec : history.records) {
    char reward[32];
    char load[32];
    std::snprintf(reward, sizeof reward, "%.3f", rec.immediate_reward);
    std::snprintf(load, sizeof load, "%.2f", rec.psi.load_fraction);
    os << rec.step_index << ' ' << rec.observation.key() << ' ' << action_name(rec.action) << ' ' << reward
       << ' ' << load << ' ' << rec.psi.requests_this_step << ' ' << rec.psi.drops_this_step << '\n';
  }
  os << "Reply with a single score in [-1, 1]: +1 means Excellent optimization, -1 means Poor "
        "optimization.";
  return os.str();
}

std::optional<double> parse_reward(std::string_view reply) {
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const char c = reply[i];
    const bool digit_start = (c >= '0' && c <= '9') ||
                             (c == '.' && i + 1 < reply.size() && reply[i + 1] >= '0' && reply[i + 1] <= '9');
    if (!digit_start) continue;
    std::size_t start = i;
    bool negative = false;
    if (start > 0 && (reply[start - 1] == '-' || reply[start - 1] == '+')) {
      negative = reply[start - 1] == '-';
    }
    std::string token;
    if (reply[start] == '.') token = "0";
    std::size_t j = start;
    while (j < reply.size() && ((reply[j] >= '0' && reply[j] <= '9') || reply[j] == '.')) ++j;
    token += std::string(reply.substr(start, j - start));
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc{} || ptr == token.data()) return std::nullopt;
    return negative ? -v : v;
  }
  return std::nullopt;
}

DelayedReward LlmEvaluator::score(const AgentHistory& history) {
  const Completion c = backend_->complete(build_evaluation_prompt(history));
  if (!c.text) return {0.0, c.error ? "evaluator unreachable" : "no evaluator reply", true};
  const auto v = parse_reward(*c.text);
  if (!v) return {0.0, "unparseable evaluator reply", true};
  return clamp_reward(*v, clip_rationale(*c.text));
}

DelayedReward evaluate(const AgentHistory& history, Evaluator& evaluator) {
  if (history.empty()) throw PreconditionError("evaluate: history is empty");
  DelayedReward r = evaluator.score(history);
  if (!std::isfinite(r.value) || r.value < -1.0 || r.value > 1.0) {
    const bool was_flagged = r.flagged;
    r = clamp_reward(r.value, std::move(r.rationale));
    r.flagged = r.flagged || was_flagged;
  }
  return r;
}

void apply_delayed(QTable& q, AgentHistory& history, const DelayedReward& reward, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw PreconditionError("apply_delayed: alpha must lie in (0,1]");
  const double delta = alpha * reward.value;
  if (delta != 0.0) {
    for (const auto& rec : history.records) q.add(rec.observation, rec.action, delta);
  }
  history.records.clear();
  history.window_start_step = 0;
}

}  // namespace aura
