#include "aura/agent.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <vector>

namespace aura {

std::string Observation::key() const {
  std::string k = "p" + std::to_string(power_bucket);
  k += '|';
  k += coverage_name(coverage);
  k += at_capacity ? "|cap1|d" : "|cap0|d";
  k += std::to_string(dropped_bucket);
  return k;
}

std::optional<Observation> Observation::from_key(std::string_view key) {
  std::vector<std::string_view> parts;
  for (;;) {
    const auto bar = key.find('|');
    parts.push_back(key.substr(0, bar));
    if (bar == std::string_view::npos) break;
    key.remove_prefix(bar + 1);
  }
  if (parts.size() != 4) return std::nullopt;

  auto parse_int = [](std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
  };

  Observation obs;
  if (parts[0].size() < 2 || parts[0][0] != 'p' || !parse_int(parts[0].substr(1), obs.power_bucket) ||
      obs.power_bucket < 0)
    return std::nullopt;
  if (parts[1] == "Good") obs.coverage = Coverage::Good;
  else if (parts[1] == "Fair") obs.coverage = Coverage::Fair;
  else if (parts[1] == "Poor") obs.coverage = Coverage::Poor;
  else return std::nullopt;
  if (parts[2] == "cap0") obs.at_capacity = false;
  else if (parts[2] == "cap1") obs.at_capacity = true;
  else return std::nullopt;
  if (parts[3].size() != 2 || parts[3][0] != 'd' || !parse_int(parts[3].substr(1), obs.dropped_bucket) ||
      obs.dropped_bucket < 0 || obs.dropped_bucket > 2)
    return std::nullopt;
  return obs;
}

int dropped_bucket(int drops) {
  if (drops <= 0) return 0;
  if (drops <= 2) return 1;
  return 2;
}

Observation observe(const StationState& station, std::span<const UserState> users) {
  Observation obs;
  obs.power_bucket = station.power_dbm - station.spec().power_min;
  obs.coverage = coverage_quality(station, users);
  obs.at_capacity = station.at_capacity();
  obs.dropped_bucket = dropped_bucket(station.last_step.dropped_admissions + station.last_step.handoff_failures);
  return obs;
}

double QTable::value(const Observation& s, Action a) const {
  auto it = rows_.find(s);
  return it == rows_.end() ? 0.0 : it->second[action_index(a)];
}

QTable::Row QTable::row(const Observation& s) const {
  auto it = rows_.find(s);
  return it == rows_.end() ? Row{} : it->second;
}

double QTable::max_value(const Observation& s) const {
  const Row r = row(s);
  return *std::max_element(r.begin(), r.end());
}

void QTable::set(const Observation& s, Action a, double v) {
  if (!std::isfinite(v)) throw PreconditionError("QTable: non-finite value for " + s.key());
  rows_[s][action_index(a)] = v;
}

void QTable::add(const Observation& s, Action a, double delta) {
  set(s, a, value(s, a) + delta);
}

bool QTable::operator==(const QTable& other) const {
  for (const auto& [obs, r] : rows_) {
    if (other.row(obs) != r) return false;
  }
  for (const auto& [obs, r] : other.rows_) {
    if (row(obs) != r) return false;
  }
  return true;
}

nlohmann::json qtable_to_json(const QTable& q) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [obs, row] : q.rows()) j[obs.key()] = row;
  return j;
}

QTable qtable_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("qtable: expected a JSON object");
  QTable q;
  for (const auto& [key, value] : j.items()) {
    const auto obs = Observation::from_key(key);
    if (!obs) throw ConfigError("qtable: malformed observation key '" + key + "'");
    if (!value.is_array() || value.size() != kNumActions)
      throw ConfigError("qtable: row '" + key + "' must be an array of 4 numbers");
    for (Action a : kAllActions) {
      const auto& cell = value[action_index(a)];
      if (!cell.is_number()) throw ConfigError("qtable: row '" + key + "' holds a non-number");
      const double v = cell.get<double>();
      if (!std::isfinite(v)) throw ConfigError("qtable: row '" + key + "' holds a non-finite value");
      q.set(*obs, a, v);
    }
  }
  return q;
}

void save_qtable(const QTable& q, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << qtable_to_json(q).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return qtable_from_json(j);
}

void LearningParams::validate() const {
  auto in = [](double v, double lo, double hi, bool lo_open, bool hi_open) {
    return std::isfinite(v) && (lo_open ? v > lo : v >= lo) && (hi_open ? v < hi : v <= hi);
  };
  if (!in(alpha, 0, 1, true, false)) throw ConfigError("learning: alpha must lie in (0,1]");
  if (!in(gamma, 0, 1, false, true)) throw ConfigError("learning: gamma must lie in [0,1)");
  if (!in(epsilon, 0, 1, false, false)) throw ConfigError("learning: epsilon must lie in [0,1]");
  if (!in(epsilon_decay, 0, 1, true, false)) throw ConfigError("learning: epsilon_decay must lie in (0,1]");
  if (!in(epsilon_floor, 0, 1, false, false)) throw ConfigError("learning: epsilon_floor must lie in [0,1]");
  if (!in(trust_eta, 0, 1, true, false)) throw ConfigError("learning: trust_eta must lie in (0,1]");
  if (!in(reward_ema_beta, 0, 1, true, true)) throw ConfigError("learning: reward_ema_beta must lie in (0,1)");
  if (!in(trust_init, 0, 1, false, false)) throw ConfigError("learning: trust_init must lie in [0,1]");
  if (delayed_alpha && !in(*delayed_alpha, 0, 1, true, false))
    throw ConfigError("learning: delayed_alpha must lie in (0,1]");
}

double epsilon_for_episode(const LearningParams& params, int episode) {
  return std::max(params.epsilon_floor, params.epsilon * std::pow(params.epsilon_decay, episode));
}

Action greedy_action(const QTable& q, const Observation& obs) {
  const QTable::Row r = q.row(obs);
  std::size_t best = 0;
  for (std::size_t i = 1; i < r.size(); ++i) {
    if (r[i] > r[best]) best = i;
  }
  return kAllActions[best];
}

Action select_action(const QTable& q, const Observation& obs, double epsilon, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < epsilon) {
    return kAllActions[std::uniform_int_distribution<std::size_t>(0, kNumActions - 1)(rng)];
  }
  return greedy_action(q, obs);
}

void q_update(QTable& q, const Observation& s, Action a, double reward, const Observation& next,
              const LearningParams& params) {
  if (!std::isfinite(reward)) throw PreconditionError("q_update: reward must be finite");
  const double current = q.value(s, a);
  const double target = reward + params.gamma * q.max_value(next);
  q.set(s, a, current + params.alpha * (target - current));
}

Decision combine_decision(std::optional<Action> suggestion, Action own, const TrustScore& trust, Rng& rng) {
  if (!suggestion || *suggestion == own) return {own, false};
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (u < trust.value) return {*suggestion, true};
  return {own, false};
}

TrustScore update_trust(TrustScore trust, std::optional<Action> suggestion, Action taken, double reward,
                        const LearningParams& params) {
  const double baseline = trust.reward_ema;
  trust.reward_ema = params.reward_ema_beta * trust.reward_ema + (1.0 - params.reward_ema_beta) * reward;
  if (suggestion && *suggestion == taken) {
    if (reward >= baseline) {
      trust.value += params.trust_eta * (1.0 - trust.value);
    } else {
      trust.value -= params.trust_eta * trust.value;
    }
  }
  trust.value = std::clamp(trust.value, 0.0, 1.0);
  return trust;
}

}  // namespace aura
