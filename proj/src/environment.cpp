#include "aura/environment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aura {

namespace {

Rng make_stream(std::uint64_t seed, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
  return Rng(seq);
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

UserState draw_user(Rng& channel, UserId id, std::size_t station) {
  UserState u;
  u.id = id;
  u.station = station;
  u.signal_dbm = uniform(channel, kSignalMin, kSignalMax);
  u.snr_db = uniform(channel, kSnrMin, kSnrMax);
  return u;
}

}  // namespace

std::string_view kind_name(StationKind kind) {
  return kind == StationKind::Rural ? "rural" : "urban";
}

std::optional<StationKind> parse_station_kind(std::string_view s) {
  if (s == "rural") return StationKind::Rural;
  if (s == "urban") return StationKind::Urban;
  return std::nullopt;
}

std::string_view traffic_name(TrafficLevel level) {
  switch (level) {
    case TrafficLevel::Low: return "low";
    case TrafficLevel::Normal: return "normal";
    case TrafficLevel::High: return "high";
  }
  return "?";
}

std::optional<TrafficLevel> parse_traffic_level(std::string_view s) {
  if (s == "low") return TrafficLevel::Low;
  if (s == "normal") return TrafficLevel::Normal;
  if (s == "high") return TrafficLevel::High;
  return std::nullopt;
}

std::string_view coverage_name(Coverage c) {
  switch (c) {
    case Coverage::Good: return "Good";
    case Coverage::Fair: return "Fair";
    case Coverage::Poor: return "Poor";
  }
  return "?";
}

void ScenarioConfig::validate() const {
  if (stations.empty()) throw ConfigError("scenario: station list is empty");
  for (std::size_t i = 0; i < stations.size(); ++i) {
    if (stations[i].id.empty()) throw ConfigError("scenario: station id must be non-empty");
    for (std::size_t j = 0; j < i; ++j) {
      if (stations[i].id == stations[j].id)
        throw ConfigError("scenario: duplicate station id '" + stations[i].id + "'");
    }
  }
  for (const auto& t : traffic) {
    if (!(t.arrival_rate >= 0.0) || !std::isfinite(t.arrival_rate))
      throw ConfigError("scenario: arrival_rate must be finite and non-negative");
    if (!(t.departure_prob > 0.0 && t.departure_prob < 1.0))
      throw ConfigError("scenario: departure_prob must lie in (0,1)");
  }
  if (!(traffic[0].arrival_rate < traffic[1].arrival_rate &&
        traffic[1].arrival_rate < traffic[2].arrival_rate))
    throw ConfigError("scenario: arrival rates must satisfy low < normal < high");
  if (episode_length <= 0) throw ConfigError("scenario: episode_length must be positive");
  if (perturbation.signal_db < 0.0 || perturbation.snr_db < 0.0)
    throw ConfigError("scenario: perturbation bounds must be non-negative");
  for (double w : {weights.serve, weights.drop, weights.energy, weights.handoff, weights.wasted}) {
    if (!std::isfinite(w)) throw ConfigError("scenario: reward weights must be finite");
  }
}

const UserState* EnvironmentState::find_user(UserId id) const {
  auto it = std::lower_bound(users.begin(), users.end(), id,
                             [](const UserState& u, UserId v) { return u.id < v; });
  return (it != users.end() && it->id == id) ? &*it : nullptr;
}

UserState* EnvironmentState::find_user(UserId id) {
  return const_cast<UserState*>(std::as_const(*this).find_user(id));
}

EnvironmentState reset(const ScenarioConfig& config, std::uint64_t seed) {
  config.validate();
  EnvironmentState state;
  state.traffic_rng = make_stream(seed, 1);
  state.channel_rng = make_stream(seed, 2);

  for (std::size_t i = 0; i < config.stations.size(); ++i) {
    StationState st;
    st.id = config.stations[i].id;
    st.kind = config.stations[i].kind;
    const KindSpec spec = st.spec();
    st.power_dbm = std::uniform_int_distribution<int>(spec.power_min, spec.power_max)(state.traffic_rng);
    const auto count = std::uniform_int_distribution<std::size_t>(0, spec.capacity)(state.traffic_rng);
    for (std::size_t k = 0; k < count; ++k) {
      const UserId id = state.next_user_id++;
      state.users.push_back(draw_user(state.channel_rng, id, i));
      st.attached.insert(id);
    }
    state.stations.push_back(std::move(st));
  }
  return state;
}

std::size_t neighbor_of(const EnvironmentState& state, std::size_t station) {
  std::size_t best = station;
  for (std::size_t j = 0; j < state.stations.size(); ++j) {
    if (j == station) continue;
    if (best == station || state.stations[j].free_slots() > state.stations[best].free_slots()) best = j;
  }
  return best;
}

bool handoff(EnvironmentState& state, UserId user_id, std::size_t from, std::size_t to) {
  StationState& src = state.stations.at(from);
  StationState& dst = state.stations.at(to);
  UserState* user = state.find_user(user_id);
  if (user == nullptr || user->station != from || !src.attached.contains(user_id))
    throw PreconditionError("handoff: user is not attached to the source station");

  ++src.last_step.handoff_requests;
  const double projected = user->signal_dbm + static_cast<double>(dst.power_dbm - src.power_dbm);
  const bool accepted = from != to && !dst.at_capacity() && projected > user->signal_dbm;
  if (!accepted) {
    ++src.last_step.handoff_failures;
    return false;
  }
  src.attached.erase(user_id);
  dst.attached.insert(user_id);
  user->station = to;
  user->signal_dbm = std::clamp(projected, kSignalMin, kSignalMax);
  user->snr_db = uniform(state.channel_rng, kSnrMin, kSnrMax);
  ++src.last_step.handoff_successes;
  return true;
}

void apply_action(EnvironmentState& state, std::size_t index, Action action) {
  StationState& st = state.stations.at(index);
  const KindSpec spec = st.spec();
  switch (action) {
    case Action::Increase:
    case Action::Decrease: {
      const int target = st.power_dbm + (action == Action::Increase ? 1 : -1);
      const int next = std::clamp(target, spec.power_min, spec.power_max);
      const int delta = next - st.power_dbm;
      st.power_dbm = next;
      if (delta != 0) {
        for (UserId id : st.attached) {
          UserState* u = state.find_user(id);
          u->signal_dbm = std::clamp(u->signal_dbm + delta, kSignalMin, kSignalMax);
        }
      }
      break;
    }
    case Action::Maintain:
      break;
    case Action::Handoff: {
      if (st.attached.empty() || state.stations.size() < 2) {
        ++st.last_step.wasted_actions;
        break;
      }
      const UserState* worst = nullptr;
      for (UserId id : st.attached) {
        const UserState* u = state.find_user(id);
        if (worst == nullptr || u->snr_db < worst->snr_db) worst = u;
      }
      handoff(state, worst->id, index, neighbor_of(state, index));
      break;
    }
  }
}

int admit_arrivals(EnvironmentState& state, int count) {
  int dropped = 0;
  for (int k = 0; k < count; ++k) {
    std::size_t target = 0;
    for (std::size_t j = 1; j < state.stations.size(); ++j) {
      if (state.stations[j].load_fraction() < state.stations[target].load_fraction()) target = j;
    }
    StationState& st = state.stations[target];
    ++st.last_step.arrivals_routed;
    if (st.at_capacity()) {
      ++st.last_step.dropped_admissions;
      ++dropped;
      continue;
    }
    const UserId id = state.next_user_id++;
    state.users.push_back(draw_user(state.channel_rng, id, target));
    st.attached.insert(id);
    ++st.last_step.admitted;
  }
  return dropped;
}

int process_departures(EnvironmentState& state, double departure_prob) {
  std::bernoulli_distribution leaves(departure_prob);
  int departed = 0;
  std::vector<UserState> kept;
  kept.reserve(state.users.size());
  for (const UserState& u : state.users) {
    if (leaves(state.traffic_rng)) {
      StationState& st = state.stations[u.station];
      st.attached.erase(u.id);
      ++st.last_step.departures;
      ++departed;
    } else {
      kept.push_back(u);
    }
  }
  state.users = std::move(kept);
  return departed;
}

void evolve_channel(const PerturbationBounds& bounds, EnvironmentState& state) {
  for (UserState& u : state.users) {
    const double ds = bounds.signal_db > 0.0 ? uniform(state.channel_rng, -bounds.signal_db, bounds.signal_db) : 0.0;
    const double dn = bounds.snr_db > 0.0 ? uniform(state.channel_rng, -bounds.snr_db, bounds.snr_db) : 0.0;
    u.signal_dbm = std::clamp(u.signal_dbm + ds, kSignalMin, kSignalMax);
    u.snr_db = std::clamp(u.snr_db + dn, kSnrMin, kSnrMax);
  }
}

double mean_snr(const StationState& station, std::span<const UserState> users) {
  if (station.attached.empty()) return 0.0;
  double sum = 0.0;
  std::size_t n = 0;
  for (const UserState& u : users) {
    if (station.attached.contains(u.id)) {
      sum += u.snr_db;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

Coverage coverage_quality(const StationState& station, std::span<const UserState> users) {
  if (station.attached.empty()) return Coverage::Good;
  const double m = mean_snr(station, users);
  if (m >= 20.0) return Coverage::Good;
  if (m >= 10.0) return Coverage::Fair;
  return Coverage::Poor;
}

double immediate_reward(const StationState& station, const RewardWeights& w) {
  const StepCounters& c = station.last_step;
  const KindSpec spec = station.spec();
  const double served_ratio = static_cast<double>(c.served()) / static_cast<double>(std::max(1, c.requests()));
  const double energy = static_cast<double>(station.power_dbm - spec.power_min) /
                        static_cast<double>(spec.power_max - spec.power_min);
  return w.serve * served_ratio - w.drop * c.drops() - w.energy * energy +
         w.handoff * c.handoff_successes - w.wasted * c.wasted_actions;
}

EnvParams env_params(const StationState& station, std::span<const UserState> users) {
  EnvParams p;
  double signal = 0.0;
  double snr = 0.0;
  std::size_t n = 0;
  for (const UserState& u : users) {
    if (!station.attached.contains(u.id)) continue;
    signal += u.signal_dbm;
    snr += u.snr_db;
    ++n;
  }
  if (n > 0) {
    p.mean_signal_dbm = signal / static_cast<double>(n);
    p.mean_snr_db = snr / static_cast<double>(n);
  }
  p.load_fraction = station.load_fraction();
  p.arrivals_this_step = station.last_step.arrivals_routed;
  p.departures_this_step = station.last_step.departures;
  p.requests_this_step = station.last_step.requests();
  p.drops_this_step = station.last_step.drops();
  return p;
}

StepOutcome step(const ScenarioConfig& config, EnvironmentState& state, std::span<const Action> actions) {
  if (actions.size() != state.stations.size())
    throw PreconditionError("step: expected one action per station");

  for (StationState& st : state.stations) st.last_step = StepCounters{};

  for (std::size_t i = 0; i < actions.size(); ++i) apply_action(state, i, actions[i]);

  const TrafficSpec& traffic = config.traffic_spec();
  const int arrivals =
      traffic.arrival_rate > 0.0 ? std::poisson_distribution<int>(traffic.arrival_rate)(state.traffic_rng) : 0;
  admit_arrivals(state, arrivals);
  process_departures(state, traffic.departure_prob);
  evolve_channel(config.perturbation, state);

  StepOutcome out;
  out.rewards.reserve(state.stations.size());
  out.psi.reserve(state.stations.size());
  for (const StationState& st : state.stations) {
    out.rewards.push_back(immediate_reward(st, config.weights));
    out.psi.push_back(env_params(st, state.users));
    out.dropped_admissions += st.last_step.dropped_admissions;
    out.dropped_handoffs += st.last_step.handoff_failures;
  }
  out.dropped_requests = out.dropped_admissions + out.dropped_handoffs;
  out.is_failure_step = out.dropped_requests >= 1;
  ++state.step_index;
  return out;
}

}  // namespace aura
