#pragma once

// Two-station (or N-station) network-overload simulator.
//
// One step applies every station's action in index order, then admits the
// step's arrivals, then processes departures, then perturbs the channel. All
// randomness comes from two streams derived from the episode seed: the
// traffic stream (arrival counts, departures, initial power and user counts)
// and the channel stream (per-user signal/SNR draws). Traffic-stream
// consumption never depends on agent actions, so runs that share a seed see
// the same arrival/departure process regardless of policy.

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aura/types.hpp"

namespace aura {

enum class StationKind { Rural, Urban };

struct KindSpec {
  int power_min;
  int power_max;
  std::size_t capacity;
};

constexpr KindSpec kind_spec(StationKind kind) {
  return kind == StationKind::Rural ? KindSpec{43, 46, 50} : KindSpec{30, 37, 30};
}

std::string_view kind_name(StationKind kind);
std::optional<StationKind> parse_station_kind(std::string_view s);

enum class TrafficLevel { Low, Normal, High };

std::string_view traffic_name(TrafficLevel level);
std::optional<TrafficLevel> parse_traffic_level(std::string_view s);

struct TrafficSpec {
  double arrival_rate;    // expected new users per step, system-wide
  double departure_prob;  // per user per step
};

struct RewardWeights {
  double serve = 1.0;
  double drop = 0.5;
  double energy = 0.2;
  double handoff = 0.3;
  double wasted = 0.1;  // handoff requested with no attached users
};

struct PerturbationBounds {
  double signal_db = 2.0;
  double snr_db = 2.0;
};

struct StationConfig {
  std::string id;
  StationKind kind;
};

struct ScenarioConfig {
  std::vector<StationConfig> stations{{"rural", StationKind::Rural},
                                      {"urban", StationKind::Urban}};
  TrafficLevel traffic_level = TrafficLevel::Normal;
  // Indexed by TrafficLevel.
  std::array<TrafficSpec, 3> traffic{{{2.0, 0.1}, {5.0, 0.1}, {9.0, 0.1}}};
  RewardWeights weights;
  PerturbationBounds perturbation;
  int episode_length = 200;

  const TrafficSpec& traffic_spec() const {
    return traffic[static_cast<std::size_t>(traffic_level)];
  }

  /// Throws ConfigError on an empty station list, duplicate ids, rates that
  /// are not strictly increasing Low < Normal < High, or out-of-range knobs.
  void validate() const;
};

inline constexpr double kSignalMin = -120.0;
inline constexpr double kSignalMax = -50.0;
inline constexpr double kSnrMin = 0.0;
inline constexpr double kSnrMax = 30.0;

using UserId = std::uint64_t;

struct UserState {
  UserId id = 0;
  std::size_t station = 0;
  double signal_dbm = kSignalMin;
  double snr_db = kSnrMin;

  bool operator==(const UserState&) const = default;
};

/// Counters for the most recent step. `dropped_admissions` and
/// `handoff_failures` together are the station's dropped requests.
struct StepCounters {
  int arrivals_routed = 0;
  int admitted = 0;
  int dropped_admissions = 0;
  int handoff_requests = 0;
  int handoff_successes = 0;
  int handoff_failures = 0;
  int departures = 0;
  int wasted_actions = 0;

  int requests() const { return arrivals_routed + handoff_requests; }
  int served() const { return admitted + handoff_successes; }
  int drops() const { return dropped_admissions + handoff_failures; }

  bool operator==(const StepCounters&) const = default;
};

struct StationState {
  std::string id;
  StationKind kind = StationKind::Rural;
  int power_dbm = 0;
  std::set<UserId> attached;
  StepCounters last_step;

  KindSpec spec() const { return kind_spec(kind); }
  std::size_t capacity() const { return spec().capacity; }
  bool at_capacity() const { return attached.size() >= capacity(); }
  std::size_t free_slots() const { return capacity() - std::min(capacity(), attached.size()); }
  double load_fraction() const {
    return static_cast<double>(attached.size()) / static_cast<double>(capacity());
  }

  bool operator==(const StationState&) const = default;
};

struct EnvironmentState {
  std::vector<StationState> stations;
  std::vector<UserState> users;  // sorted by id
  UserId next_user_id = 0;
  std::uint64_t step_index = 0;
  Rng traffic_rng;
  Rng channel_rng;

  const UserState* find_user(UserId id) const;
  UserState* find_user(UserId id);

  bool operator==(const EnvironmentState&) const = default;
};

/// Per-agent environmental parameters reported alongside the reward.
struct EnvParams {
  double mean_snr_db = 0.0;
  double mean_signal_dbm = 0.0;
  double load_fraction = 0.0;
  int arrivals_this_step = 0;
  int departures_this_step = 0;
  int requests_this_step = 0;
  int drops_this_step = 0;

  bool operator==(const EnvParams&) const = default;
};

struct StepOutcome {
  std::vector<double> rewards;
  std::vector<EnvParams> psi;
  int dropped_requests = 0;
  int dropped_handoffs = 0;
  int dropped_admissions = 0;
  bool is_failure_step = false;

  bool operator==(const StepOutcome&) const = default;
};

enum class Coverage { Good, Fair, Poor };

std::string_view coverage_name(Coverage c);

EnvironmentState reset(const ScenarioConfig& config, std::uint64_t seed);

/// Advances `state` by one step. `actions` holds one action per station.
StepOutcome step(const ScenarioConfig& config, EnvironmentState& state,
                 std::span<const Action> actions);

/// Applies one station's action. Power moves are clamped to the kind's
/// bounds and shift attached users' signal by the realised delta. Handoff
/// moves the worst-SNR user toward `neighbor_of(station)`.
void apply_action(EnvironmentState& state, std::size_t station, Action action);

/// Attempts to move `user` from `from` to `to`; returns acceptance. The
/// request and its outcome are recorded on the source station's counters.
bool handoff(EnvironmentState& state, UserId user, std::size_t from, std::size_t to);

/// The other station with the most free slots (ties: lowest index).
std::size_t neighbor_of(const EnvironmentState& state, std::size_t station);

/// Admits `count` new users one at a time to the lowest-load station (ties:
/// lowest index). Returns the number of arrivals that could not be admitted.
int admit_arrivals(EnvironmentState& state, int count);

int process_departures(EnvironmentState& state, double departure_prob);

void evolve_channel(const PerturbationBounds& bounds, EnvironmentState& state);

Coverage coverage_quality(const StationState& station, std::span<const UserState> users);

double mean_snr(const StationState& station, std::span<const UserState> users);

double immediate_reward(const StationState& station, const RewardWeights& weights);

EnvParams env_params(const StationState& station, std::span<const UserState> users);

}  // namespace aura
