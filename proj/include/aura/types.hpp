#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace aura {

using Rng = std::mt19937_64;

/// Per-station decision. Numeric codes are the wire format shared with the
/// advisor prompt and translator.
enum class Action : int { Increase = 1, Decrease = 2, Maintain = 3, Handoff = 4 };

inline constexpr std::array<Action, 4> kAllActions{Action::Increase, Action::Decrease,
                                                   Action::Maintain, Action::Handoff};
inline constexpr std::size_t kNumActions = kAllActions.size();

constexpr int action_code(Action a) { return static_cast<int>(a); }
constexpr std::size_t action_index(Action a) { return static_cast<std::size_t>(action_code(a) - 1); }

inline std::optional<Action> action_from_code(int code) {
  if (code < 1 || code > 4) return std::nullopt;
  return static_cast<Action>(code);
}

inline std::string_view action_name(Action a) {
  switch (a) {
    case Action::Increase: return "increase";
    case Action::Decrease: return "decrease";
    case Action::Maintain: return "maintain";
    case Action::Handoff: return "handoff";
  }
  return "?";
}

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PreconditionError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class OrderingError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

}  // namespace aura
