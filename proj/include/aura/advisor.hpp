#pragma once

// Advisory layer: prompt rendering, the response-to-action translator, and
// the pluggable suggestion backends (scripted rules, recorded replay, remote
// text-completion service).

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aura/agent.hpp"
#include "aura/environment.hpp"
#include "aura/types.hpp"

namespace aura {

/// What the advisor is told about one station.
struct StationSnapshot {
  std::string id;
  StationKind kind = StationKind::Rural;
  int power_dbm = 0;
  std::size_t users = 0;
  std::size_t capacity = 0;
  Coverage coverage = Coverage::Good;
  double mean_snr_db = 0.0;
  int dropped_last_step = 0;  // admissions + failed handoffs

  bool at_capacity() const { return users >= capacity; }
  std::size_t free_slots() const { return users >= capacity ? 0 : capacity - users; }
  double load_fraction() const {
    return capacity == 0 ? 1.0 : static_cast<double>(users) / static_cast<double>(capacity);
  }
};

StationSnapshot snapshot_of(const StationState& station, std::span<const UserState> users);

struct AdvisorPrompt {
  std::string text;
};

inline constexpr std::string_view kAnswerFormatSentence =
    "Answer with a single action code (1, 2, 3, or 4) and nothing else.";
inline constexpr std::size_t kMaxPromptBytes = 4096;

AdvisorPrompt build_prompt(const StationSnapshot& target, const StationSnapshot& neighbor,
                           TrafficLevel traffic);

/// First standalone digit 1-4, scanning left to right. A digit is standalone
/// when it is not part of a longer number (adjacent digits, or a decimal
/// point followed by a digit, extend the number).
std::optional<Action> translate(std::string_view response);

/// The default expert heuristic used by the scripted backend.
Action scripted_rule(const StationSnapshot& target, const StationSnapshot& neighbor);

struct AdvisorQuery {
  StationSnapshot target;
  StationSnapshot neighbor;
  TrafficLevel traffic = TrafficLevel::Normal;
  AdvisorPrompt prompt;
};

AdvisorQuery make_query(const StationSnapshot& target, const StationSnapshot& neighbor, TrafficLevel traffic);

struct Suggestion {
  std::optional<Action> action;
  std::chrono::microseconds latency{0};
  bool error = false;                // transport gave up after retries
  bool translation_failure = false;  // reply held no usable code
};

struct Completion {
  std::optional<std::string> text;
  std::chrono::microseconds latency{0};
  bool error = false;
};

enum class BackendKind { Scripted, Replay, Remote };

std::string_view backend_name(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

class AdvisorBackend {
 public:
  virtual ~AdvisorBackend() = default;
  virtual BackendKind kind() const = 0;
  virtual Suggestion suggest(const AdvisorQuery& query) = 0;
  /// Free-text completion used by the alignment evaluator. Backends without
  /// a text channel return an empty completion.
  virtual Completion complete(const std::string& prompt) = 0;
};

/// Applies `scripted_rule` to the structured snapshot; never touches text.
class ScriptedAdvisor final : public AdvisorBackend {
 public:
  BackendKind kind() const override { return BackendKind::Scripted; }
  Suggestion suggest(const AdvisorQuery& query) override;
  Completion complete(const std::string& prompt) override;
};

std::string sha256_hex(std::string_view data);

/// Recorded prompt -> response log, keyed by SHA-256 of the prompt text.
/// Read-only once constructed.
class ReplayAdvisor final : public AdvisorBackend {
 public:
  explicit ReplayAdvisor(std::map<std::string, std::string> responses_by_hash);

  /// JSON lines of {"prompt_sha256": ..., "response_text": ...}.
  static ReplayAdvisor from_file(const std::filesystem::path& path);

  BackendKind kind() const override { return BackendKind::Replay; }
  Suggestion suggest(const AdvisorQuery& query) override;
  Completion complete(const std::string& prompt) override;

  std::size_t size() const { return responses_.size(); }

 private:
  std::map<std::string, std::string> responses_;
};

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{10000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Network seam for the remote backend. Returns nullopt on transport failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::optional<HttpResponse> post(const HttpRequest& request) = 0;
};

class HttpTransport final : public Transport {
 public:
  std::optional<HttpResponse> post(const HttpRequest& request) override;
};

struct RemoteConfig {
  std::string url;
  std::string api_key;
  std::chrono::milliseconds timeout{10000};
  int retries = 2;
  int max_in_flight = 2;
  std::string system_instruction =
      "You are a cellular network planning assistant. Reply tersely.";

  /// Reads AURA_LLM_URL and AURA_LLM_KEY. Throws ConfigError when either is
  /// unset.
  static RemoteConfig from_environment();
};

/// Single-turn completion over HTTP: POST {"prompt", "system", "temperature"}
/// and read {"text"} back. Concurrent calls beyond `max_in_flight` block.
class RemoteAdvisor final : public AdvisorBackend {
 public:
  RemoteAdvisor(RemoteConfig config, std::shared_ptr<Transport> transport);

  BackendKind kind() const override { return BackendKind::Remote; }
  Suggestion suggest(const AdvisorQuery& query) override;
  Completion complete(const std::string& prompt) override;

  std::uint64_t failed_calls() const { return failed_calls_.load(); }

 private:
  RemoteConfig config_;
  std::shared_ptr<Transport> transport_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::uint64_t> failed_calls_{0};
};

// Constrained verbal feedback.

enum class VerbalInstruction { IncreaseExploration, DecreaseExploration, PrioritizeHandoffs, PrioritizeEnergy };

std::string_view instruction_name(VerbalInstruction instr);

/// Exact (case-insensitive, whitespace-trimmed) match against the closed
/// vocabulary; anything else yields nullopt.
std::optional<VerbalInstruction> parse_instruction(std::string_view text);

struct ParamChange {
  std::string name;
  double before = 0.0;
  double after = 0.0;
};

struct FeedbackResult {
  double epsilon = 0.0;
  RewardWeights weights;
  ParamChange change;
};

inline constexpr double kFeedbackEpsilonMin = 0.05;
inline constexpr double kFeedbackEpsilonMax = 0.5;

FeedbackResult apply_verbal_feedback(VerbalInstruction instr, double epsilon, const RewardWeights& weights);

}  // namespace aura
