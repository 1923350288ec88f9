#include "aura/advisor.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

namespace aura {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string clip(std::string_view s, std::size_t n) { return std::string(s.substr(0, n)); }

void render_station(std::ostringstream& os, std::string_view role, const StationSnapshot& s) {
  const KindSpec spec = kind_spec(s.kind);
  os << role << " station " << clip(s.id, 64) << " (" << kind_name(s.kind) << "):\n";
  os << "- transmit power: " << s.power_dbm << " dBm (range " << spec.power_min << "-" << spec.power_max
     << " dBm)\n";
  char snr[32];
  std::snprintf(snr, sizeof snr, "%.1f", s.mean_snr_db);
  os << "- coverage quality: " << coverage_name(s.coverage) << " (mean SNR " << snr << " dB)\n";
  os << "- connected users: " << s.users << "/" << s.capacity;
  if (s.at_capacity()) {
    os << " (at maximum capacity)\n";
  } else {
    os << " (" << s.free_slots() << " free slots)\n";
  }
  os << "- dropped requests last step: " << s.dropped_last_step << "\n";
}

}  // namespace

StationSnapshot snapshot_of(const StationState& station, std::span<const UserState> users) {
  StationSnapshot s;
  s.id = station.id;
  s.kind = station.kind;
  s.power_dbm = station.power_dbm;
  s.users = station.attached.size();
  s.capacity = station.capacity();
  s.coverage = coverage_quality(station, users);
  s.mean_snr_db = mean_snr(station, users);
  s.dropped_last_step = station.last_step.drops();
  return s;
}

AdvisorPrompt build_prompt(const StationSnapshot& target, const StationSnapshot& neighbor, TrafficLevel traffic) {
  std::ostringstream os;
  os << "You are advising base station " << clip(target.id, 64)
     << " in a two-station cellular network. Recommend its next action.\n";
  os << "Current traffic level: " << traffic_name(traffic) << ".\n\n";
  render_station(os, "Target", target);
  os << "\n";
  render_station(os, "Neighbor", neighbor);
  os << "\nAvailable actions:\n"
        "1 = increase transmission power\n"
        "2 = decrease transmission power\n"
        "3 = maintain current settings\n"
        "4 = hand off the worst-connected user to the neighbor station\n\n";
  os << kAnswerFormatSentence;
  return {os.str()};
}

std::optional<Action> translate(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    const std::size_t start = i;
    while (i < s.size() && (is_digit(s[i]) || (s[i] == '.' && i + 1 < s.size() && is_digit(s[i + 1])))) ++i;
    const bool after_point = start > 0 && s[start - 1] == '.';
    if (i - start == 1 && !after_point) {
      if (auto a = action_from_code(s[start] - '0')) return a;
    }
  }
  return std::nullopt;
}

Action scripted_rule(const StationSnapshot& target, const StationSnapshot& neighbor) {
  const KindSpec spec = kind_spec(target.kind);
  if (target.at_capacity() && neighbor.free_slots() > 0) return Action::Handoff;
  if (target.coverage == Coverage::Poor && target.power_dbm < spec.power_max) return Action::Increase;
  if (target.coverage == Coverage::Good && target.load_fraction() < 0.3) return Action::Decrease;
  return Action::Maintain;
}

AdvisorQuery make_query(const StationSnapshot& target, const StationSnapshot& neighbor, TrafficLevel traffic) {
  return {target, neighbor, traffic, build_prompt(target, neighbor, traffic)};
}

std::string_view backend_name(BackendKind kind) {
  switch (kind) {
    case BackendKind::Scripted: return "scripted";
    case BackendKind::Replay: return "replay";
    case BackendKind::Remote: return "remote";
  }
  return "?";
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
  if (s == "scripted") return BackendKind::Scripted;
  if (s == "replay") return BackendKind::Replay;
  if (s == "remote") return BackendKind::Remote;
  return std::nullopt;
}

Suggestion ScriptedAdvisor::suggest(const AdvisorQuery& query) {
  return {scripted_rule(query.target, query.neighbor)};
}

Completion ScriptedAdvisor::complete(const std::string&) { return {}; }

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256: digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

ReplayAdvisor::ReplayAdvisor(std::map<std::string, std::string> responses_by_hash)
    : responses_(std::move(responses_by_hash)) {}

ReplayAdvisor ReplayAdvisor::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("replay log: cannot open " + path.string());
  std::map<std::string, std::string> responses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      responses[j.at("prompt_sha256").get<std::string>()] = j.at("response_text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ReplayAdvisor(std::move(responses));
}

Suggestion ReplayAdvisor::suggest(const AdvisorQuery& query) {
  const Completion c = complete(query.prompt.text);
  Suggestion s;
  if (!c.text) return s;
  s.action = translate(*c.text);
  s.translation_failure = !s.action;
  return s;
}

Completion ReplayAdvisor::complete(const std::string& prompt) {
  auto it = responses_.find(sha256_hex(prompt));
  if (it == responses_.end()) return {};
  return {it->second};
}

std::optional<HttpResponse> HttpTransport::post(const HttpRequest& request) {
  const auto scheme_end = request.url.find("://");
  if (scheme_end == std::string::npos) return std::nullopt;
  const auto path_start = request.url.find('/', scheme_end + 3);
  const std::string origin = request.url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

  httplib::Client client(origin);
  if (!client.is_valid()) return std::nullopt;
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(request.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(request.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);
  auto res = client.Post(path, headers, request.body, "application/json");
  if (!res) return std::nullopt;
  return HttpResponse{res->status, res->body};
}

RemoteConfig RemoteConfig::from_environment() {
  const char* url = std::getenv("AURA_LLM_URL");
  const char* key = std::getenv("AURA_LLM_KEY");
  if (url == nullptr || *url == '\0') throw ConfigError("remote backend: AURA_LLM_URL is not set");
  if (key == nullptr || *key == '\0') throw ConfigError("remote backend: AURA_LLM_KEY is not set");
  RemoteConfig c;
  c.url = url;
  c.api_key = key;
  return c;
}

RemoteAdvisor::RemoteAdvisor(RemoteConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
  if (!transport_) throw ConfigError("remote backend: no transport");
  if (config_.retries < 0) throw ConfigError("remote backend: retries must be non-negative");
}

Completion RemoteAdvisor::complete(const std::string& prompt) {
  const auto start = std::chrono::steady_clock::now();
  HttpRequest req;
  req.url = config_.url;
  req.timeout = config_.timeout;
  req.headers = {{"Authorization", "Bearer " + config_.api_key}};
  req.body = nlohmann::json{{"prompt", prompt}, {"system", config_.system_instruction}, {"temperature", 0}}.dump();

  Completion c;
  in_flight_.acquire();
  for (int attempt = 0; attempt <= config_.retries && !c.text; ++attempt) {
    std::optional<HttpResponse> res;
    try {
      res = transport_->post(req);
    } catch (const std::exception&) {
      res.reset();
    }
    if (!res || res->status != 200) continue;
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_object() && j.contains("text") && j["text"].is_string()) c.text = j["text"].get<std::string>();
  }
  in_flight_.release();
  if (!c.text) {
    c.error = true;
    ++failed_calls_;
  }
  c.latency = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - start);
  return c;
}

Suggestion RemoteAdvisor::suggest(const AdvisorQuery& query) {
  const Completion c = complete(query.prompt.text);
  Suggestion s;
  s.latency = c.latency;
  s.error = c.error;
  if (c.text) {
    s.action = translate(*c.text);
    s.translation_failure = !s.action;
  }
  return s;
}

std::string_view instruction_name(VerbalInstruction instr) {
  switch (instr) {
    case VerbalInstruction::IncreaseExploration: return "increase_exploration";
    case VerbalInstruction::DecreaseExploration: return "decrease_exploration";
    case VerbalInstruction::PrioritizeHandoffs: return "prioritize_handoffs";
    case VerbalInstruction::PrioritizeEnergy: return "prioritize_energy";
  }
  return "?";
}

std::optional<VerbalInstruction> parse_instruction(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return std::nullopt;
  text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);
  std::string norm;
  norm.reserve(text.size());
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    norm.push_back(c == ' ' || c == '-' ? '_' : static_cast<char>(std::tolower(uc)));
  }
  for (auto instr : {VerbalInstruction::IncreaseExploration, VerbalInstruction::DecreaseExploration,
                     VerbalInstruction::PrioritizeHandoffs, VerbalInstruction::PrioritizeEnergy}) {
    if (norm == instruction_name(instr)) return instr;
  }
  return std::nullopt;
}

FeedbackResult apply_verbal_feedback(VerbalInstruction instr, double epsilon, const RewardWeights& weights) {
  FeedbackResult r{epsilon, weights, {}};
  switch (instr) {
    case VerbalInstruction::IncreaseExploration:
    case VerbalInstruction::DecreaseExploration: {
      const double factor = instr == VerbalInstruction::IncreaseExploration ? 1.5 : 0.67;
      r.epsilon = std::clamp(epsilon * factor, kFeedbackEpsilonMin, kFeedbackEpsilonMax);
      r.change = {"epsilon", epsilon, r.epsilon};
      break;
    }
    case VerbalInstruction::PrioritizeHandoffs:
      r.weights.handoff = weights.handoff * 1.5;
      r.change = {"w_handoff", weights.handoff, r.weights.handoff};
      break;
    case VerbalInstruction::PrioritizeEnergy:
      r.weights.energy = weights.energy * 1.5;
      r.change = {"w_energy", weights.energy, r.weights.energy};
      break;
  }
  return r;
}

}  // namespace aura
