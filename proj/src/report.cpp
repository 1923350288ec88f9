#include "aura/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace aura {

namespace {

constexpr std::array<Configuration, 3> kConfigOrder{Configuration::MarlOnly, Configuration::GuidedMarl,
                                                    Configuration::Aura};
constexpr std::array<TrafficLevel, 3> kTrafficOrder{TrafficLevel::Low, TrafficLevel::Normal, TrafficLevel::High};

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string fmt_g(double v) { return fmt(v, "%.10g"); }

const std::vector<std::string> kAgentSuffixes{"dropped_requests", "dropped_handoffs", "dropped_admissions",
                                              "llm_adoptions",    "decisions_with_suggestion", "usage_rate"};

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::vector<std::size_t> rows_for(const ResultTable& t, std::string_view config, std::string_view traffic) {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.cell(r, "config") == config && t.cell(r, "traffic") == traffic) out.push_back(r);
  }
  return out;
}

}  // namespace

std::size_t ResultTable::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw ConfigError("results: missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

bool ResultTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

const std::string& ResultTable::cell(std::size_t row, std::string_view name) const {
  return rows.at(row).at(column(name));
}

double ResultTable::number(std::size_t row, std::string_view name) const {
  const std::string& s = cell(row, name);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("results: non-numeric value '" + s + "' in column '" + std::string(name) + "'");
  }
}

std::vector<std::string> ResultTable::agent_ids() const {
  std::vector<std::string> ids;
  const std::string suffix = "_usage_rate";
  for (const auto& h : header) {
    if (h.size() > suffix.size() && h.compare(h.size() - suffix.size(), suffix.size(), suffix) == 0)
      ids.push_back(h.substr(0, h.size() - suffix.size()));
  }
  return ids;
}

ResultTable results_table(const std::vector<CellResult>& results) {
  ResultTable t;
  t.header = {"config",
              "traffic",
              "seed",
              "dropped_requests_total",
              "dropped_handoffs",
              "dropped_admissions",
              "failure_steps",
              "llm_queries",
              "llm_adoptions",
              "llm_translation_failures",
              "llm_errors",
              "llm_latency_us",
              "decisions_with_suggestion",
              "usage_rate",
              "delayed_reward_events",
              "delayed_reward_flags",
              "test_episodes",
              "mean_episode_return"};
  if (!results.empty()) {
    for (const AgentMetrics& a : results.front().metrics.agents)
      for (const auto& s : kAgentSuffixes) t.header.push_back(a.id + "_" + s);
  }
  for (const CellResult& c : results) {
    const RunMetrics& m = c.metrics;
    std::vector<std::string> row{std::string(configuration_name(c.key.configuration)),
                                 std::string(traffic_name(c.key.traffic)),
                                 std::to_string(c.key.seed),
                                 std::to_string(m.dropped_requests_total),
                                 std::to_string(m.dropped_handoffs),
                                 std::to_string(m.dropped_admissions),
                                 std::to_string(m.failure_steps),
                                 std::to_string(m.llm_queries),
                                 std::to_string(m.llm_adoptions),
                                 std::to_string(m.llm_translation_failures),
                                 std::to_string(m.llm_errors),
                                 std::to_string(m.llm_latency_us),
                                 std::to_string(m.decisions_with_suggestion),
                                 fmt(m.usage_rate()),
                                 std::to_string(m.delayed_reward_events),
                                 std::to_string(m.delayed_reward_flags),
                                 std::to_string(m.episode_returns.size()),
                                 fmt(mean_of(m.episode_returns))};
    for (const AgentMetrics& a : m.agents) {
      row.push_back(std::to_string(a.dropped_requests));
      row.push_back(std::to_string(a.dropped_handoffs));
      row.push_back(std::to_string(a.dropped_admissions));
      row.push_back(std::to_string(a.llm_adoptions));
      row.push_back(std::to_string(a.decisions_with_suggestion));
      row.push_back(fmt(a.usage_rate()));
    }
    if (row.size() != t.header.size()) throw ConfigError("results: cells disagree on the station set");
    t.rows.push_back(std::move(row));
  }
  return t;
}

std::string to_csv(const ResultTable& table) {
  std::string out;
  auto line = [&out](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out += ',';
      out += fields[i];
    }
    out += '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

void write_csv(const ResultTable& table, const std::filesystem::path& path) { write_text(path, to_csv(table)); }

ResultTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  ResultTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (line.back() == ',') fields.emplace_back();
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                          std::to_string(t.header.size()) + " fields, found " + std::to_string(fields.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (t.header.empty()) throw ConfigError(path.string() + ": empty results file");
  return t;
}

ResultTable figure_panel(const ResultTable& results, FigurePanel panel) {
  ResultTable t;
  const auto agents = results.agent_ids();
  switch (panel) {
    case FigurePanel::DroppedRequests:
      t.header = {"config", "traffic", "n_seeds", "mean_dropped_requests", "sd_dropped_requests",
                  "mean_dropped_handoffs", "sd_dropped_handoffs"};
      break;
    case FigurePanel::UsageRate:
      t.header = {"config", "traffic", "n_seeds", "mean_usage_rate"};
      for (const auto& a : agents) t.header.push_back("mean_" + a + "_usage_rate");
      break;
    case FigurePanel::FailureSteps:
      t.header = {"config", "traffic", "n_seeds", "failure_steps", "mean_failure_steps"};
      break;
  }
  for (Configuration c : kConfigOrder) {
    for (TrafficLevel tl : kTrafficOrder) {
      const std::string cn(configuration_name(c));
      const std::string tn(traffic_name(tl));
      const auto rows = rows_for(results, cn, tn);
      if (rows.empty()) throw ConfigError("results: missing cell (" + cn + ", " + tn + ")");
      auto column_values = [&](std::string_view col) {
        std::vector<double> v;
        for (std::size_t r : rows) v.push_back(results.number(r, col));
        return v;
      };
      std::vector<std::string> out{cn, tn, std::to_string(rows.size())};
      switch (panel) {
        case FigurePanel::DroppedRequests: {
          const auto d = column_values("dropped_requests_total");
          const auto h = column_values("dropped_handoffs");
          out.insert(out.end(), {fmt(mean_of(d)), fmt(sd_of(d)), fmt(mean_of(h)), fmt(sd_of(h))});
          break;
        }
        case FigurePanel::UsageRate:
          out.push_back(fmt(mean_of(column_values("usage_rate"))));
          for (const auto& a : agents) out.push_back(fmt(mean_of(column_values(a + "_usage_rate"))));
          break;
        case FigurePanel::FailureSteps: {
          const auto f = column_values("failure_steps");
          double total = 0.0;
          for (double x : f) total += x;
          out.push_back(std::to_string(static_cast<long long>(total)));
          out.push_back(fmt(mean_of(f)));
          break;
        }
      }
      t.rows.push_back(std::move(out));
    }
  }
  return t;
}

std::vector<std::filesystem::path> export_figure_data(const ResultTable& results, std::string_view figure_id,
                                                      const std::filesystem::path& out_dir) {
  std::vector<std::pair<FigurePanel, std::string>> panels;
  if (figure_id == "a" || figure_id == "all") panels.emplace_back(FigurePanel::DroppedRequests, "panel_a.csv");
  if (figure_id == "d" || figure_id == "all") panels.emplace_back(FigurePanel::UsageRate, "panel_d.csv");
  if (figure_id == "e" || figure_id == "all") panels.emplace_back(FigurePanel::FailureSteps, "panel_e.csv");
  if (panels.empty()) throw ConfigError("export: unknown figure id '" + std::string(figure_id) + "'");

  std::vector<ResultTable> tables;
  for (const auto& [panel, _] : panels) tables.push_back(figure_panel(results, panel));
  ensure_dir(out_dir);
  std::vector<std::filesystem::path> written;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    const auto path = out_dir / panels[i].second;
    write_csv(tables[i], path);
    written.push_back(path);
  }
  return written;
}

std::string metric_column(std::string_view agent, std::string_view metric) {
  if (metric != "dropped_requests" && metric != "dropped_handoffs" && metric != "dropped_admissions")
    throw ConfigError("stats: unknown metric '" + std::string(metric) + "'");
  if (agent == "all") return metric == "dropped_requests" ? "dropped_requests_total" : std::string(metric);
  return std::string(agent) + "_" + std::string(metric);
}

ResultTable stats_table(const ResultTable& results, std::string_view metric) {
  ResultTable t;
  t.header = {"agent", "traffic", "H", "df", "p", "pair", "z", "raw_p", "holm_p", "stars"};
  auto agents = results.agent_ids();
  agents.emplace_back("all");
  for (const auto& agent : agents) {
    const std::string col = metric_column(agent, metric);
    for (TrafficLevel tl : kTrafficOrder) {
      const std::string tn(traffic_name(tl));
      stats::SampleGroups groups;
      for (Configuration c : kConfigOrder) {
        const std::string cn(configuration_name(c));
        std::vector<double> values;
        for (std::size_t r : rows_for(results, cn, tn)) values.push_back(results.number(r, col));
        if (!values.empty()) groups.groups.emplace_back(cn, std::move(values));
      }
      const bool has_control =
          std::any_of(groups.groups.begin(), groups.groups.end(), [](const auto& g) { return g.first == "marl_only"; });
      if (groups.groups.size() < 2 || groups.total() < 3 || !has_control) continue;
      const auto res = stats::kruskal_dunn(groups, "marl_only");
      for (const auto& pr : res.pairwise) {
        t.rows.push_back({agent, tn, fmt_g(res.omnibus.h_statistic), std::to_string(res.omnibus.degrees_of_freedom),
                          fmt_g(res.omnibus.p_value), pr.other + "-vs-" + pr.control, fmt_g(pr.z), fmt_g(pr.raw_p),
                          fmt_g(pr.adjusted_p), stats::significance_stars(pr.adjusted_p)});
      }
    }
  }
  return t;
}

void write_experiment_outputs(const ExperimentPlan& plan, const std::vector<CellResult>& results,
                              const std::filesystem::path& out_dir) {
  ensure_dir(out_dir);
  const ResultTable table = results_table(results);
  write_csv(table, out_dir / "results.csv");

  std::string events;
  for (const CellResult& c : results) events += c.events;
  write_text(out_dir / "events.jsonl", events);

  if (plan.save_policies) {
    const auto dir = out_dir / "policies";
    ensure_dir(dir);
    for (const CellResult& c : results) {
      for (const AgentRuntime& a : c.agents) {
        const std::string name = std::string(configuration_name(c.key.configuration)) + "_" +
                                 std::string(traffic_name(c.key.traffic)) + "_" + std::to_string(c.key.seed) +
                                 "_" + a.id + ".json";
        write_text(dir / name, qtable_to_json(a.q).dump(2) + "\n");
      }
    }
  }

  bool full_grid = true;
  for (Configuration c : kConfigOrder)
    for (TrafficLevel tl : kTrafficOrder)
      if (rows_for(table, configuration_name(c), traffic_name(tl)).empty()) full_grid = false;
  if (full_grid) export_figure_data(table, "all", out_dir / "plotdata");
}

std::map<std::tuple<std::string, std::string, std::uint64_t>, EventTotals> recount_events(
    const std::filesystem::path& events_path) {
  std::ifstream in(events_path);
  if (!in) throw IoError("cannot open for reading: " + events_path.string());
  std::map<std::tuple<std::string, std::string, std::uint64_t>, EventTotals> totals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ConfigError(events_path.string() + ":" + std::to_string(lineno) + ": malformed event");
    try {
      auto key = std::make_tuple(j.at("config").get<std::string>(), j.at("traffic").get<std::string>(),
                                 j.at("seed").get<std::uint64_t>());
      const std::string type = j.at("type").get<std::string>();
      EventTotals& t = totals[key];
      if (type == "delayed_reward") {
        ++t.delayed_rewards;
      } else if (type == "episode" && j.at("phase") == "test") {
        ++t.test_episodes;
        t.dropped_requests += j.at("dropped_requests").get<long>();
        t.dropped_handoffs += j.at("dropped_handoffs").get<long>();
        t.failure_steps += j.at("failure_steps").get<long>();
      } else if (type == "step" && j.at("phase") == "test") {
        if (j.at("failure").get<bool>()) ++t.failure_steps_from_steps;
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(events_path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return totals;
}

}  // namespace aura
