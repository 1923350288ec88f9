#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "aura/alignment.hpp"

using namespace aura;

namespace {

TransitionRecord rec(std::uint64_t step, Observation o, Action a, int requests = 0, int drops = 0) {
  TransitionRecord r;
  r.observation = o;
  r.action = a;
  r.step_index = step;
  r.psi.requests_this_step = requests;
  r.psi.drops_this_step = drops;
  return r;
}

class FixedEvaluator : public Evaluator {
 public:
  explicit FixedEvaluator(double v) : v_(v) {}
  std::string name() const override { return "fixed"; }
  DelayedReward score(const AgentHistory&) override { return {v_, "fixed", false}; }

 private:
  double v_;
};

class CannedBackend : public AdvisorBackend {
 public:
  std::optional<std::string> reply;
  bool error = false;
  std::string last_prompt;
  BackendKind kind() const override { return BackendKind::Replay; }
  Suggestion suggest(const AdvisorQuery&) override { return {}; }
  Completion complete(const std::string& prompt) override {
    last_prompt = prompt;
    Completion c;
    c.text = reply;
    c.error = error;
    return c;
  }
};

const Observation s1{0, Coverage::Fair, false, 0};
const Observation s2{1, Coverage::Good, true, 1};

}  // namespace

TEST_SUITE("alignment") {
  TEST_CASE("accumulate keeps order and rejects regressions") {
    AgentHistory h;
    accumulate(h, rec(3, s1, Action::Increase));
    CHECK(h.size() == 1);
    CHECK(h.window_start_step == 3);
    for (std::uint64_t k = 4; k < 20; ++k) accumulate(h, rec(k, s1, kAllActions[k % 4]));
    CHECK(h.size() == 17);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(h.records[i].step_index == 3 + i);

    AgentHistory g;
    accumulate(g, rec(7, s1, Action::Increase));
    CHECK_THROWS_AS(accumulate(g, rec(5, s1, Action::Increase)), OrderingError);
    CHECK_THROWS_AS(accumulate(g, rec(7, s1, Action::Increase)), OrderingError);
    CHECK(g.size() == 1);
  }

  TEST_CASE("scripted evaluator anchors") {
    ScriptedEvaluator ev;
    AgentHistory h;
    accumulate(h, rec(0, s1, Action::Maintain, 5, 0));
    accumulate(h, rec(1, s1, Action::Maintain, 3, 0));
    CHECK(evaluate(h, ev).value == 1.0);

    AgentHistory all;
    accumulate(all, rec(0, s1, Action::Maintain, 4, 4));
    CHECK(evaluate(all, ev).value == -1.0);

    AgentHistory quarter;
    accumulate(quarter, rec(0, s1, Action::Maintain, 8, 2));
    accumulate(quarter, rec(1, s1, Action::Maintain, 4, 1));
    CHECK(evaluate(quarter, ev).value == doctest::Approx(0.5));
    CHECK_FALSE(evaluate(quarter, ev).flagged);

    AgentHistory idle;
    accumulate(idle, rec(0, s1, Action::Maintain, 0, 0));
    CHECK(evaluate(idle, ev).value == 1.0);
  }

  TEST_CASE("scripted evaluator is non-increasing in the drop fraction") {
    ScriptedEvaluator ev;
    double prev = 2.0;
    for (int drops = 0; drops <= 20; ++drops) {
      AgentHistory h;
      accumulate(h, rec(0, s1, Action::Maintain, 20, drops));
      const double v = evaluate(h, ev).value;
      CHECK(v <= prev);
      CHECK(v >= -1.0);
      prev = v;
    }
  }

  TEST_CASE("evaluate requires a non-empty history") {
    ScriptedEvaluator ev;
    AgentHistory h;
    CHECK_THROWS_AS(evaluate(h, ev), PreconditionError);
  }

  TEST_CASE("evaluate clamps and flags out-of-range evaluators") {
    AgentHistory h;
    accumulate(h, rec(0, s1, Action::Maintain));
    FixedEvaluator hi(3.0), lo(-7.0), nan(std::nan(""));
    CHECK(evaluate(h, hi).value == 1.0);
    CHECK(evaluate(h, hi).flagged);
    CHECK(evaluate(h, lo).value == -1.0);
    CHECK(evaluate(h, nan).value == 0.0);
    CHECK(evaluate(h, nan).flagged);
  }

  TEST_CASE("parse_reward") {
    CHECK(parse_reward("0.4") == 0.4);
    CHECK(parse_reward("-1") == -1.0);
    CHECK(parse_reward("+.5") == 0.5);
    CHECK(parse_reward("Score: -0.75 (Poor adaptability)") == -0.75);
    CHECK(parse_reward("I'd say .25") == 0.25);
    CHECK(parse_reward("12 out of 10") == 12.0);
    CHECK_FALSE(parse_reward("excellent").has_value());
    CHECK_FALSE(parse_reward("").has_value());
    CHECK_FALSE(parse_reward("-.").has_value());
  }

  TEST_CASE("llm evaluator") {
    auto backend = std::make_shared<CannedBackend>();
    LlmEvaluator ev(backend);
    AgentHistory h;
    h.agent_id = "urban";
    accumulate(h, rec(0, s1, Action::Handoff, 3, 1));

    backend->reply = "0.6 - decent";
    auto r = evaluate(h, ev);
    CHECK(r.value == doctest::Approx(0.6));
    CHECK_FALSE(r.flagged);
    CHECK(backend->last_prompt.find("urban") != std::string::npos);
    CHECK(backend->last_prompt.find("fairness") != std::string::npos);
    CHECK(backend->last_prompt.find("handoff") != std::string::npos);

    backend->reply = "I rate it 4";
    r = evaluate(h, ev);
    CHECK(r.value == 1.0);
    CHECK(r.flagged);

    backend->reply = "no comment";
    r = evaluate(h, ev);
    CHECK(r.value == 0.0);
    CHECK(r.flagged);

    backend->reply.reset();
    backend->error = true;
    r = evaluate(h, ev);
    CHECK(r.value == 0.0);
    CHECK(r.flagged);

    CHECK_THROWS_AS(LlmEvaluator(nullptr), ConfigError);
  }

  TEST_CASE("evaluate stays in range for arbitrary replies") {
    auto backend = std::make_shared<CannedBackend>();
    LlmEvaluator ev(backend);
    AgentHistory h;
    accumulate(h, rec(0, s1, Action::Maintain));
    std::mt19937_64 gen(4);
    const std::string alphabet = "0123456789.-+e abcXYZ,;";
    for (int i = 0; i < 5000; ++i) {
      std::string s(gen() % 24, ' ');
      for (char& c : s) c = alphabet[gen() % alphabet.size()];
      backend->reply = s;
      const auto r = evaluate(h, ev);
      REQUIRE(r.value >= -1.0);
      REQUIRE(r.value <= 1.0);
    }
  }

  TEST_CASE("apply_delayed examples") {
    QTable q;
    AgentHistory h;
    accumulate(h, rec(0, s1, Action::Increase));
    accumulate(h, rec(1, s1, Action::Increase));
    accumulate(h, rec(2, s2, Action::Maintain));
    apply_delayed(q, h, {0.5, "", false}, 0.1);
    CHECK(q.value(s1, Action::Increase) == doctest::Approx(0.10).epsilon(1e-14));
    CHECK(q.value(s2, Action::Maintain) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(h.empty());

    QTable z;
    z.set(s1, Action::Decrease, 2.0);
    const QTable before = z;
    AgentHistory h2;
    accumulate(h2, rec(0, s1, Action::Decrease));
    apply_delayed(z, h2, {0.0, "", false}, 0.1);
    CHECK(z == before);
    CHECK(h2.empty());

    AgentHistory empty;
    apply_delayed(z, empty, {1.0, "", false}, 0.1);
    CHECK(z == before);

    AgentHistory h3;
    accumulate(h3, rec(0, s1, Action::Decrease));
    CHECK_THROWS_AS(apply_delayed(z, h3, {1.0, "", false}, 0.0), PreconditionError);
    CHECK_THROWS_AS(apply_delayed(z, h3, {1.0, "", false}, 1.5), PreconditionError);
  }

  TEST_CASE("apply_delayed matches the closed form on random histories") {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> unit(0, 1), val(-5, 5);
    int mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      QTable q;
      for (int p = 0; p < 3; ++p)
        for (Action a : kAllActions) q.set(Observation{p, Coverage::Fair, false, 0}, a, val(gen));
      const QTable before = q;
      AgentHistory h;
      std::map<std::pair<int, int>, int> counts;
      const int n = static_cast<int>(gen() % 12);
      for (int k = 0; k < n; ++k) {
        const int p = static_cast<int>(gen() % 3);
        const Action a = kAllActions[gen() % 4];
        accumulate(h, rec(static_cast<std::uint64_t>(k), Observation{p, Coverage::Fair, false, 0}, a));
        ++counts[{p, action_code(a)}];
      }
      const double r = unit(gen) * 2 - 1;
      const double alpha = std::max(1e-3, unit(gen));
      apply_delayed(q, h, {r, "", false}, alpha);
      if (!h.empty()) ++mismatches;
      for (int p = 0; p < 3; ++p) {
        for (Action a : kAllActions) {
          const Observation o{p, Coverage::Fair, false, 0};
          const auto it = counts.find({p, action_code(a)});
          const int k = it == counts.end() ? 0 : it->second;
          double expected = before.value(o, a);
          for (int i = 0; i < k; ++i) expected += alpha * r;
          if (std::abs(q.value(o, a) - expected) > 1e-12) ++mismatches;
          if (k == 0 && q.value(o, a) != before.value(o, a)) ++mismatches;
        }
      }
    }
    CHECK(mismatches == 0);
  }
}
