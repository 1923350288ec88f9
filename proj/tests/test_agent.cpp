#include <doctest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <random>

#include "aura/agent.hpp"

using namespace aura;

namespace {

Observation obs_of(int p, Coverage c = Coverage::Fair, bool cap = false, int d = 0) {
  return Observation{p, c, cap, d};
}

}  // namespace

TEST_SUITE("agent") {
  TEST_CASE("observation of a station") {
    EnvironmentState s;
    s.stations.push_back(StationState{.id = "rural", .kind = StationKind::Rural, .power_dbm = 43});
    for (UserId id = 0; id < 10; ++id) {
      s.users.push_back(UserState{id, 0, -80.0, 25.0});
      s.stations[0].attached.insert(id);
    }
    const Observation o = observe(s.stations[0], s.users);
    CHECK(o == Observation{0, Coverage::Good, false, 0});

    StationState urban{.id = "urban", .kind = StationKind::Urban, .power_dbm = 37};
    for (UserId id = 100; id < 130; ++id) urban.attached.insert(id);
    const Observation u = observe(urban, {});
    CHECK(u.at_capacity);
    CHECK(u.power_bucket == 7);

    urban.last_step.dropped_admissions = 2;
    urban.last_step.handoff_failures = 1;
    CHECK(observe(urban, {}).dropped_bucket == 2);
  }

  TEST_CASE("dropped bucket boundaries") {
    CHECK(dropped_bucket(0) == 0);
    CHECK(dropped_bucket(1) == 1);
    CHECK(dropped_bucket(2) == 1);
    CHECK(dropped_bucket(3) == 2);
    CHECK(dropped_bucket(40) == 2);
  }

  TEST_CASE("observation keys round-trip") {
    const Observation o{2, Coverage::Fair, false, 1};
    CHECK(o.key() == "p2|Fair|cap0|d1");
    CHECK(Observation::from_key("p2|Fair|cap0|d1") == o);
    for (int p = 0; p < 8; ++p)
      for (Coverage c : {Coverage::Good, Coverage::Fair, Coverage::Poor})
        for (bool cap : {false, true})
          for (int d = 0; d < 3; ++d) {
            const Observation x{p, c, cap, d};
            CHECK(Observation::from_key(x.key()) == x);
          }
    for (const char* bad : {"", "p2|Fair|cap0", "p2|Fair|cap0|d1|x", "q2|Fair|cap0|d1", "p2|Ok|cap0|d1",
                            "p2|Fair|cap2|d1", "p2|Fair|cap0|d3", "p-1|Fair|cap0|d1", "p|Fair|cap0|d1"}) {
      CHECK_FALSE(Observation::from_key(bad).has_value());
    }
  }

  TEST_CASE("greedy selection and tie-break") {
    QTable q;
    const Observation s = obs_of(1);
    Rng rng(1);
    CHECK(select_action(q, s, 0.0, rng) == Action::Increase);
    q.set(s, Action::Increase, 0.5);
    q.set(s, Action::Decrease, 0.1);
    q.set(s, Action::Maintain, 0.1);
    q.set(s, Action::Handoff, 0.1);
    CHECK(select_action(q, s, 0.0, rng) == Action::Increase);
    q.set(s, Action::Handoff, 0.5);
    CHECK(greedy_action(q, s) == Action::Increase);
    q.set(s, Action::Maintain, 0.7);
    CHECK(greedy_action(q, s) == Action::Maintain);
  }

  TEST_CASE("greedy selection is a pure function of table and observation") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> v(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
      QTable q;
      const Observation s = obs_of(trial % 8);
      for (Action a : kAllActions) q.set(s, a, std::round(v(gen) * 4) / 4);
      Rng r1(trial), r2(trial * 7 + 1);
      const Action a1 = select_action(q, s, 0.0, r1);
      const Action a2 = select_action(q, s, 0.0, r2);
      CHECK(a1 == a2);
      CHECK(a1 == greedy_action(q, s));
    }
  }

  TEST_CASE("full exploration is uniform") {
    QTable q;
    q.set(obs_of(0), Action::Maintain, 10.0);
    Rng rng(42);
    std::array<int, 4> counts{};
    const int n = 10000;
    for (int i = 0; i < n; ++i) ++counts[action_index(select_action(q, obs_of(0), 1.0, rng))];
    for (int c : counts) {
      CHECK(c >= 0.22 * n);
      CHECK(c <= 0.28 * n);
    }
  }

  TEST_CASE("q_update examples") {
    LearningParams p;
    const Observation s = obs_of(0), s2 = obs_of(1);

    QTable q;
    q.set(s, Action::Maintain, 0.3);
    QTable before = q;
    p.alpha = 0.0;
    q_update(q, s, Action::Increase, 5.0, s2, p);
    CHECK(q == before);

    QTable z;
    p.alpha = 0.5;
    p.gamma = 0.0;
    q_update(z, s, Action::Increase, 1.0, s2, p);
    CHECK(z.value(s, Action::Increase) == 0.5);

    QTable w;
    w.set(s, Action::Increase, 0.2);
    w.set(s2, Action::Decrease, 0.4);
    w.set(s2, Action::Increase, -1.0);
    p.alpha = 0.1;
    p.gamma = 0.9;
    q_update(w, s, Action::Increase, 1.0, s2, p);
    CHECK(w.value(s, Action::Increase) == doctest::Approx(0.316).epsilon(1e-14));
    CHECK(w.value(s2, Action::Decrease) == 0.4);
  }

  TEST_CASE("q_update matches the closed form on random inputs") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> v(-10, 10), unit(0, 1);
    std::uniform_int_distribution<int> pb(0, 3), act(0, 3);
    int mismatches = 0;
    for (int trial = 0; trial < 10000; ++trial) {
      LearningParams p;
      p.alpha = unit(gen);
      p.gamma = unit(gen) * 0.999;
      QTable q;
      const Observation s = obs_of(pb(gen)), s2 = obs_of(pb(gen), Coverage::Poor);
      for (Action a : kAllActions) {
        q.set(s, a, v(gen));
        q.set(s2, a, v(gen));
      }
      const Action a = kAllActions[static_cast<std::size_t>(act(gen))];
      const double r = v(gen);
      const QTable before = q;
      const double m = std::max({before.value(s2, Action::Increase), before.value(s2, Action::Decrease),
                                 before.value(s2, Action::Maintain), before.value(s2, Action::Handoff)});
      const double old = before.value(s, a);
      const double expected = old + p.alpha * (r + p.gamma * m - old);
      q_update(q, s, a, r, s2, p);
      if (std::abs(q.value(s, a) - expected) > 1e-12) ++mismatches;
      for (Action b : kAllActions) {
        if (b != a && q.value(s, b) != before.value(s, b)) ++mismatches;
        if (q.value(s2, b) != before.value(s2, b)) ++mismatches;
      }
    }
    CHECK(mismatches == 0);
  }

  TEST_CASE("q_update rejects non-finite rewards") {
    QTable q;
    CHECK_THROWS_AS(q_update(q, obs_of(0), Action::Increase, std::nan(""), obs_of(1), LearningParams{}),
                    PreconditionError);
    CHECK_THROWS_AS(q.set(obs_of(0), Action::Increase, INFINITY), PreconditionError);
  }

  TEST_CASE("toy MDP converges to the value-iteration policy") {
    // s0 -a0-> s0 (r=1), s0 -a1-> s1 (r=0), s1 -a0-> s0 (r=0), s1 -a1-> s1 (r=2).
    // Reference from tests/oracles/toy_mdp.py: Q* = [[17.2, 18], [16.2, 20]],
    // greedy action a1 in both states.
    const std::array<Observation, 2> states{obs_of(0), obs_of(1)};
    const std::array<Action, 2> acts{Action::Increase, Action::Decrease};
    LearningParams p;
    p.alpha = 0.1;
    p.gamma = 0.9;
    QTable q;
    Rng rng(17);
    std::size_t s = 0;
    for (int k = 0; k < 10000; ++k) {
      const std::size_t a = rng() % 2;
      const std::size_t next = a == 0 ? 0 : 1;
      const double r = s == 0 ? (a == 0 ? 1.0 : 0.0) : (a == 0 ? 0.0 : 2.0);
      q_update(q, states[s], acts[a], r, states[next], p);
      s = next;
    }
    CHECK(greedy_action(q, states[0]) == Action::Decrease);
    CHECK(greedy_action(q, states[1]) == Action::Decrease);
    CHECK(q.value(states[1], Action::Decrease) == doctest::Approx(20.0).epsilon(0.02));
    CHECK(q.value(states[0], Action::Decrease) == doctest::Approx(18.0).epsilon(0.02));
  }

  TEST_CASE("combine_decision") {
    Rng rng(1);
    TrustScore t{0.0, 0.0};
    CHECK(combine_decision(std::nullopt, Action::Maintain, t, rng).action == Action::Maintain);
    CHECK_FALSE(combine_decision(std::nullopt, Action::Maintain, t, rng).adopted_llm);
    auto d = combine_decision(Action::Handoff, Action::Maintain, t, rng);
    CHECK(d.action == Action::Maintain);
    CHECK_FALSE(d.adopted_llm);
    t.value = 1.0;
    d = combine_decision(Action::Handoff, Action::Maintain, t, rng);
    CHECK(d.action == Action::Handoff);
    CHECK(d.adopted_llm);
    d = combine_decision(Action::Maintain, Action::Maintain, t, rng);
    CHECK(d.action == Action::Maintain);
    CHECK_FALSE(d.adopted_llm);
  }

  TEST_CASE("combine_decision draws only on disagreement") {
    Rng a(5), b(5);
    TrustScore t{0.5, 0.0};
    combine_decision(std::nullopt, Action::Maintain, t, a);
    combine_decision(Action::Maintain, Action::Maintain, t, a);
    CHECK(a == b);
    combine_decision(Action::Increase, Action::Maintain, t, a);
    CHECK(a != b);
  }

  TEST_CASE("adoption frequency grows with trust") {
    double prev = -1.0;
    for (double v : {0.1, 0.5, 0.9}) {
      Rng rng(123);
      const TrustScore t{v, 0.0};
      int adopted = 0;
      for (int i = 0; i < 10000; ++i) adopted += combine_decision(Action::Handoff, Action::Increase, t, rng).adopted_llm;
      const double freq = adopted / 10000.0;
      CHECK(freq >= prev);
      CHECK(freq == doctest::Approx(v).epsilon(0.05));
      prev = freq;
    }
  }

  TEST_CASE("update_trust examples") {
    LearningParams p;
    p.trust_eta = 0.1;
    const TrustScore t{0.5, 0.2};
    const TrustScore none = update_trust(t, std::nullopt, Action::Maintain, 5.0, p);
    CHECK(none.value == 0.5);
    CHECK(none.reward_ema == doctest::Approx(0.9 * 0.2 + 0.1 * 5.0));
    CHECK(update_trust(t, Action::Maintain, Action::Maintain, 0.2, p).value == doctest::Approx(0.55));
    CHECK(update_trust(t, Action::Maintain, Action::Maintain, 0.19, p).value == doctest::Approx(0.45));
    CHECK(update_trust(t, Action::Maintain, Action::Increase, -3.0, p).value == 0.5);
  }

  TEST_CASE("update_trust compares against the pre-update baseline") {
    LearningParams p;
    p.trust_eta = 0.1;
    // r = 1 is above the old EMA 0.5 but the new EMA is 0.55; still counts as good.
    const TrustScore t = update_trust({0.5, 0.5}, Action::Increase, Action::Increase, 1.0, p);
    CHECK(t.value == doctest::Approx(0.55));
  }

  TEST_CASE("trust stays bounded under random updates") {
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> r(-50, 50), unit(0, 1);
    LearningParams p;
    TrustScore t;
    int out_of_range = 0;
    for (int i = 0; i < 100000; ++i) {
      if (i % 1000 == 0) p.trust_eta = std::max(1e-6, unit(gen));
      const auto sugg = gen() % 3 == 0 ? std::nullopt : std::optional<Action>(kAllActions[gen() % 4]);
      t = update_trust(t, sugg, kAllActions[gen() % 4], r(gen), p);
      if (!(t.value >= 0.0 && t.value <= 1.0)) ++out_of_range;
    }
    CHECK(out_of_range == 0);
  }

  TEST_CASE("epsilon schedule") {
    LearningParams p;
    CHECK(epsilon_for_episode(p, 0) == doctest::Approx(0.3));
    CHECK(epsilon_for_episode(p, 1) == doctest::Approx(0.3 * 0.995));
    CHECK(epsilon_for_episode(p, 1000) == doctest::Approx(0.05));
  }

  TEST_CASE("learning params validation") {
    LearningParams p;
    CHECK_NOTHROW(p.validate());
    p.alpha = 0.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = LearningParams{};
    p.gamma = 1.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = LearningParams{};
    p.delayed_alpha = 1.5;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = LearningParams{};
    p.delayed_alpha = 0.3;
    CHECK(p.effective_delayed_alpha() == 0.3);
  }

  TEST_CASE("q-table equality treats a missing row as zeros") {
    QTable a, b;
    a.set(obs_of(0), Action::Increase, 0.0);
    CHECK(a == b);
    b.set(obs_of(1), Action::Handoff, 1.0);
    CHECK_FALSE(a == b);
  }

  TEST_CASE("q-table JSON round trip") {
    QTable q;
    q.set(obs_of(2, Coverage::Poor, true, 2), Action::Handoff, -1.25);
    q.set(obs_of(0), Action::Increase, 3.5);
    const auto j = qtable_to_json(q);
    CHECK(j.contains("p2|Poor|cap1|d2"));
    CHECK(qtable_from_json(j) == q);

    const auto path = std::filesystem::temp_directory_path() / "aura_qtable_test.json";
    save_qtable(q, path);
    CHECK(load_qtable(path) == q);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(qtable_from_json(nlohmann::json::parse(R"({"bad":[1,2,3,4]})")), ConfigError);
    CHECK_THROWS_AS(qtable_from_json(nlohmann::json::parse(R"({"p0|Good|cap0|d0":[1,2,3]})")), ConfigError);
    CHECK_THROWS_AS(qtable_from_json(nlohmann::json::parse("[]")), ConfigError);
  }
}
