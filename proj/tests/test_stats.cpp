#include <doctest.h>

#include <cmath>
#include <random>

#include "aura/stats.hpp"
#include "aura/types.hpp"

using namespace aura;
using namespace aura::stats;

namespace {

struct Fixture {
  const char* name;
  std::vector<std::vector<double>> groups;
  double h;
  double p;
  std::vector<double> dunn_raw;   // control = first group
  std::vector<double> dunn_holm;
};

const std::vector<Fixture> kFixtures = {
#include "stats_fixtures.inc"
};

SampleGroups make_groups(const std::vector<std::vector<double>>& values) {
  SampleGroups g;
  for (std::size_t i = 0; i < values.size(); ++i) g.groups.emplace_back("g" + std::to_string(i), values[i]);
  return g;
}

}  // namespace

TEST_SUITE("stats") {
  TEST_CASE("tail functions") {
    CHECK(chi_square_sf(0.0, 1) == 1.0);
    CHECK(chi_square_sf(0.0, 5) == 1.0);
    CHECK(std::abs(chi_square_sf(7.2, 2) - std::exp(-3.6)) < 1e-12);
    CHECK(chi_square_sf(7.2, 2) == doctest::Approx(0.0273).epsilon(0.001));
    for (double x : {0.1, 1.0, 5.0, 20.0, 80.0}) CHECK(std::abs(chi_square_sf(x, 2) - std::exp(-x / 2)) < 1e-12);
    CHECK(chi_square_sf(1e4, 3) == 0.0);
    CHECK_THROWS(chi_square_sf(1.0, 0));
    CHECK(normal_sf(0.0) == 0.5);
    CHECK(normal_sf(1.959963984540054) == doctest::Approx(0.025).epsilon(1e-9));
    CHECK(normal_sf(-1.0) + normal_sf(1.0) == doctest::Approx(1.0));
  }

  TEST_CASE("mid ranks") {
    const std::vector<double> v{3, 1, 3, 2, 3};
    const Ranking r = mid_ranks(v);
    CHECK(r.ranks == std::vector<double>{4, 1, 4, 2, 4});
    CHECK(r.tie_sum == 24.0);
  }

  TEST_CASE("kruskal-wallis textbook case") {
    const auto res = kruskal_wallis(make_groups({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}));
    CHECK(res.h_statistic == doctest::Approx(7.2).epsilon(1e-12));
    CHECK(res.degrees_of_freedom == 2);
    CHECK(std::abs(res.p_value - std::exp(-3.6)) < 1e-9);
  }

  TEST_CASE("kruskal-wallis degenerate ties") {
    const auto res = kruskal_wallis(make_groups({{5, 5}, {5, 5}}));
    CHECK(res.h_statistic == 0.0);
    CHECK(res.p_value == 1.0);
    const auto pw = dunn_posthoc(make_groups({{5, 5}, {5, 5}}), "g0");
    REQUIRE(pw.size() == 1);
    CHECK(pw[0].z == 0.0);
    CHECK(pw[0].raw_p == 1.0);
  }

  TEST_CASE("identical samples give z = 0") {
    const auto pw = dunn_posthoc(make_groups({{1, 4, 2, 8}, {1, 4, 2, 8}, {0, 9, 9, 3}}), "g0");
    CHECK(pw[0].other == "g1");
    CHECK(std::abs(pw[0].z) < 1e-12);
    CHECK(pw[0].raw_p == doctest::Approx(1.0));
  }

  TEST_CASE("precomputed reference fixtures") {
    REQUIRE(kFixtures.size() >= 5);
    for (const auto& f : kFixtures) {
      CAPTURE(f.name);
      const auto groups = make_groups(f.groups);
      const auto res = kruskal_dunn(groups, "g0");
      CHECK(std::abs(res.omnibus.h_statistic - f.h) < 1e-9);
      CHECK(std::abs(res.omnibus.p_value - f.p) < 1e-9);
      REQUIRE(res.pairwise.size() == f.dunn_raw.size());
      for (std::size_t i = 0; i < f.dunn_raw.size(); ++i) {
        CHECK(std::abs(res.pairwise[i].raw_p - f.dunn_raw[i]) < 1e-9);
        CHECK(std::abs(res.pairwise[i].adjusted_p - f.dunn_holm[i]) < 1e-9);
      }
    }
  }

  TEST_CASE("holm adjustment") {
    const std::vector<double> raw{0.01, 0.04};
    const auto adj = holm_adjust(raw);
    CHECK(adj[0] == doctest::Approx(0.02));
    CHECK(adj[1] == doctest::Approx(0.04));

    const std::vector<double> r2{0.04, 0.01, 0.03};
    const auto a2 = holm_adjust(r2);
    CHECK(a2[1] == doctest::Approx(0.03));
    CHECK(a2[2] == doctest::Approx(0.06));
    CHECK(a2[0] == doctest::Approx(0.06));
    CHECK(holm_adjust(std::vector<double>{0.6, 0.7})[0] == 1.0);
    CHECK(holm_adjust(std::vector<double>{}).empty());
  }

  TEST_CASE("holm is monotone and dominates raw p") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 2000; ++t) {
      std::vector<double> raw(1 + gen() % 6);
      for (double& p : raw) p = u(gen) * u(gen);
      const auto adj = holm_adjust(raw);
      std::vector<std::size_t> order(raw.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return raw[a] < raw[b]; });
      for (std::size_t k = 0; k < order.size(); ++k) {
        REQUIRE(adj[order[k]] >= raw[order[k]]);
        REQUIRE(adj[order[k]] <= 1.0);
        if (k > 0) REQUIRE(adj[order[k]] >= adj[order[k - 1]]);
      }
    }
  }

  TEST_CASE("H is invariant under monotone transforms") {
    std::mt19937_64 gen(8);
    std::uniform_int_distribution<int> v(0, 12);
    for (int t = 0; t < 200; ++t) {
      std::vector<std::vector<double>> a(3), b(3);
      for (std::size_t g = 0; g < 3; ++g)
        for (int k = 0; k < 4 + static_cast<int>(g); ++k) {
          const double x = v(gen);
          a[g].push_back(x);
          b[g].push_back(std::exp(x / 3.0) - 7.0);
        }
      const double ha = kruskal_wallis(make_groups(a)).h_statistic;
      const double hb = kruskal_wallis(make_groups(b)).h_statistic;
      REQUIRE(std::abs(ha - hb) < 1e-9);
    }
  }

  TEST_CASE("dunn sign convention") {
    // other group with larger values gets negative z
    const auto pw = dunn_posthoc(make_groups({{1, 2, 3, 4}, {10, 11, 12, 13}}), "g0");
    CHECK(pw[0].z < 0.0);
  }

  TEST_CASE("input validation") {
    CHECK_THROWS_AS(kruskal_wallis(make_groups({{1, 2, 3}})), PreconditionError);
    CHECK_THROWS_AS(kruskal_wallis(make_groups({{1, 2, 3}, {}})), PreconditionError);
    CHECK_THROWS_AS(dunn_posthoc(make_groups({{1, 2}, {3, 4}}), "missing"), PreconditionError);
  }

  TEST_CASE("significance stars") {
    CHECK(significance_stars(0.0005) == "***");
    CHECK(significance_stars(0.005) == "**");
    CHECK(significance_stars(0.02) == "*");
    CHECK(significance_stars(0.05) == "ns");
    CHECK(significance_stars(0.9) == "ns");
  }
}
