#pragma once

// Kruskal-Wallis H test and Dunn's post-hoc comparisons against a control
// group with Holm step-down adjustment, plus the tail functions they need.

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace aura::stats {

/// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
double regularized_gamma_q(double a, double x);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi_square_sf(double x, int df);

/// Upper tail of the standard normal distribution.
double normal_sf(double z);

struct SampleGroups {
  std::vector<std::pair<std::string, std::vector<double>>> groups;

  std::size_t total() const;
  /// Throws PreconditionError unless there are >= 2 groups, each non-empty.
  void validate() const;
};

struct KruskalResult {
  double h_statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
};

struct PairwiseResult {
  std::string control;
  std::string other;
  double z = 0.0;
  double raw_p = 1.0;
  double adjusted_p = 1.0;
};

struct TestResult {
  KruskalResult omnibus;
  std::vector<PairwiseResult> pairwise;
};

/// Mid-ranks (1-based) of `values`, and the tie term sum(t^3 - t) over tie
/// groups.
struct Ranking {
  std::vector<double> ranks;
  double tie_sum = 0.0;
};
Ranking mid_ranks(std::span<const double> values);

KruskalResult kruskal_wallis(const SampleGroups& groups);

/// Holm step-down adjustment. Output keeps the input order.
std::vector<double> holm_adjust(std::span<const double> raw);

/// Dunn's z test of every non-control group against `control_label`,
/// two-sided, Holm-adjusted across the comparisons. Output follows group
/// order.
std::vector<PairwiseResult> dunn_posthoc(const SampleGroups& groups, const std::string& control_label);

TestResult kruskal_dunn(const SampleGroups& groups, const std::string& control_label);

/// "***" below .001, "**" below .01, "*" below .05, else "ns".
std::string significance_stars(double p);

}  // namespace aura::stats
