#include "aura/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "aura/types.hpp"

namespace aura::stats {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxIter = 1000;

// Series for P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) (modified Lentz); used for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0) || std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw PreconditionError("chi_square_sf: df must be >= 1");
  if (x <= 0.0) return 1.0;
  return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

std::size_t SampleGroups::total() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.second.size();
  return n;
}

void SampleGroups::validate() const {
  if (groups.size() < 2) throw PreconditionError("stats: at least two groups are required");
  for (const auto& [label, values] : groups) {
    if (values.empty()) throw PreconditionError("stats: group '" + label + "' is empty");
    for (double v : values) {
      if (!std::isfinite(v)) throw PreconditionError("stats: group '" + label + "' holds a non-finite value");
    }
  }
}

Ranking mid_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  Ranking r;
  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = mid;
    const double t = static_cast<double>(j - i + 1);
    r.tie_sum += t * t * t - t;
    i = j + 1;
  }
  return r;
}

namespace {

struct Pooled {
  std::vector<double> values;
  std::vector<std::size_t> group_of;
};

Pooled pool(const SampleGroups& groups) {
  Pooled p;
  for (std::size_t g = 0; g < groups.groups.size(); ++g) {
    for (double v : groups.groups[g].second) {
      p.values.push_back(v);
      p.group_of.push_back(g);
    }
  }
  return p;
}

std::vector<double> rank_sums(const Pooled& p, const Ranking& r, std::size_t k) {
  std::vector<double> sums(k, 0.0);
  for (std::size_t i = 0; i < p.values.size(); ++i) sums[p.group_of[i]] += r.ranks[i];
  return sums;
}

}  // namespace

KruskalResult kruskal_wallis(const SampleGroups& groups) {
  groups.validate();
  const std::size_t k = groups.groups.size();
  const double n = static_cast<double>(groups.total());
  if (groups.total() < 3) throw PreconditionError("kruskal_wallis: at least three observations are required");

  const Pooled p = pool(groups);
  const Ranking r = mid_ranks(p.values);
  const auto sums = rank_sums(p, r, k);

  KruskalResult out;
  out.degrees_of_freedom = static_cast<int>(k) - 1;
  const double correction = 1.0 - r.tie_sum / (n * n * n - n);
  if (correction <= 0.0) {
    out.h_statistic = 0.0;
    out.p_value = 1.0;
    return out;
  }
  double acc = 0.0;
  for (std::size_t g = 0; g < k; ++g) {
    acc += sums[g] * sums[g] / static_cast<double>(groups.groups[g].second.size());
  }
  const double h = (12.0 / (n * (n + 1.0)) * acc - 3.0 * (n + 1.0)) / correction;
  out.h_statistic = std::max(0.0, h);
  out.p_value = chi_square_sf(out.h_statistic, out.degrees_of_freedom);
  return out;
}

std::vector<double> holm_adjust(std::span<const double> raw) {
  const std::size_t m = raw.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return raw[a] < raw[b]; });
  std::vector<double> adjusted(m, 1.0);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double scaled = std::min(1.0, static_cast<double>(m - i) * raw[order[i]]);
    running = std::max(running, scaled);
    adjusted[order[i]] = running;
  }
  return adjusted;
}

std::vector<PairwiseResult> dunn_posthoc(const SampleGroups& groups, const std::string& control_label) {
  groups.validate();
  const std::size_t k = groups.groups.size();
  std::size_t control = k;
  for (std::size_t g = 0; g < k; ++g) {
    if (groups.groups[g].first == control_label) {
      control = g;
      break;
    }
  }
  if (control == k) throw PreconditionError("dunn_posthoc: control group '" + control_label + "' not found");

  const double n = static_cast<double>(groups.total());
  const Pooled p = pool(groups);
  const Ranking r = mid_ranks(p.values);
  const auto sums = rank_sums(p, r, k);
  const double tie_term = n > 1.0 ? r.tie_sum / (12.0 * (n - 1.0)) : 0.0;
  const double spread = n * (n + 1.0) / 12.0 - tie_term;

  const double nc = static_cast<double>(groups.groups[control].second.size());
  const double mean_c = sums[control] / nc;

  std::vector<PairwiseResult> out;
  std::vector<double> raw;
  for (std::size_t g = 0; g < k; ++g) {
    if (g == control) continue;
    const double nj = static_cast<double>(groups.groups[g].second.size());
    const double mean_j = sums[g] / nj;
    const double var = spread * (1.0 / nc + 1.0 / nj);
    PairwiseResult pr;
    pr.control = control_label;
    pr.other = groups.groups[g].first;
    pr.z = var > 0.0 ? (mean_c - mean_j) / std::sqrt(var) : 0.0;
    pr.raw_p = std::min(1.0, 2.0 * normal_sf(std::fabs(pr.z)));
    raw.push_back(pr.raw_p);
    out.push_back(pr);
  }
  const auto adjusted = holm_adjust(raw);
  for (std::size_t i = 0; i < out.size(); ++i) out[i].adjusted_p = adjusted[i];
  return out;
}

TestResult kruskal_dunn(const SampleGroups& groups, const std::string& control_label) {
  return {kruskal_wallis(groups), dunn_posthoc(groups, control_label)};
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "ns";
}

}  // namespace aura::stats
