#include "gazecam/stats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include "gazecam/errors.hpp"

namespace gazecam::stats {

namespace {

constexpr int kExactLimit = 12;  // enumeration threshold for the Wilcoxon tests

bool is_missing(double v) { return std::isnan(v); }

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

// ---- numerics ---------------------------------------------------------------

double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730951); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw input_error("normal_quantile needs p in (0,1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double regularized_gamma_p(double s, double x) {
  if (x < 0.0 || s <= 0.0) throw input_error("regularized_gamma_p needs x >= 0, s > 0");
  if (x == 0.0) return 0.0;
  const double log_prefix = s * std::log(x) - x - std::lgamma(s);
  if (x < s + 1.0) {
    // series representation
    double term = 1.0 / s;
    double sum = term;
    for (int n = 1; n < 10000; ++n) {
      term *= x / (s + n);
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-15) break;
    }
    return clamp01(std::exp(log_prefix) * sum);
  }
  // continued fraction for Q via modified Lentz
  const double tiny = 1e-300;
  double b = x + 1.0 - s;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 10000; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - s);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-15) break;
  }
  return clamp01(1.0 - std::exp(log_prefix) * h);
}

double chi_square_sf(double x, int df) {
  if (df < 1) throw input_error("chi_square_sf needs df >= 1");
  if (x <= 0.0) return 1.0;
  return clamp01(1.0 - regularized_gamma_p(0.5 * df, 0.5 * x));
}

namespace {

// Lentz continued fraction for the incomplete beta.
double betacf(double a, double b, double x) {
  const double tiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m < 10000; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-14) break;
  }
  return h;
}

}  // namespace

double regularized_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw input_error("regularized_beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(1.0 - x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return clamp01(std::exp(ln_front) * betacf(a, b, x) / a);
  }
  return clamp01(1.0 - std::exp(ln_front) * betacf(b, a, 1.0 - x) / b);
}

double student_t_two_sided_p(double t, int df) {
  if (df < 1) throw input_error("student_t_two_sided_p needs df >= 1");
  return regularized_beta(0.5 * df, 0.5, df / (df + t * t));
}

double percentile_type7(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw input_error("percentile of an empty vector");
  if (q <= 0.0) return sorted.front();
  if (q >= 1.0) return sorted.back();
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> mean_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

// ---- spearman ----------------------------------------------------------------

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y, bool& defined) {
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0) {
    defined = false;
    return 0.0;
  }
  defined = true;
  return sxy / std::sqrt(sxx * syy);
}

TestResult spearman_on_complete(const std::vector<double>& x, const std::vector<double>& y) {
  TestResult result;
  result.statistic_name = "rho";
  result.n = static_cast<int>(x.size());
  bool defined = true;
  const double rho = pearson(mean_ranks(x), mean_ranks(y), defined);
  if (!defined) {
    result.degenerate = true;
    result.method = "spearman (undefined: constant input)";
    result.note = "correlation undefined for a constant vector";
    return result;
  }
  result.statistic = std::clamp(rho, -1.0, 1.0);
  const int df = result.n - 2;
  if (1.0 - rho * rho <= 0.0) {
    result.p_value = 0.0;
  } else {
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    result.p_value = student_t_two_sided_p(t, df);
  }
  result.method = "spearman, t approximation";
  return result;
}

}  // namespace

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw input_error("spearman needs equal-length inputs");
  std::vector<double> cx, cy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i])) continue;  // listwise deletion
    cx.push_back(x[i]);
    cy.push_back(y[i]);
  }
  if (cx.size() < 3) {
    throw input_error("spearman needs at least 3 complete pairs, got " +
                      std::to_string(cx.size()));
  }
  return spearman_on_complete(cx, cy);
}

TestResult partial_spearman(std::span<const double> x, std::span<const double> y,
                            std::span<const double> z) {
  if (x.size() != y.size() || x.size() != z.size()) {
    throw input_error("partial_spearman needs equal-length inputs");
  }
  std::vector<double> cx, cy, cz;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (is_missing(x[i]) || is_missing(y[i]) || is_missing(z[i])) continue;
    cx.push_back(x[i]);
    cy.push_back(y[i]);
    cz.push_back(z[i]);
  }
  if (cx.size() < 4) {
    throw input_error("partial_spearman needs at least 4 complete triples, got " +
                      std::to_string(cx.size()));
  }

  TestResult result;
  result.statistic_name = "rho";
  result.n = static_cast<int>(cx.size());
  const TestResult rxy = spearman_on_complete(cx, cy);
  const TestResult rxz = spearman_on_complete(cx, cz);
  const TestResult ryz = spearman_on_complete(cy, cz);
  if (rxy.degenerate || rxz.degenerate || ryz.degenerate) {
    result.degenerate = true;
    result.method = "partial spearman (undefined: constant input)";
    return result;
  }
  const double dx = 1.0 - rxz.statistic * rxz.statistic;
  const double dy = 1.0 - ryz.statistic * ryz.statistic;
  if (dx <= 0.0 || dy <= 0.0) {
    result.degenerate = true;
    result.method = "partial spearman (degenerate: control fully explains an input)";
    result.note = "denominator factor is zero";
    return result;
  }
  const double rho = (rxy.statistic - rxz.statistic * ryz.statistic) / std::sqrt(dx * dy);
  result.statistic = std::clamp(rho, -1.0, 1.0);
  const int df = result.n - 3;
  if (df >= 1) {
    if (1.0 - rho * rho <= 0.0) {
      result.p_value = 0.0;
    } else {
      const double t = result.statistic * std::sqrt(df / (1.0 - rho * rho));
      result.p_value = student_t_two_sided_p(t, df);
    }
  }
  result.method = "partial spearman, t approximation (df = n - 3)";
  return result;
}

// ---- wilcoxon signed rank ------------------------------------------------------

namespace {

double p_from_alternative(Alternative alt, double p_le, double p_ge) {
  switch (alt) {
    case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(p_le, p_ge));
    case Alternative::greater: return p_ge;
    case Alternative::less: return p_le;
  }
  return 1.0;
}

// Sum of (t^3 - t) over tie groups of a rank input.
double tie_term(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    total += t * t * t - t;
    i = j + 1;
  }
  return total;
}

}  // namespace

TestResult wilcoxon_signed_rank(std::span<const double> sample, double mu0,
                                Alternative alternative) {
  std::vector<double> diffs;
  for (double v : sample) {
    if (is_missing(v)) continue;
    const double d = v - mu0;
    if (d != 0.0) diffs.push_back(d);  // exact zeros are dropped
  }
  const int n = static_cast<int>(diffs.size());
  if (n == 0) {
    throw input_error("wilcoxon_signed_rank: every difference is zero, no information");
  }

  std::vector<double> abs_diffs(diffs.size());
  for (std::size_t i = 0; i < diffs.size(); ++i) abs_diffs[i] = std::fabs(diffs[i]);
  const std::vector<double> ranks = mean_ranks(abs_diffs);

  double v_stat = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) v_stat += ranks[i];
  }

  TestResult result;
  result.statistic_name = "V";
  result.statistic = v_stat;
  result.n = n;

  const double mu = n * (n + 1) / 4.0;
  const double sigma_sq = n * (n + 1) * (2.0 * n + 1.0) / 24.0 - tie_term(abs_diffs) / 48.0;
  const double sigma = std::sqrt(std::max(sigma_sq, 1e-300));
  // effect size uses the approximation Z in both branches
  const double cc = v_stat > mu ? -0.5 : (v_stat < mu ? 0.5 : 0.0);
  const double z = (v_stat - mu + cc) / sigma;
  result.effect_size_r = std::min(1.0, std::fabs(z) / std::sqrt(static_cast<double>(n)));

  if (n <= kExactLimit) {
    // enumerate all 2^n sign assignments; mean ranks are half-integers so 2V
    // indexes an integer histogram
    const int max2v = n * (n + 1);
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(max2v) + 1, 0);
    std::vector<int> r2(diffs.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      r2[i] = static_cast<int>(std::llround(2.0 * ranks[i]));
    }
    const std::uint32_t total = 1u << n;
    for (std::uint32_t mask = 0; mask < total; ++mask) {
      int sum = 0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) sum += r2[static_cast<std::size_t>(i)];
      }
      counts[static_cast<std::size_t>(sum)]++;
    }
    const int v2 = static_cast<int>(std::llround(2.0 * v_stat));
    std::uint64_t le = 0, ge = 0;
    for (int s = 0; s <= max2v; ++s) {
      if (s <= v2) le += counts[static_cast<std::size_t>(s)];
      if (s >= v2) ge += counts[static_cast<std::size_t>(s)];
    }
    const double p_le = static_cast<double>(le) / static_cast<double>(total);
    const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
    result.p_value = p_from_alternative(alternative, p_le, p_ge);
    result.method = "exact enumeration of sign patterns";
  } else {
    const double p_le = normal_cdf((v_stat - mu + 0.5) / sigma);
    const double p_ge = 1.0 - normal_cdf((v_stat - mu - 0.5) / sigma);
    result.p_value = clamp01(p_from_alternative(alternative, p_le, p_ge));
    result.method = "normal approximation, tie and continuity corrected";
  }
  return result;
}

TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                             Alternative alternative) {
  std::vector<double> ca, cb;
  for (double v : a) {
    if (!is_missing(v)) ca.push_back(v);
  }
  for (double v : b) {
    if (!is_missing(v)) cb.push_back(v);
  }
  if (ca.empty() || cb.empty()) throw input_error("wilcoxon_rank_sum needs two non-empty groups");
  const int na = static_cast<int>(ca.size());
  const int nb = static_cast<int>(cb.size());
  const int n = na + nb;

  std::vector<double> combined = ca;
  combined.insert(combined.end(), cb.begin(), cb.end());
  const std::vector<double> ranks = mean_ranks(combined);

  double w_stat = 0.0;
  for (int i = 0; i < na; ++i) w_stat += ranks[static_cast<std::size_t>(i)];

  TestResult result;
  result.statistic_name = "W";
  result.statistic = w_stat;
  result.n = n;

  const double mu = na * (n + 1) / 2.0;
  const double ties = tie_term(combined);
  const double sigma_sq =
      (static_cast<double>(na) * nb / 12.0) *
      ((n + 1) - ties / (static_cast<double>(n) * (n - 1)));
  const double sigma = std::sqrt(std::max(sigma_sq, 1e-300));
  const double cc = w_stat > mu ? -0.5 : (w_stat < mu ? 0.5 : 0.0);
  const double z = (w_stat - mu + cc) / sigma;
  result.effect_size_r = std::min(1.0, std::fabs(z) / std::sqrt(static_cast<double>(n)));

  if (n <= kExactLimit) {
    std::vector<int> r2(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) {
      r2[i] = static_cast<int>(std::llround(2.0 * ranks[i]));
    }
    const int w2 = static_cast<int>(std::llround(2.0 * w_stat));
    std::uint64_t le = 0, ge = 0, total = 0;
    const std::uint32_t masks = 1u << n;
    for (std::uint32_t mask = 0; mask < masks; ++mask) {
      if (std::popcount(mask) != na) continue;
      int sum = 0;
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) sum += r2[static_cast<std::size_t>(i)];
      }
      ++total;
      if (sum <= w2) ++le;
      if (sum >= w2) ++ge;
    }
    const double p_le = static_cast<double>(le) / static_cast<double>(total);
    const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
    result.p_value = p_from_alternative(alternative, p_le, p_ge);
    result.method = "exact enumeration of group assignments";
  } else {
    const double p_le = normal_cdf((w_stat - mu + 0.5) / sigma);
    const double p_ge = 1.0 - normal_cdf((w_stat - mu - 0.5) / sigma);
    result.p_value = clamp01(p_from_alternative(alternative, p_le, p_ge));
    result.method = "normal approximation, tie and continuity corrected";
  }
  return result;
}

TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw input_error("kruskal_wallis needs at least 2 groups");
  std::vector<double> combined;
  std::vector<int> sizes;
  for (const auto& g : groups) {
    int count = 0;
    for (double v : g) {
      if (!is_missing(v)) {
        combined.push_back(v);
        ++count;
      }
    }
    if (count == 0) throw input_error("kruskal_wallis: empty group");
    sizes.push_back(count);
  }
  const int n = static_cast<int>(combined.size());
  if (n < 3) throw input_error("kruskal_wallis needs at least 3 observations");

  TestResult result;
  result.statistic_name = "H";
  result.n = n;
  const int k = static_cast<int>(groups.size());

  const std::vector<double> ranks = mean_ranks(combined);
  double h = 0.0;
  std::size_t offset = 0;
  for (int gi = 0; gi < k; ++gi) {
    double rank_sum = 0.0;
    for (int i = 0; i < sizes[static_cast<std::size_t>(gi)]; ++i) {
      rank_sum += ranks[offset + static_cast<std::size_t>(i)];
    }
    const double mean_rank = rank_sum / sizes[static_cast<std::size_t>(gi)];
    const double dev = mean_rank - (n + 1) / 2.0;
    h += sizes[static_cast<std::size_t>(gi)] * dev * dev;
    offset += static_cast<std::size_t>(sizes[static_cast<std::size_t>(gi)]);
  }
  h *= 12.0 / (static_cast<double>(n) * (n + 1));

  const double tie_correction =
      1.0 - tie_term(combined) / (static_cast<double>(n) * n * n - n);
  if (tie_correction <= 0.0) {
    // every observation identical
    result.statistic = 0.0;
    result.p_value = 1.0;
    result.effect_size_r = 0.0;
    result.method = "kruskal-wallis (all values identical)";
    result.degenerate = true;
    return result;
  }
  h /= tie_correction;
  result.statistic = h;
  result.p_value = chi_square_sf(h, k - 1);
  // eta-squared style effect size
  const double eta_sq = (h - k + 1) / static_cast<double>(n - k);
  result.effect_size_r = std::sqrt(std::clamp(eta_sq, 0.0, 1.0));
  result.method = "kruskal-wallis, tie corrected, chi-square approximation";
  return result;
}

std::vector<double> bonferroni(std::span<const double> p_values) {
  const double m = static_cast<double>(p_values.size());
  std::vector<double> adjusted;
  adjusted.reserve(p_values.size());
  for (double p : p_values) {
    if (p < 0.0 || p > 1.0) throw input_error("bonferroni input p outside [0,1]");
    adjusted.push_back(std::min(1.0, m * p));
  }
  return adjusted;
}

// ---- hodges-lehmann ------------------------------------------------------------

namespace {

// Exact null P(V <= c) for the signed-rank statistic on ranks 1..n.
double signed_rank_cdf_exact(int n, long long c) {
  if (c < 0) return 0.0;
  const long long max_sum = static_cast<long long>(n) * (n + 1) / 2;
  if (c >= max_sum) return 1.0;
  // subset-sum counts by DP
  std::vector<double> counts(static_cast<std::size_t>(max_sum) + 1, 0.0);
  counts[0] = 1.0;
  for (int r = 1; r <= n; ++r) {
    for (long long s = max_sum; s >= r; --s) {
      counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - r)];
    }
  }
  double cum = 0.0;
  for (long long s = 0; s <= c; ++s) cum += counts[static_cast<std::size_t>(s)];
  return cum / std::pow(2.0, n);
}

}  // namespace

HodgesLehmann hodges_lehmann_ci(std::span<const double> sample, double alpha) {
  std::vector<double> x;
  for (double v : sample) {
    if (!is_missing(v)) x.push_back(v);
  }
  const int n = static_cast<int>(x.size());
  if (n < 2) throw input_error("hodges_lehmann_ci needs at least 2 observations");
  if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("alpha must be in (0,1)");

  std::vector<double> walsh;
  walsh.reserve(static_cast<std::size_t>(n) * (n + 1) / 2);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      walsh.push_back(0.5 * (x[static_cast<std::size_t>(i)] + x[static_cast<std::size_t>(j)]));
    }
  }
  std::sort(walsh.begin(), walsh.end());
  const std::size_t m = walsh.size();

  HodgesLehmann hl;
  hl.estimate = (m % 2 == 1) ? walsh[m / 2] : 0.5 * (walsh[m / 2 - 1] + walsh[m / 2]);

  // largest c with P(V <= c) <= alpha/2 under the signed-rank null
  long long c = -1;
  if (n <= kExactLimit) {
    while (signed_rank_cdf_exact(n, c + 1) <= alpha / 2.0) ++c;
  } else {
    const double mu = n * (n + 1) / 4.0;
    const double sigma = std::sqrt(n * (n + 1) * (2.0 * n + 1.0) / 24.0);
    c = static_cast<long long>(std::floor(mu + sigma * normal_quantile(alpha / 2.0) - 0.5));
    if (c < -1) c = -1;
  }

  if (c < 0) {
    // the sample is too small for the requested coverage; fall back to the
    // full Walsh range
    hl.lo = walsh.front();
    hl.hi = walsh.back();
    hl.full_range = true;
    return hl;
  }
  const std::size_t k = static_cast<std::size_t>(c);  // 0-based index of the lower endpoint
  hl.lo = walsh[std::min(k, m - 1)];
  hl.hi = walsh[m - 1 - std::min(k, m - 1)];
  return hl;
}

// ---- tertiles -------------------------------------------------------------------

const char* tertile_label_name(TertileLabel label) {
  switch (label) {
    case TertileLabel::low: return "low";
    case TertileLabel::medium: return "medium";
    case TertileLabel::high: return "high";
  }
  return "?";
}

TertileSplit tertile_split(std::span<const double> ratings) {
  if (ratings.size() < 3) throw input_error("tertile_split needs at least 3 items");
  std::vector<double> sorted(ratings.begin(), ratings.end());
  for (double v : sorted) {
    if (is_missing(v)) throw input_error("tertile_split input has missing values");
  }
  std::sort(sorted.begin(), sorted.end());

  TertileSplit split;
  split.p33 = percentile_type7(sorted, 0.33);
  split.p66 = percentile_type7(sorted, 0.66);
  split.degenerate = (split.p33 == split.p66);
  split.labels.reserve(ratings.size());
  for (double v : ratings) {
    if (v <= split.p33) {
      split.labels.push_back(TertileLabel::low);
    } else if (v > split.p66) {
      split.labels.push_back(TertileLabel::high);
    } else {
      split.labels.push_back(TertileLabel::medium);
    }
  }
  return split;
}

}  // namespace gazecam::stats
