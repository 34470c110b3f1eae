#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazecam::stats {

struct TestResult {
  std::string statistic_name;  // "rho", "V", "W", "H"
  double statistic = 0.0;
  std::optional<double> p_value;        // absent on degenerate inputs
  std::optional<double> effect_size_r;  // |Z| / sqrt(N)
  int n = 0;
  std::string method;
  bool degenerate = false;
  std::string note;
};

enum class Alternative { two_sided, less, greater };

// ---- numerics ---------------------------------------------------------------

double normal_cdf(double z);
double normal_quantile(double p);
// Regularized lower incomplete gamma P(s, x); series for x < s+1, continued
// fraction otherwise; converges to ~1e-10.
double regularized_gamma_p(double s, double x);
double chi_square_sf(double x, int df);
// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction.
double regularized_beta(double a, double b, double x);
// Two-sided p for a t statistic: I_{df/(df+t^2)}(df/2, 1/2).
double student_t_two_sided_p(double t, int df);

// Type-7 percentile (linear interpolation between order statistics) on a
// sorted vector; q in [0,1].
double percentile_type7(const std::vector<double>& sorted, double q);

// Average (mean) ranks, ties share the mean of their positions.
std::vector<double> mean_ranks(std::span<const double> values);

// ---- tests ------------------------------------------------------------------

// Pearson correlation of mean ranks. NaN entries in either vector delete the
// pair (listwise deletion). Constant input after deletion is degenerate.
TestResult spearman(std::span<const double> x, std::span<const double> y);

// rho_xy.z = (rho_xy - rho_xz*rho_yz) / sqrt((1-rho_xz^2)(1-rho_yz^2)),
// all rho Spearman; degenerate if a denominator factor is <= 0.
TestResult partial_spearman(std::span<const double> x, std::span<const double> y,
                            std::span<const double> z);

// V = sum of positive-difference ranks; zeros dropped, ties mean-ranked.
// Exact enumeration of sign patterns for n <= 12, otherwise normal
// approximation with tie and continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> sample, double mu0,
                                Alternative alternative = Alternative::two_sided);

// W = rank sum of the first group. Exact enumeration for n_a + n_b <= 12,
// otherwise normal approximation with tie and continuity correction.
TestResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                             Alternative alternative = Alternative::two_sided);

// H with tie correction; p from the chi-square survival with k-1 df.
TestResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

// p_adj = min(1, m * p).
std::vector<double> bonferroni(std::span<const double> p_values);

struct HodgesLehmann {
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  bool full_range = false;  // n too small for the requested coverage
};

// Median of Walsh averages; CI endpoints at the signed-rank critical ranks
// (exact null distribution for n <= 12, normal approximation otherwise).
HodgesLehmann hodges_lehmann_ci(std::span<const double> sample, double alpha = 0.05);

enum class TertileLabel { low, medium, high };

const char* tertile_label_name(TertileLabel label);

struct TertileSplit {
  std::vector<TertileLabel> labels;
  double p33 = 0.0;
  double p66 = 0.0;
  bool degenerate = false;  // all cuts equal; everything labels low
};

// Cuts at the 33rd and 66th type-7 percentiles; low <= p33 < medium <= p66 < high.
TertileSplit tertile_split(std::span<const double> ratings);

}  // namespace gazecam::stats
