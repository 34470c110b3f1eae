#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "gazecam/errors.hpp"
#include "gazecam/rng.hpp"
#include "gazecam/stats.hpp"

using namespace gazecam;
namespace st = gazecam::stats;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- independent oracle helpers (written from the definitions) -------------

std::vector<double> oracle_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    double total = 0.0;
    for (std::size_t k = i; k <= j; ++k) total += static_cast<double>(k + 1);
    const double mean_rank = total / static_cast<double>(j - i + 1);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double oracle_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

double oracle_spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  return oracle_pearson(oracle_ranks(x), oracle_ranks(y));
}

// Exact two-sided signed-rank p by recursive enumeration of sign patterns.
double oracle_signed_rank_p(const std::vector<double>& diffs) {
  std::vector<double> abs_diffs;
  for (double d : diffs) abs_diffs.push_back(std::fabs(d));
  const std::vector<double> ranks = oracle_ranks(abs_diffs);
  double v_obs = 0.0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    if (diffs[i] > 0.0) v_obs += ranks[i];
  }
  const std::size_t n = diffs.size();
  std::size_t le = 0, ge = 0;
  const std::size_t total = static_cast<std::size_t>(1) << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (static_cast<std::size_t>(1) << i)) v += ranks[i];
    }
    if (v <= v_obs + 1e-12) ++le;
    if (v >= v_obs - 1e-12) ++ge;
  }
  const double p_le = static_cast<double>(le) / static_cast<double>(total);
  const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
  return std::min(1.0, 2.0 * std::min(p_le, p_ge));
}

// Exact two-sided rank-sum p by enumeration of group assignments.
double oracle_rank_sum_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> combined = a;
  combined.insert(combined.end(), b.begin(), b.end());
  const std::vector<double> ranks = oracle_ranks(combined);
  const std::size_t n = combined.size(), na = a.size();
  double w_obs = 0.0;
  for (std::size_t i = 0; i < na; ++i) w_obs += ranks[i];

  std::size_t le = 0, ge = 0, total = 0;
  std::vector<std::size_t> pick(na);
  // iterate all combinations of size na
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t start, std::size_t depth) {
    if (depth == na) {
      double w = 0.0;
      for (std::size_t i : pick) w += ranks[i];
      ++total;
      if (w <= w_obs + 1e-12) ++le;
      if (w >= w_obs - 1e-12) ++ge;
      return;
    }
    for (std::size_t i = start; i < n; ++i) {
      pick[depth] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  const double p_le = static_cast<double>(le) / static_cast<double>(total);
  const double p_ge = static_cast<double>(ge) / static_cast<double>(total);
  return std::min(1.0, 2.0 * std::min(p_le, p_ge));
}

std::vector<double> random_sample(Rng& rng, int n, double lo = -5.0, double hi = 5.0) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

// ---- numerics ----------------------------------------------------------------

TEST_CASE("normal quantile and cdf agree with tabled values") {
  CHECK(st::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st::normal_cdf(1.959963985) == doctest::Approx(0.975).epsilon(1e-9));
  CHECK(st::normal_quantile(0.975) == doctest::Approx(1.959963985).epsilon(1e-8));
  CHECK(st::normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(st::normal_quantile(st::normal_cdf(-1.3)) == doctest::Approx(-1.3).epsilon(1e-9));
}

TEST_CASE("chi-square survival matches tabled critical values") {
  CHECK(st::chi_square_sf(3.841458821, 1) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(st::chi_square_sf(5.991464547, 2) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(st::chi_square_sf(11.34486673, 3) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(st::chi_square_sf(0.0, 4) == 1.0);
}

TEST_CASE("student t two-sided p matches tabled critical values") {
  CHECK(st::student_t_two_sided_p(2.776445105, 4) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(st::student_t_two_sided_p(2.262157163, 9) == doctest::Approx(0.05).epsilon(1e-7));
  CHECK(st::student_t_two_sided_p(0.0, 7) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("incomplete beta respects its symmetry") {
  CHECK(st::regularized_beta(2.0, 3.0, 0.4) ==
        doctest::Approx(1.0 - st::regularized_beta(3.0, 2.0, 0.6)).epsilon(1e-12));
  CHECK(st::regularized_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
}

// ---- spearman ------------------------------------------------------------------

TEST_CASE("spearman of monotone transforms is exactly +-1") {
  const std::vector<double> x = {0.3, 1.2, 2.0, 4.4, 9.1};
  std::vector<double> y;
  for (double v : x) y.push_back(std::exp(v));  // strictly increasing transform
  const st::TestResult up = st::spearman(x, y);
  CHECK(up.statistic == doctest::Approx(1.0).epsilon(1e-12));
  for (double& v : y) v = -v;
  const st::TestResult down = st::spearman(x, y);
  CHECK(down.statistic == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spearman tied fixture matches the mean-rank pearson oracle to 1e-12") {
  const std::vector<double> x = {1, 2, 2, 4};
  const std::vector<double> y = {3, 1, 4, 4};
  const st::TestResult r = st::spearman(x, y);
  CHECK(r.statistic == doctest::Approx(oracle_spearman_rho(x, y)).epsilon(1e-12));
}

TEST_CASE("spearman applies listwise deletion to missing pairs") {
  const std::vector<double> x = {1, 2, kNaN, 4, 5};
  const std::vector<double> y = {2, 4, 1, kNaN, 10};
  const st::TestResult r = st::spearman(x, y);
  CHECK(r.n == 3);  // rows 0, 1, 4 survive
  CHECK(r.statistic == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<double> x = random_sample(rng, 12);
    const std::vector<double> y = random_sample(rng, 12);
    const double base = st::spearman(x, y).statistic;
    std::vector<double> tx, ty;
    for (double v : x) tx.push_back(std::atan(v) * 3.0 + 7.0);
    for (double v : y) ty.push_back(v * v * v);
    CHECK(st::spearman(tx, ty).statistic == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("spearman on constant input reports an undefined correlation") {
  const std::vector<double> x = {2, 2, 2, 2};
  const std::vector<double> y = {1, 3, 2, 4};
  const st::TestResult r = st::spearman(x, y);
  CHECK(r.degenerate);
  CHECK_FALSE(r.p_value.has_value());
}

TEST_CASE("spearman requires three complete pairs") {
  const std::vector<double> x = {1, kNaN, 3};
  const std::vector<double> y = {1, 2, 3};
  CHECK_THROWS_AS(st::spearman(x, y), Error);
}

// ---- partial spearman -------------------------------------------------------------

TEST_CASE("partial correlation with an uncorrelated control equals plain spearman") {
  // z is a permutation with zero rank correlation against the increasing x, y
  const std::vector<double> x = {1, 2, 3, 4};
  const std::vector<double> y = {10, 20, 30, 40};
  const std::vector<double> z = {2, 4, 1, 3};
  CHECK(oracle_spearman_rho(x, z) == doctest::Approx(0.0).epsilon(1e-12));
  const st::TestResult partial = st::partial_spearman(x, y, z);
  const st::TestResult plain = st::spearman(x, y);
  CHECK(partial.statistic == doctest::Approx(plain.statistic).epsilon(1e-12));
}

TEST_CASE("controlling for the variable itself is degenerate") {
  const std::vector<double> y = {5, 1, 4, 2, 8};
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const st::TestResult r = st::partial_spearman(x, y, y);
  CHECK(r.degenerate);
}

TEST_CASE("partial spearman matches the direct formula oracle on random triples") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<double> x = random_sample(rng, 10);
    const std::vector<double> y = random_sample(rng, 10);
    const std::vector<double> z = random_sample(rng, 10);
    const double rxy = oracle_spearman_rho(x, y);
    const double rxz = oracle_spearman_rho(x, z);
    const double ryz = oracle_spearman_rho(y, z);
    const double expected =
        (rxy - rxz * ryz) / std::sqrt((1.0 - rxz * rxz) * (1.0 - ryz * ryz));
    const st::TestResult r = st::partial_spearman(x, y, z);
    REQUIRE_FALSE(r.degenerate);
    CHECK(r.statistic == doctest::Approx(expected).epsilon(1e-10));
  }
}

// ---- wilcoxon signed rank -----------------------------------------------------------

TEST_CASE("all-positive differences at n=3 give V=6 and two-sided p=0.25") {
  const std::vector<double> sample = {1.0, 2.0, 3.0};
  const st::TestResult r = st::wilcoxon_signed_rank(sample, 0.0);
  CHECK(r.statistic == doctest::Approx(6.0));
  CHECK(*r.p_value == doctest::Approx(0.25).epsilon(1e-12));
  // one-sided basis: 1/8
  const st::TestResult greater = st::wilcoxon_signed_rank(sample, 0.0, st::Alternative::greater);
  CHECK(*greater.p_value == doctest::Approx(0.125).epsilon(1e-12));
}

TEST_CASE("a symmetric sample around mu0 is far from significance") {
  const std::vector<double> sample = {-3, -2, -1, 1, 2, 3};
  const st::TestResult r = st::wilcoxon_signed_rank(sample, 0.0);
  CHECK(r.statistic == doctest::Approx(10.5));  // n(n+1)/4
  CHECK(*r.p_value > 0.5);
}

TEST_CASE("exact zeros are dropped before ranking") {
  const std::vector<double> sample = {5.0, 5.0, 6.0, 7.0};
  const st::TestResult r = st::wilcoxon_signed_rank(sample, 5.0);
  CHECK(r.n == 2);
  CHECK(r.statistic == doctest::Approx(3.0));  // both positive, ranks 1+2
}

TEST_CASE("an all-zero difference vector is a no-information error") {
  const std::vector<double> sample = {4.0, 4.0, 4.0};
  CHECK_THROWS_AS(st::wilcoxon_signed_rank(sample, 4.0), Error);
}

TEST_CASE("exact signed-rank p matches the enumeration oracle on random fixtures") {
  Rng rng(11);
  for (int trial = 0; trial < 120; ++trial) {
    const int n = 4 + rng.uniform_int(7);  // 4..10, exact branch
    std::vector<double> sample = random_sample(rng, n);
    if (rng.uniform_int(3) == 0) sample[0] = sample[1];  // provoke ties sometimes
    const st::TestResult r = st::wilcoxon_signed_rank(sample, 0.0);
    REQUIRE(r.p_value.has_value());
    CHECK(*r.p_value == doctest::Approx(oracle_signed_rank_p(sample)).epsilon(1e-9));
    CHECK(*r.p_value >= 0.0);
    CHECK(*r.p_value <= 1.0);
    CHECK(*r.effect_size_r >= 0.0);
    CHECK(*r.effect_size_r <= 1.0);
  }
}

TEST_CASE("signed-rank approximation agrees with exact enumeration at the crossover") {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const std::vector<double> sample = random_sample(rng, 13);  // approximation branch
    const st::TestResult r = st::wilcoxon_signed_rank(sample, 0.0);
    const double exact = oracle_signed_rank_p(sample);  // 2^13 enumeration
    CHECK(std::fabs(*r.p_value - exact) < 0.02);
  }
}

// ---- wilcoxon rank sum ---------------------------------------------------------------

TEST_CASE("disjoint groups reach the minimal rank sum with the enumerated p") {
  const std::vector<double> a = {1, 2, 3};
  const std::vector<double> b = {10, 11, 12, 13};
  const st::TestResult r = st::wilcoxon_rank_sum(a, b);
  CHECK(r.statistic == doctest::Approx(6.0));  // ranks 1+2+3
  CHECK(*r.p_value == doctest::Approx(oracle_rank_sum_p(a, b)).epsilon(1e-12));
  CHECK(*r.p_value == doctest::Approx(2.0 / 35.0).epsilon(1e-9));  // 2/C(7,3)
}

TEST_CASE("exact rank-sum p matches the enumeration oracle on random fixtures") {
  Rng rng(17);
  for (int trial = 0; trial < 120; ++trial) {
    const int na = 2 + rng.uniform_int(3);
    const int nb = 2 + rng.uniform_int(3);
    std::vector<double> a = random_sample(rng, na);
    std::vector<double> b = random_sample(rng, nb);
    if (rng.uniform_int(3) == 0) b[0] = a[0];  // cross-group tie
    const st::TestResult r = st::wilcoxon_rank_sum(a, b);
    CHECK(*r.p_value == doctest::Approx(oracle_rank_sum_p(a, b)).epsilon(1e-9));
    CHECK(*r.effect_size_r >= 0.0);
    CHECK(*r.effect_size_r <= 1.0);
  }
}

TEST_CASE("rank-sum approximation agrees with exact enumeration at the crossover") {
  Rng rng(19);
  for (int trial = 0; trial < 30; ++trial) {
    const std::vector<double> a = random_sample(rng, 6);
    const std::vector<double> b = random_sample(rng, 7);  // total 13: approximation
    const st::TestResult r = st::wilcoxon_rank_sum(a, b);
    CHECK(std::fabs(*r.p_value - oracle_rank_sum_p(a, b)) < 0.02);
  }
}

TEST_CASE("rank sum requires non-empty groups") {
  CHECK_THROWS_AS(st::wilcoxon_rank_sum(std::vector<double>{}, std::vector<double>{1.0}), Error);
}

// ---- kruskal wallis --------------------------------------------------------------------

TEST_CASE("identical groups give H = 0 and p = 1") {
  const st::TestResult r = st::kruskal_wallis({{2, 2}, {2, 2}, {2, 2}});
  CHECK(r.statistic == 0.0);
  CHECK(*r.p_value == 1.0);
}

TEST_CASE("the three-group hand fixture gives H = 32/7") {
  const st::TestResult r = st::kruskal_wallis({{1, 2}, {3, 4}, {5, 6}});
  CHECK(r.statistic == doctest::Approx(32.0 / 7.0).epsilon(1e-12));
  CHECK(*r.p_value == doctest::Approx(st::chi_square_sf(32.0 / 7.0, 2)).epsilon(1e-12));
}

TEST_CASE("two-group kruskal-wallis approaches the squared rank-sum z") {
  Rng rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> a = random_sample(rng, 60);
    std::vector<double> b = random_sample(rng, 60, -4.0, 6.0);
    const st::TestResult kw = st::kruskal_wallis({a, b});
    const st::TestResult rs = st::wilcoxon_rank_sum(a, b);
    const double z = *rs.effect_size_r * std::sqrt(120.0);
    if (kw.statistic > 0.5) {  // relative comparison needs signal
      CHECK(kw.statistic == doctest::Approx(z * z).epsilon(0.05));
    }
  }
}

TEST_CASE("kruskal-wallis is invariant under relabeling and within-group permutation") {
  Rng rng(29);
  std::vector<std::vector<double>> groups = {random_sample(rng, 8), random_sample(rng, 5),
                                             random_sample(rng, 11)};
  const double base = st::kruskal_wallis(groups).statistic;
  std::swap(groups[0], groups[2]);
  rng.shuffle(groups[1]);
  CHECK(st::kruskal_wallis(groups).statistic == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("kruskal-wallis rejects degenerate group structures") {
  CHECK_THROWS_AS(st::kruskal_wallis({{1.0, 2.0}}), Error);
  CHECK_THROWS_AS(st::kruskal_wallis({{1.0}, {}}), Error);
}

// ---- bonferroni ---------------------------------------------------------------------------

TEST_CASE("bonferroni adjustment") {
  CHECK(st::bonferroni(std::vector<double>{0.01}) == std::vector<double>{0.01});
  const auto two = st::bonferroni(std::vector<double>{0.02, 0.5});
  CHECK(two[0] == doctest::Approx(0.04));
  CHECK(two[1] == doctest::Approx(1.0));
  const auto clamped = st::bonferroni(std::vector<double>{0.9, 0.9, 0.9});
  for (double p : clamped) CHECK(p == 1.0);
  CHECK_THROWS_AS(st::bonferroni(std::vector<double>{1.5}), Error);
}

// ---- hodges lehmann --------------------------------------------------------------------------

TEST_CASE("walsh averages of {1,3} give estimate 2 with the full-range fallback") {
  const st::HodgesLehmann hl = st::hodges_lehmann_ci(std::vector<double>{1.0, 3.0});
  CHECK(hl.estimate == doctest::Approx(2.0));
  CHECK(hl.lo == doctest::Approx(1.0));
  CHECK(hl.hi == doctest::Approx(3.0));
  CHECK(hl.full_range);  // n=2 cannot support 95% coverage
}

TEST_CASE("a constant sample has a zero-width interval") {
  const st::HodgesLehmann hl = st::hodges_lehmann_ci(std::vector<double>{4.0, 4.0, 4.0, 4.0});
  CHECK(hl.estimate == 4.0);
  CHECK(hl.lo == 4.0);
  CHECK(hl.hi == 4.0);
}

TEST_CASE("n=8 interval endpoints match the exhaustive signed-rank oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> sample = random_sample(rng, 8);
    const st::HodgesLehmann hl = st::hodges_lehmann_ci(sample, 0.05);

    // oracle: all Walsh averages + the exact signed-rank null from 2^8 subsets
    std::vector<double> walsh;
    for (std::size_t i = 0; i < sample.size(); ++i) {
      for (std::size_t j = i; j < sample.size(); ++j) {
        walsh.push_back(0.5 * (sample[i] + sample[j]));
      }
    }
    std::sort(walsh.begin(), walsh.end());
    std::vector<int> counts(37, 0);  // sums of subsets of {1..8} reach 36
    for (int mask = 0; mask < 256; ++mask) {
      int sum = 0;
      for (int i = 0; i < 8; ++i) {
        if (mask & (1 << i)) sum += i + 1;
      }
      counts[static_cast<std::size_t>(sum)]++;
    }
    int c = -1;
    double cum = 0.0;
    for (int v = 0; v <= 36; ++v) {
      cum += counts[static_cast<std::size_t>(v)] / 256.0;
      if (cum <= 0.025) {
        c = v;
      } else {
        break;
      }
    }
    REQUIRE(c == 3);  // P(V<=3) = 5/256, P(V<=4) = 7/256
    CHECK(hl.estimate == doctest::Approx(0.5 * (walsh[17] + walsh[18])).epsilon(1e-12));
    CHECK(hl.lo == doctest::Approx(walsh[static_cast<std::size_t>(c)]).epsilon(1e-12));
    CHECK(hl.hi == doctest::Approx(walsh[walsh.size() - 1 - static_cast<std::size_t>(c)])
                       .epsilon(1e-12));
  }
}

TEST_CASE("the hodges-lehmann estimate is translation equivariant") {
  Rng rng(37);
  const std::vector<double> sample = random_sample(rng, 9);
  std::vector<double> shifted;
  for (double v : sample) shifted.push_back(v + 13.25);
  const st::HodgesLehmann a = st::hodges_lehmann_ci(sample);
  const st::HodgesLehmann b = st::hodges_lehmann_ci(shifted);
  CHECK(b.estimate == doctest::Approx(a.estimate + 13.25).epsilon(1e-12));
  CHECK(b.lo == doctest::Approx(a.lo + 13.25).epsilon(1e-12));
  CHECK(b.hi == doctest::Approx(a.hi + 13.25).epsilon(1e-12));
}

// ---- tertiles -------------------------------------------------------------------------------

TEST_CASE("ratings 1..9 cut at 3.64 and 6.28 with boundary-inclusive lows") {
  const std::vector<double> ratings = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  const st::TertileSplit split = st::tertile_split(ratings);
  CHECK(split.p33 == doctest::Approx(3.64).epsilon(1e-12));
  CHECK(split.p66 == doctest::Approx(6.28).epsilon(1e-12));
  for (int i = 0; i < 3; ++i) CHECK(split.labels[static_cast<std::size_t>(i)] == st::TertileLabel::low);
  for (int i = 3; i < 6; ++i) {
    CHECK(split.labels[static_cast<std::size_t>(i)] == st::TertileLabel::medium);
  }
  for (int i = 6; i < 9; ++i) CHECK(split.labels[static_cast<std::size_t>(i)] == st::TertileLabel::high);
}

TEST_CASE("equal ratings all label low and flag the split degenerate") {
  const std::vector<double> ratings = {4, 4, 4, 4, 4};
  const st::TertileSplit split = st::tertile_split(ratings);
  CHECK(split.degenerate);
  for (auto label : split.labels) CHECK(label == st::TertileLabel::low);
}

TEST_CASE("a 50/50 two-value split puts the lower value low and the upper medium") {
  const std::vector<double> ratings = {1, 1, 1, 2, 2, 2};
  const st::TertileSplit split = st::tertile_split(ratings);
  CHECK(split.p33 == doctest::Approx(1.0));
  CHECK(split.p66 == doctest::Approx(2.0));
  for (int i = 0; i < 3; ++i) CHECK(split.labels[static_cast<std::size_t>(i)] == st::TertileLabel::low);
  for (int i = 3; i < 6; ++i) {
    CHECK(split.labels[static_cast<std::size_t>(i)] == st::TertileLabel::medium);
  }
}

TEST_CASE("tertile labels partition the items") {
  Rng rng(41);
  const std::vector<double> ratings = random_sample(rng, 30, 1.0, 7.0);
  const st::TertileSplit split = st::tertile_split(ratings);
  CHECK(split.labels.size() == ratings.size());
  CHECK(split.p33 <= split.p66);
  for (std::size_t i = 0; i < ratings.size(); ++i) {
    if (ratings[i] <= split.p33) {
      CHECK(split.labels[i] == st::TertileLabel::low);
    } else if (ratings[i] > split.p66) {
      CHECK(split.labels[i] == st::TertileLabel::high);
    } else {
      CHECK(split.labels[i] == st::TertileLabel::medium);
    }
  }
}
