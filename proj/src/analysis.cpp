#include "upf/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "upf/errors.hpp"
#include "upf/features.hpp"

namespace upf {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw InvariantError("incomplete beta continued fraction did not converge");
}

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance_of(std::span<const double> v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvariantError("incomplete beta needs a, b > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw InvariantError("incomplete beta needs x in [0,1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed_p(double t, double df) {
  if (std::isnan(t) || !(df > 0.0)) throw InvariantError("invalid t statistic or df");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return std::clamp(regularized_incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvariantError("t-test needs at least 2 values per sample");
  TTestResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  r.mean_a = mean_of(a);
  r.mean_b = mean_of(b);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double sa = variance_of(a, r.mean_a) / na;
  const double sb = variance_of(b, r.mean_b) / nb;
  const double se2 = sa + sb;
  if (se2 == 0.0) {
    r.degrees_of_freedom = na + nb - 2.0;
    if (r.mean_a == r.mean_b) {
      r.t_statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.t_statistic = r.mean_a > r.mean_b ? std::numeric_limits<double>::infinity()
                                          : -std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.t_statistic = (r.mean_a - r.mean_b) / std::sqrt(se2);
  r.degrees_of_freedom = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  r.p_value = student_t_two_tailed_p(r.t_statistic, r.degrees_of_freedom);
  return r;
}

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvariantError("quantile of an empty sample");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

QuartileSummary quartile_summary(std::span<const double> sample) {
  if (sample.empty()) throw InvariantError("quartile summary of an empty sample");
  std::vector<double> s(sample.begin(), sample.end());
  std::sort(s.begin(), s.end());
  return {s.front(), quantile_sorted(s, 0.25), quantile_sorted(s, 0.5), quantile_sorted(s, 0.75),
          s.back()};
}

ComparisonReport compare_groups(const GroupSelection& selection,
                                const std::map<std::string, std::vector<double>>& vectors,
                                const Manifest& manifest, double alpha) {
  if (selection.u_fake.size() < 2 || selection.u_real.size() < 2) {
    throw InvariantError("each group needs at least 2 users for comparison");
  }
  auto rows_of = [&](const std::set<std::string>& ids) {
    std::vector<const std::vector<double>*> rows;
    for (const auto& id : ids) {
      auto it = vectors.find(id);
      if (it == vectors.end()) throw InvariantError("no feature vector for user " + id);
      if (it->second.size() != manifest.size()) {
        throw InvariantError("feature vector of " + id + " does not match the manifest");
      }
      rows.push_back(&it->second);
    }
    return rows;
  };
  const auto fake_rows = rows_of(selection.u_fake);
  const auto real_rows = rows_of(selection.u_real);

  ComparisonReport report;
  report.alpha = alpha;
  report.n_fake = fake_rows.size();
  report.n_real = real_rows.size();
  for (std::size_t j = 0; j < manifest.size(); ++j) {
    FeatureComparison fc;
    fc.feature = manifest[j].name;
    fc.group = manifest[j].group;
    std::vector<double> fa;
    std::vector<double> ra;
    for (const auto* r : fake_rows) fa.push_back((*r)[j]);
    for (const auto* r : real_rows) ra.push_back((*r)[j]);

    if (fc.feature == "verified") {
      for (double v : fa) ++fc.counts_fake[v != 0.0 ? "verified" : "unverified"];
      for (double v : ra) ++fc.counts_real[v != 0.0 ? "verified" : "unverified"];
    } else {
      fc.ttest = welch_t_test(fa, ra);
      fc.quartiles_fake = quartile_summary(fa);
      fc.quartiles_real = quartile_summary(ra);
      fc.significant = fc.ttest->p_value < alpha;
      ++report.tests_run;
      if (fc.significant) ++report.significant_count;
      if (fc.feature == "bias_score") {
        for (double v : fa) ++fc.counts_fake[std::string(to_string(bias_category(v)))];
        for (double v : ra) ++fc.counts_real[std::string(to_string(bias_category(v)))];
      }
    }
    report.features.push_back(std::move(fc));
  }
  return report;
}

}  // namespace upf
