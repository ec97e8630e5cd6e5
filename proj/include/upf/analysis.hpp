#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "upf/dataset.hpp"
#include "upf/grouping.hpp"

namespace upf {

struct TTestResult {
  double t_statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
};

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// Two-tailed p-value of a Student t statistic with `df` degrees of freedom.
double student_t_two_tailed_p(double t, double df);

// Welch's unequal-variance two-sample t-test. Needs at least two values per
// sample. Two constant samples with equal means give t = 0, p = 1.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct QuartileSummary {
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

// Linear interpolation between order statistics: h = (n - 1) p.
double quantile_sorted(std::span<const double> sorted, double p);
QuartileSummary quartile_summary(std::span<const double> sample);

struct FeatureComparison {
  std::string feature;
  FeatureGroup group = FeatureGroup::Explicit;
  std::optional<TTestResult> ttest;
  std::optional<QuartileSummary> quartiles_fake;
  std::optional<QuartileSummary> quartiles_real;
  // Category -> user count, for the verified flag and the bias category.
  std::map<std::string, std::size_t> counts_fake;
  std::map<std::string, std::size_t> counts_real;
  bool significant = false;
};

struct ComparisonReport {
  double alpha = 0.05;
  std::size_t n_fake = 0;
  std::size_t n_real = 0;
  std::size_t tests_run = 0;
  std::size_t significant_count = 0;
  std::vector<FeatureComparison> features;  // manifest order
};

// `vectors` maps user_id to a value row laid out per `manifest`.
ComparisonReport compare_groups(const GroupSelection& selection,
                                const std::map<std::string, std::vector<double>>& vectors,
                                const Manifest& manifest, double alpha = 0.05);

}  // namespace upf
