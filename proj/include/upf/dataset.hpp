#pragma once

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace upf {

enum class FeatureGroup { Explicit, Implicit, External };

std::string_view to_string(FeatureGroup g);
FeatureGroup parse_feature_group(std::string_view text);

struct FeatureSpec {
  std::string name;
  FeatureGroup group = FeatureGroup::Explicit;

  bool operator==(const FeatureSpec&) const = default;
};

using Manifest = std::vector<FeatureSpec>;

std::vector<std::string> manifest_names(const Manifest& manifest);

// Rows are news items, y is 1 for fake and 0 for real.
struct Dataset {
  Eigen::MatrixXd X;
  std::vector<int> y;
  Manifest manifest;
  std::vector<std::string> row_ids;

  std::size_t rows() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(X.cols()); }

  // Shape, label and finiteness checks. Throws InvariantError.
  void validate() const;

  Dataset select_rows(std::span<const std::size_t> idx) const;
  Dataset select_columns(std::span<const std::size_t> idx) const;
};

// Column-wise concatenation of two datasets over the same rows.
Dataset concat_columns(const Dataset& a, const Dataset& b);

}  // namespace upf
