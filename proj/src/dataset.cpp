#include "upf/dataset.hpp"

#include "upf/errors.hpp"

namespace upf {

std::string_view to_string(FeatureGroup g) {
  switch (g) {
    case FeatureGroup::Explicit: return "explicit";
    case FeatureGroup::Implicit: return "implicit";
    case FeatureGroup::External: return "external";
  }
  return "?";
}

FeatureGroup parse_feature_group(std::string_view text) {
  if (text == "explicit") return FeatureGroup::Explicit;
  if (text == "implicit") return FeatureGroup::Implicit;
  if (text == "external") return FeatureGroup::External;
  throw DataError("unknown feature group '" + std::string(text) + "'");
}

std::vector<std::string> manifest_names(const Manifest& manifest) {
  std::vector<std::string> names;
  names.reserve(manifest.size());
  for (const auto& f : manifest) names.push_back(f.name);
  return names;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw InvariantError("dataset has " + std::to_string(X.rows()) + " rows but " +
                         std::to_string(y.size()) + " labels");
  }
  if (static_cast<std::size_t>(X.cols()) != manifest.size()) {
    throw InvariantError("dataset width does not match its manifest");
  }
  if (!row_ids.empty() && row_ids.size() != y.size()) {
    throw InvariantError("dataset row ids do not match its rows");
  }
  for (int label : y) {
    if (label != 0 && label != 1) throw InvariantError("labels must be 0 or 1");
  }
  if (!X.allFinite()) throw InvariantError("dataset contains non-finite values");
}

Dataset Dataset::select_rows(std::span<const std::size_t> idx) const {
  Dataset out;
  out.manifest = manifest;
  out.X.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  out.y.reserve(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
    out.y.push_back(y[idx[i]]);
    if (!row_ids.empty()) out.row_ids.push_back(row_ids[idx[i]]);
  }
  return out;
}

Dataset Dataset::select_columns(std::span<const std::size_t> idx) const {
  Dataset out;
  out.y = y;
  out.row_ids = row_ids;
  out.X.resize(X.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.X.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(idx[j]));
    out.manifest.push_back(manifest[idx[j]]);
  }
  return out;
}

Dataset concat_columns(const Dataset& a, const Dataset& b) {
  if (a.rows() != b.rows() || a.y != b.y) {
    throw InvariantError("cannot concatenate datasets with different rows");
  }
  Dataset out;
  out.y = a.y;
  out.row_ids = a.row_ids;
  out.X.resize(a.X.rows(), a.X.cols() + b.X.cols());
  out.X << a.X, b.X;
  out.manifest = a.manifest;
  out.manifest.insert(out.manifest.end(), b.manifest.begin(), b.manifest.end());
  return out;
}

}  // namespace upf
