#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "upf/dataset.hpp"

namespace upf::ml {

enum class Algorithm { DecisionTree, RandomForest, LogReg, NaiveBayes, LinearSVM, AdaBoost };

// CLI short names: dt, rf, lr, nb, svm, ada.
std::string_view short_name(Algorithm a);
std::string_view display_name(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct Hyperparameters {
  // Trees: 0 means unlimited depth.
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  std::size_t forest_trees = 100;
  // Features examined per split in a forest; 0 means floor(sqrt(d)).
  std::size_t forest_max_features = 0;
  double logreg_l2 = 1e-4;
  double logreg_tolerance = 1e-6;
  std::size_t logreg_max_epochs = 10000;
  double nb_variance_floor = 1e-9;
  double svm_l2 = 1e-3;
  std::size_t svm_epochs = 100;
  std::size_t boost_rounds = 50;
};

// Binary CART node. Leaves have feature == -1.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int prediction = 0;
  double weight = 0.0;    // total sample weight reaching the node
  double impurity = 0.0;  // Gini
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  int predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  std::size_t depth() const;
};

// Gini impurity 1 - sum p_c^2 from (weighted) class totals.
double gini_impurity(double w0, double w1);

struct TreeOptions {
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  std::size_t max_features = 0;  // 0: all features
  std::uint64_t seed = 0;        // feature subsampling stream
};

// Grows a CART tree by exhaustive best-split search. `rows` selects (possibly
// repeated) rows of X; `weights` is parallel to `rows` (empty = all ones).
// Ties between splits prefer the lower feature index, then the lower threshold.
Tree grow_tree(const Eigen::MatrixXd& X, std::span<const int> y, std::span<const std::size_t> rows,
               std::span<const double> weights, const TreeOptions& options);

struct Standardizer {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd scale;

  static Standardizer fit(const Eigen::MatrixXd& X);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const;
};

struct TreeModel {
  Tree tree;
};
struct ForestModel {
  std::vector<Tree> trees;
};
struct LinearModel {
  Standardizer standardizer;
  Eigen::VectorXd weights;
  double bias = 0.0;
  std::size_t epochs_run = 0;
};
struct GaussianNbModel {
  std::array<double, 2> log_prior{};
  std::array<Eigen::VectorXd, 2> mean;
  std::array<Eigen::VectorXd, 2> variance;
};
struct BoostModel {
  std::vector<Tree> stumps;
  std::vector<double> alphas;
};

class TrainedModel {
 public:
  using Parameters = std::variant<TreeModel, ForestModel, LinearModel, GaussianNbModel, BoostModel>;

  TrainedModel(Algorithm algorithm, Manifest manifest, Parameters params)
      : algorithm_(algorithm), manifest_(std::move(manifest)), params_(std::move(params)) {}

  Algorithm algorithm() const { return algorithm_; }
  const Manifest& manifest() const { return manifest_; }
  const Parameters& parameters() const { return params_; }

  std::vector<int> predict(const Eigen::MatrixXd& X) const;

 private:
  Algorithm algorithm_;
  Manifest manifest_;
  Parameters params_;
};

// Deterministic in (algorithm, dataset, hyperparameters, seed).
TrainedModel train(Algorithm algorithm, const Dataset& data, const Hyperparameters& hp,
                   std::uint64_t seed);

struct EvalResult {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  // Set when a zero denominator forced the metric to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

// Positive class is 1 (fake).
EvalResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted);
EvalResult evaluate(const TrainedModel& model, const Dataset& test);

struct HoldoutSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::uint64_t sub_seed = 0;

  bool operator==(const HoldoutSplit&) const = default;
};

struct HoldoutOptions {
  double train_fraction = 0.8;
  std::size_t repetitions = 5;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kMaxConsecutiveRedraws = 20;

// Uniform random (unstratified) splits. A split whose train part holds a
// single class is re-drawn with the next sub-seed.
std::vector<HoldoutSplit> make_holdout_splits(std::span<const int> y, const HoldoutOptions& options,
                                              std::size_t* redraws = nullptr);

struct HoldoutReport {
  Algorithm algorithm = Algorithm::RandomForest;
  EvalResult mean;
  std::vector<EvalResult> runs;
  std::vector<HoldoutSplit> splits;
  std::size_t redraws = 0;
};

// Full-row dataset whose split-dependent preprocessing (the image PCA) was fit
// on `train_rows` only.
using SplitFeaturizer = std::function<Dataset(std::span<const std::size_t> train_rows)>;

EvalResult mean_of(std::span<const EvalResult> runs);

HoldoutReport repeated_holdout(const Dataset& data, Algorithm algorithm, const Hyperparameters& hp,
                               const HoldoutOptions& options);
HoldoutReport repeated_holdout(const SplitFeaturizer& featurize, std::span<const int> y,
                               Algorithm algorithm, const Hyperparameters& hp,
                               const HoldoutOptions& options);

struct ImportanceReport {
  Manifest manifest;
  std::vector<double> importance;   // manifest order, sums to 1
  std::vector<std::size_t> ranking;  // indices by descending importance
};

// Mean decrease in Gini impurity summed over every tree, normalized to 1.
ImportanceReport gini_importance(const TrainedModel& forest);

enum class AblationGroup { All, Explicit, Implicit };
std::string_view to_string(AblationGroup g);

struct AblationReport {
  std::map<AblationGroup, HoldoutReport> groups;
};

// Paired comparison: every group runs on the same splits.
AblationReport feature_group_ablation(const Dataset& data, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options);
AblationReport feature_group_ablation(const SplitFeaturizer& featurize, std::span<const int> y,
                                      const Manifest& manifest, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options);

// CSV "news_id,<feature>,..." with a header row; columns tagged External.
Dataset load_external_matrix(const std::filesystem::path& path, std::span<const std::string> row_ids,
                             std::span<const int> labels);

struct BaselineReport {
  HoldoutReport external;
  HoldoutReport concatenated;  // external | UPF
  std::size_t external_columns = 0;
  std::size_t concatenated_columns = 0;
};

BaselineReport external_baseline_eval(const std::filesystem::path& matrix_path,
                                      const SplitFeaturizer& upf, std::span<const std::string> row_ids,
                                      std::span<const int> labels, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options);

}  // namespace upf::ml
