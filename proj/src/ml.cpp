#include "upf/ml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/rng.hpp"

namespace upf::ml {

namespace {

constexpr Algorithm kAlgorithms[] = {Algorithm::DecisionTree, Algorithm::RandomForest,
                                     Algorithm::LogReg,       Algorithm::NaiveBayes,
                                     Algorithm::LinearSVM,    Algorithm::AdaBoost};

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_both_classes(const Dataset& data) {
  const auto ones = std::count(data.y.begin(), data.y.end(), 1);
  if (ones == 0 || static_cast<std::size_t>(ones) == data.y.size()) {
    throw InvariantError("training labels contain a single class");
  }
}

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return rows;
}

// Largest eigenvalue of A^T A / n for A = [Z, 1], by power iteration.
double gram_spectral_radius(const Eigen::MatrixXd& Z) {
  const auto n = static_cast<double>(Z.rows());
  Eigen::VectorXd v = Eigen::VectorXd::Ones(Z.cols() + 1);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd av = Z * v.head(Z.cols()) +
                               Eigen::VectorXd::Constant(Z.rows(), v(Z.cols()));
    Eigen::VectorXd w(Z.cols() + 1);
    w.head(Z.cols()) = Z.transpose() * av / n;
    w(Z.cols()) = av.sum() / n;
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    if (std::abs(next - lambda) <= 1e-10 * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return lambda;
}

LinearModel train_logreg(const Dataset& data, const Hyperparameters& hp) {
  LinearModel m;
  m.standardizer = Standardizer::fit(data.X);
  const Eigen::MatrixXd Z = m.standardizer.apply(data.X);
  const auto n = static_cast<double>(Z.rows());
  Eigen::VectorXd y(Z.rows());
  for (Eigen::Index i = 0; i < Z.rows(); ++i) y(i) = data.y[static_cast<std::size_t>(i)];
  const double lipschitz = 0.25 * gram_spectral_radius(Z) * 1.01 + hp.logreg_l2;
  const double lr = 1.0 / std::max(lipschitz, 1e-12);
  m.weights = Eigen::VectorXd::Zero(Z.cols());
  m.bias = 0.0;
  for (std::size_t epoch = 0; epoch < hp.logreg_max_epochs; ++epoch) {
    Eigen::VectorXd residual = (Z * m.weights).array() + m.bias;
    for (Eigen::Index i = 0; i < residual.size(); ++i) residual(i) = sigmoid(residual(i)) - y(i);
    const Eigen::VectorXd gw = Z.transpose() * residual / n + hp.logreg_l2 * m.weights;
    const double gb = residual.sum() / n;
    m.epochs_run = epoch;
    if (std::sqrt(gw.squaredNorm() + gb * gb) <= hp.logreg_tolerance) break;
    m.weights -= lr * gw;
    m.bias -= lr * gb;
    m.epochs_run = epoch + 1;
  }
  return m;
}

// Pegasos-style stochastic subgradient descent on the L2-regularized hinge
// loss; the bias is a constant input column. Returns the average of the
// iterates over the second half of training.
LinearModel train_svm(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed) {
  LinearModel m;
  m.standardizer = Standardizer::fit(data.X);
  const Eigen::MatrixXd Z = m.standardizer.apply(data.X);
  const Eigen::Index d = Z.cols();
  const double lambda = hp.svm_l2;
  if (!(lambda > 0.0)) throw ConfigError("svm_l2 must be positive");
  const double radius = 1.0 / std::sqrt(lambda);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd avg = Eigen::VectorXd::Zero(d + 1);
  std::size_t averaged = 0;
  Rng rng(seed);
  std::vector<std::size_t> order = all_rows(static_cast<std::size_t>(Z.rows()));
  std::uint64_t t = 0;
  const std::size_t epochs = std::max<std::size_t>(hp.svm_epochs, 1);
  Eigen::VectorXd a(d + 1);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t i : order) {
      ++t;
      const double eta = 1.0 / (lambda * static_cast<double>(t));
      a.head(d) = Z.row(static_cast<Eigen::Index>(i)).transpose();
      a(d) = 1.0;
      const double yi = data.y[i] == 1 ? 1.0 : -1.0;
      const double margin = yi * a.dot(w);
      w *= 1.0 - eta * lambda;
      if (margin < 1.0) w += eta * yi * a;
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      if (2 * epoch >= epochs - 1) {
        avg += w;
        ++averaged;
      }
    }
  }
  avg /= static_cast<double>(std::max<std::size_t>(averaged, 1));
  m.weights = avg.head(d);
  m.bias = avg(d);
  m.epochs_run = epochs;
  return m;
}

GaussianNbModel train_nb(const Dataset& data, const Hyperparameters& hp) {
  GaussianNbModel m;
  const Eigen::Index d = data.X.cols();
  for (int c = 0; c < 2; ++c) {
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < data.y.size(); ++i) {
      if (data.y[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
    }
    const auto nc = static_cast<double>(rows.size());
    m.log_prior[static_cast<std::size_t>(c)] = std::log(nc / static_cast<double>(data.y.size()));
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (auto r : rows) mean += data.X.row(r).transpose();
    mean /= nc;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
    for (auto r : rows) var += (data.X.row(r).transpose() - mean).array().square().matrix();
    var /= nc;
    for (Eigen::Index j = 0; j < d; ++j) var(j) = std::max(var(j), hp.nb_variance_floor);
    m.mean[static_cast<std::size_t>(c)] = mean;
    m.variance[static_cast<std::size_t>(c)] = var;
  }
  return m;
}

BoostModel train_boost(const Dataset& data, const Hyperparameters& hp) {
  BoostModel m;
  const std::size_t n = data.rows();
  const std::vector<std::size_t> rows = all_rows(n);
  std::vector<double> w(n, 1.0 / static_cast<double>(n));
  TreeOptions stump;
  stump.max_depth = 1;
  for (std::size_t round = 0; round < hp.boost_rounds; ++round) {
    Tree tree = grow_tree(data.X, data.y, rows, w, stump);
    double err = 0.0;
    double total = 0.0;
    std::vector<bool> miss(n);
    for (std::size_t i = 0; i < n; ++i) {
      miss[i] = tree.predict(data.X.row(static_cast<Eigen::Index>(i))) != data.y[i];
      if (miss[i]) err += w[i];
      total += w[i];
    }
    err /= total;
    if (err <= 0.0) {
      m.stumps.push_back(std::move(tree));
      m.alphas.push_back(1.0);
      break;
    }
    if (err >= 0.5) {
      if (m.stumps.empty()) {
        m.stumps.push_back(std::move(tree));
        m.alphas.push_back(1.0);
      }
      break;
    }
    const double alpha = std::log((1.0 - err) / err);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (miss[i]) w[i] *= std::exp(alpha);
      sum += w[i];
    }
    for (auto& wi : w) wi /= sum;
    m.stumps.push_back(std::move(tree));
    m.alphas.push_back(alpha);
  }
  return m;
}

ForestModel train_forest(const Dataset& data, const Hyperparameters& hp, std::uint64_t seed) {
  ForestModel m;
  const std::size_t n = data.rows();
  TreeOptions options;
  options.max_depth = hp.max_depth;
  options.min_samples_leaf = hp.min_samples_leaf;
  options.max_features =
      hp.forest_max_features != 0
          ? hp.forest_max_features
          : std::max<std::size_t>(1, static_cast<std::size_t>(
                                         std::floor(std::sqrt(static_cast<double>(data.cols())))));
  m.trees.reserve(hp.forest_trees);
  std::vector<std::size_t> bootstrap(n);
  for (std::size_t t = 0; t < hp.forest_trees; ++t) {
    Rng rng(derive_seed(seed, 2 * t));
    for (auto& r : bootstrap) r = rng.uniform_index(n);
    options.seed = derive_seed(seed, 2 * t + 1);
    m.trees.push_back(grow_tree(data.X, data.y, bootstrap, {}, options));
  }
  return m;
}

std::vector<std::size_t> columns_of(const Manifest& manifest, AblationGroup group) {
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < manifest.size(); ++j) {
    const bool keep = group == AblationGroup::All ||
                      (group == AblationGroup::Explicit &&
                       manifest[j].group == FeatureGroup::Explicit) ||
                      (group == AblationGroup::Implicit &&
                       manifest[j].group == FeatureGroup::Implicit);
    if (keep) cols.push_back(j);
  }
  return cols;
}

EvalResult run_split(const Dataset& full, const HoldoutSplit& split, Algorithm algorithm,
                     const Hyperparameters& hp) {
  const Dataset train_set = full.select_rows(split.train);
  const Dataset test_set = full.select_rows(split.test);
  const TrainedModel model = train(algorithm, train_set, hp, derive_seed(split.sub_seed, 1));
  return evaluate(model, test_set);
}

Dataset checked_featurize(const SplitFeaturizer& featurize, const HoldoutSplit& split,
                          std::span<const int> y) {
  Dataset ds = featurize(split.train);
  ds.validate();
  if (!std::equal(ds.y.begin(), ds.y.end(), y.begin(), y.end())) {
    throw InvariantError("featurizer returned rows that do not match the labels");
  }
  return ds;
}

}  // namespace

std::string_view short_name(Algorithm a) {
  switch (a) {
    case Algorithm::DecisionTree: return "dt";
    case Algorithm::RandomForest: return "rf";
    case Algorithm::LogReg: return "lr";
    case Algorithm::NaiveBayes: return "nb";
    case Algorithm::LinearSVM: return "svm";
    case Algorithm::AdaBoost: return "ada";
  }
  return "?";
}

std::string_view display_name(Algorithm a) {
  switch (a) {
    case Algorithm::DecisionTree: return "DT";
    case Algorithm::RandomForest: return "RF";
    case Algorithm::LogReg: return "LR";
    case Algorithm::NaiveBayes: return "NB";
    case Algorithm::LinearSVM: return "SVM";
    case Algorithm::AdaBoost: return "AdaBoost";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  for (auto a : kAlgorithms) {
    if (short_name(a) == text) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(text) + "' (expected rf|svm|dt|lr|nb|ada)");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& X) {
  Standardizer s;
  const auto n = static_cast<double>(X.rows());
  s.mean = X.colwise().mean();
  s.scale.resize(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
    s.scale(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& X) const {
  return (X.rowwise() - mean).array().rowwise() / scale.array();
}

std::vector<int> TrainedModel::predict(const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(X.cols()) != manifest_.size()) {
    throw InvariantError("input width " + std::to_string(X.cols()) +
                         " does not match the trained manifest (" +
                         std::to_string(manifest_.size()) + ")");
  }
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, TreeModel>) {
          for (Eigen::Index i = 0; i < X.rows(); ++i) {
            out[static_cast<std::size_t>(i)] = p.tree.predict(X.row(i));
          }
        } else if constexpr (std::is_same_v<T, ForestModel>) {
          for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::size_t votes = 0;
            for (const auto& t : p.trees) votes += static_cast<std::size_t>(t.predict(X.row(i)));
            out[static_cast<std::size_t>(i)] = 2 * votes > p.trees.size() ? 1 : 0;
          }
        } else if constexpr (std::is_same_v<T, LinearModel>) {
          const Eigen::VectorXd z = (p.standardizer.apply(X) * p.weights).array() + p.bias;
          for (Eigen::Index i = 0; i < z.size(); ++i) {
            out[static_cast<std::size_t>(i)] = z(i) > 0.0 ? 1 : 0;
          }
        } else if constexpr (std::is_same_v<T, GaussianNbModel>) {
          for (Eigen::Index i = 0; i < X.rows(); ++i) {
            std::array<double, 2> score{};
            for (std::size_t c = 0; c < 2; ++c) {
              const auto diff = (X.row(i).transpose() - p.mean[c]).array();
              score[c] = p.log_prior[c] -
                         0.5 * ((2.0 * M_PI * p.variance[c].array()).log() +
                                diff.square() / p.variance[c].array())
                                   .sum();
            }
            out[static_cast<std::size_t>(i)] = score[1] > score[0] ? 1 : 0;
          }
        } else if constexpr (std::is_same_v<T, BoostModel>) {
          for (Eigen::Index i = 0; i < X.rows(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < p.stumps.size(); ++k) {
              s += p.alphas[k] * (p.stumps[k].predict(X.row(i)) == 1 ? 1.0 : -1.0);
            }
            out[static_cast<std::size_t>(i)] = s > 0.0 ? 1 : 0;
          }
        }
      },
      params_);
  return out;
}

TrainedModel train(Algorithm algorithm, const Dataset& data, const Hyperparameters& hp,
                   std::uint64_t seed) {
  data.validate();
  require_both_classes(data);
  switch (algorithm) {
    case Algorithm::DecisionTree: {
      TreeOptions options;
      options.max_depth = hp.max_depth;
      options.min_samples_leaf = hp.min_samples_leaf;
      const auto rows = all_rows(data.rows());
      return {algorithm, data.manifest, TreeModel{grow_tree(data.X, data.y, rows, {}, options)}};
    }
    case Algorithm::RandomForest:
      return {algorithm, data.manifest, train_forest(data, hp, seed)};
    case Algorithm::LogReg:
      return {algorithm, data.manifest, train_logreg(data, hp)};
    case Algorithm::NaiveBayes:
      return {algorithm, data.manifest, train_nb(data, hp)};
    case Algorithm::LinearSVM:
      return {algorithm, data.manifest, train_svm(data, hp, seed)};
    case Algorithm::AdaBoost:
      return {algorithm, data.manifest, train_boost(data, hp)};
  }
  throw InvariantError("unhandled algorithm");
}

EvalResult evaluate_predictions(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw InvariantError("prediction count mismatch");
  EvalResult r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool t = truth[i] == 1;
    const bool p = predicted[i] == 1;
    if (t && p) ++r.tp;
    else if (!t && p) ++r.fp;
    else if (!t && !p) ++r.tn;
    else ++r.fn;
  }
  const auto total = static_cast<double>(truth.size());
  r.accuracy = total > 0 ? static_cast<double>(r.tp + r.tn) / total : 0.0;
  if (r.tp + r.fp > 0) {
    r.precision = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp);
  } else {
    r.precision_undefined = true;
  }
  if (r.tp + r.fn > 0) {
    r.recall = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
  } else {
    r.recall_undefined = true;
  }
  if (r.precision + r.recall > 0.0) {
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  } else {
    r.f1_undefined = true;
  }
  return r;
}

EvalResult evaluate(const TrainedModel& model, const Dataset& test) {
  if (test.manifest != model.manifest()) {
    throw InvariantError("test manifest does not match the trained model's manifest");
  }
  return evaluate_predictions(test.y, model.predict(test.X));
}

std::vector<HoldoutSplit> make_holdout_splits(std::span<const int> y, const HoldoutOptions& options,
                                              std::size_t* redraws) {
  const std::size_t n = y.size();
  if (n < 2) throw InvariantError("holdout needs at least 2 rows");
  if (!(options.train_fraction > 0.0 && options.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  if (options.repetitions < 1) throw ConfigError("repetitions must be >= 1");
  const auto n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(n))), 1,
      n - 1);
  std::vector<HoldoutSplit> splits;
  std::size_t redrawn = 0;
  std::uint64_t stream = 0;
  std::vector<std::size_t> perm(n);
  for (std::size_t rep = 0; rep < options.repetitions; ++rep) {
    std::size_t consecutive = 0;
    while (true) {
      const std::uint64_t sub_seed = derive_seed(options.seed, stream++);
      std::iota(perm.begin(), perm.end(), 0);
      Rng rng(sub_seed);
      rng.shuffle(perm);
      HoldoutSplit split;
      split.sub_seed = sub_seed;
      split.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
      split.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
      std::sort(split.train.begin(), split.train.end());
      std::sort(split.test.begin(), split.test.end());
      std::size_t ones = 0;
      for (auto i : split.train) ones += static_cast<std::size_t>(y[i] == 1);
      if (ones > 0 && ones < split.train.size()) {
        splits.push_back(std::move(split));
        break;
      }
      ++redrawn;
      if (++consecutive > kMaxConsecutiveRedraws) {
        throw InvariantError("more than 20 consecutive degenerate holdout splits");
      }
    }
  }
  if (redraws) *redraws = redrawn;
  return splits;
}

EvalResult mean_of(std::span<const EvalResult> runs) {
  EvalResult m;
  if (runs.empty()) return m;
  for (const auto& r : runs) {
    m.accuracy += r.accuracy;
    m.precision += r.precision;
    m.recall += r.recall;
    m.f1 += r.f1;
    m.tp += r.tp;
    m.fp += r.fp;
    m.tn += r.tn;
    m.fn += r.fn;
    m.precision_undefined = m.precision_undefined || r.precision_undefined;
    m.recall_undefined = m.recall_undefined || r.recall_undefined;
    m.f1_undefined = m.f1_undefined || r.f1_undefined;
  }
  const auto k = static_cast<double>(runs.size());
  m.accuracy /= k;
  m.precision /= k;
  m.recall /= k;
  m.f1 /= k;
  return m;
}

HoldoutReport repeated_holdout(const SplitFeaturizer& featurize, std::span<const int> y,
                               Algorithm algorithm, const Hyperparameters& hp,
                               const HoldoutOptions& options) {
  HoldoutReport report;
  report.algorithm = algorithm;
  report.splits = make_holdout_splits(y, options, &report.redraws);
  for (const auto& split : report.splits) {
    const Dataset full = checked_featurize(featurize, split, y);
    report.runs.push_back(run_split(full, split, algorithm, hp));
  }
  report.mean = mean_of(report.runs);
  return report;
}

HoldoutReport repeated_holdout(const Dataset& data, Algorithm algorithm, const Hyperparameters& hp,
                               const HoldoutOptions& options) {
  data.validate();
  return repeated_holdout([&](std::span<const std::size_t>) { return data; }, data.y, algorithm,
                          hp, options);
}

ImportanceReport gini_importance(const TrainedModel& model) {
  const auto* forest = std::get_if<ForestModel>(&model.parameters());
  if (model.algorithm() != Algorithm::RandomForest || !forest) {
    throw InvariantError("Gini importance requires a RandomForest model");
  }
  ImportanceReport report;
  report.manifest = model.manifest();
  report.importance.assign(report.manifest.size(), 0.0);
  for (const auto& tree : forest->trees) {
    const double root = tree.nodes.front().weight;
    for (const auto& node : tree.nodes) {
      if (node.feature < 0) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double decrease =
          node.impurity - (l.weight * l.impurity + r.weight * r.impurity) / node.weight;
      report.importance[static_cast<std::size_t>(node.feature)] +=
          node.weight / root * std::max(0.0, decrease);
    }
  }
  const double total = std::accumulate(report.importance.begin(), report.importance.end(), 0.0);
  if (!(total > 0.0)) throw InvariantError("forest has no impurity-reducing splits");
  for (auto& v : report.importance) v /= total;
  report.ranking = all_rows(report.importance.size());
  std::stable_sort(report.ranking.begin(), report.ranking.end(), [&](std::size_t a, std::size_t b) {
    return report.importance[a] > report.importance[b];
  });
  return report;
}

std::string_view to_string(AblationGroup g) {
  switch (g) {
    case AblationGroup::All: return "All";
    case AblationGroup::Explicit: return "Explicit";
    case AblationGroup::Implicit: return "Implicit";
  }
  return "?";
}

AblationReport feature_group_ablation(const SplitFeaturizer& featurize, std::span<const int> y,
                                      const Manifest& manifest, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options) {
  constexpr AblationGroup kGroups[] = {AblationGroup::All, AblationGroup::Explicit,
                                       AblationGroup::Implicit};
  std::map<AblationGroup, std::vector<std::size_t>> columns;
  for (auto g : kGroups) {
    columns[g] = columns_of(manifest, g);
    if (columns[g].empty()) {
      throw InvariantError("feature group " + std::string(to_string(g)) + " has no columns");
    }
  }
  AblationReport report;
  std::size_t redraws = 0;
  const auto splits = make_holdout_splits(y, options, &redraws);
  for (auto g : kGroups) {
    auto& r = report.groups[g];
    r.algorithm = algorithm;
    r.splits = splits;
    r.redraws = redraws;
  }
  for (const auto& split : splits) {
    const Dataset full = checked_featurize(featurize, split, y);
    if (full.manifest != manifest) throw InvariantError("featurizer manifest changed");
    for (auto g : kGroups) {
      const Dataset sliced = full.select_columns(columns[g]);
      report.groups[g].runs.push_back(run_split(sliced, split, algorithm, hp));
    }
  }
  for (auto& [g, r] : report.groups) r.mean = mean_of(r.runs);
  return report;
}

AblationReport feature_group_ablation(const Dataset& data, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options) {
  data.validate();
  return feature_group_ablation([&](std::span<const std::size_t>) { return data; }, data.y,
                                data.manifest, algorithm, hp, options);
}

Dataset load_external_matrix(const std::filesystem::path& path, std::span<const std::string> row_ids,
                             std::span<const int> labels) {
  if (row_ids.size() != labels.size()) throw InvariantError("row ids and labels differ in length");
  std::vector<std::string> header;
  std::map<std::string, std::vector<double>> rows;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    auto cols = io::split_csv_line(line);
    if (header.empty()) {
      if (cols.size() < 2 || cols[0] != "news_id") {
        throw DataError(loc + ": expected header \"news_id,<feature>,...\"");
      }
      header = std::move(cols);
      return;
    }
    if (cols.size() != header.size()) throw DataError(loc + ": wrong column count");
    std::vector<double> v;
    for (std::size_t j = 1; j < cols.size(); ++j) {
      v.push_back(io::parse_double(cols[j], loc));
      if (!std::isfinite(v.back())) throw DataError(loc + ": non-finite value");
    }
    if (!rows.emplace(cols[0], std::move(v)).second) {
      throw DataError(loc + ": duplicate news_id " + cols[0]);
    }
  });
  if (header.empty()) throw DataError(name + ": empty file");
  std::vector<std::string> missing;
  for (const auto& id : row_ids) {
    if (!rows.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string msg = name + ": missing news_id";
    for (const auto& id : missing) msg += " " + id;
    throw DataError(msg);
  }
  Dataset ds;
  for (std::size_t j = 1; j < header.size(); ++j) {
    ds.manifest.push_back({header[j], FeatureGroup::External});
  }
  ds.X.resize(static_cast<Eigen::Index>(row_ids.size()),
              static_cast<Eigen::Index>(ds.manifest.size()));
  for (std::size_t i = 0; i < row_ids.size(); ++i) {
    const auto& v = rows.at(row_ids[i]);
    for (std::size_t j = 0; j < v.size(); ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
    }
  }
  ds.y.assign(labels.begin(), labels.end());
  ds.row_ids.assign(row_ids.begin(), row_ids.end());
  ds.validate();
  return ds;
}

BaselineReport external_baseline_eval(const std::filesystem::path& matrix_path,
                                      const SplitFeaturizer& upf, std::span<const std::string> row_ids,
                                      std::span<const int> labels, Algorithm algorithm,
                                      const Hyperparameters& hp, const HoldoutOptions& options) {
  const Dataset external = load_external_matrix(matrix_path, row_ids, labels);
  BaselineReport report;
  report.external_columns = external.cols();
  report.external = repeated_holdout(external, algorithm, hp, options);
  report.concatenated = repeated_holdout(
      [&](std::span<const std::size_t> train_rows) {
        Dataset u = upf(train_rows);
        if (u.row_ids != external.row_ids) {
          throw InvariantError("UPF rows are not aligned with the external matrix");
        }
        Dataset joined = concat_columns(external, u);
        report.concatenated_columns = joined.cols();
        return joined;
      },
      labels, algorithm, hp, options);
  return report;
}

}  // namespace upf::ml
