#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upf/features.hpp"
#include "upf/grouping.hpp"
#include "upf/ml.hpp"
#include "upf/synth.hpp"

namespace upf {

inline constexpr std::string_view kToolVersion = "upfkit 1.0.0";

struct InputPaths {
  std::filesystem::path users;
  std::filesystem::path news;
  std::filesystem::path shares;
  std::filesystem::path tweets;
  std::filesystem::path bot_scores;
  std::filesystem::path image_classes;
  std::filesystem::path age_lexicon;
  std::array<std::filesystem::path, 5> trait_lexica;
  std::filesystem::path political_seeds;
  std::filesystem::path liw_training;
  std::filesystem::path gazetteer;
  // Used when the file exists: one word per line, replacing the vocabulary
  // derived from the training documents.
  std::filesystem::path liw_vocabulary;

  // Default file names under `dir`.
  static InputPaths under(const std::filesystem::path& dir);
};

struct MlConfig {
  std::vector<ml::Algorithm> algorithms = {ml::Algorithm::RandomForest, ml::Algorithm::LinearSVM,
                                           ml::Algorithm::DecisionTree, ml::Algorithm::LogReg};
  std::size_t repetitions = 5;
  double train_fraction = 0.8;
  ml::Algorithm ablation_algorithm = ml::Algorithm::RandomForest;
  ml::Algorithm baseline_algorithm = ml::Algorithm::RandomForest;
  std::optional<std::filesystem::path> baseline_matrix;
  bool concat_upf = true;
  ml::Hyperparameters hyperparameters;
};

struct PipelineConfig {
  std::filesystem::path input_dir = "data";
  // Per-file replacements keyed by input name (see input_names()).
  std::map<std::string, std::filesystem::path> input_overrides;
  std::filesystem::path output_dir = "out";
  Date reference_date = parse_date("2020-01-01");
  double bot_threshold = 0.5;
  double alpha = 0.05;
  GroupingConfig grouping;
  FeatureConfig features;
  MlConfig ml;
  std::uint64_t seed = 0;
  std::optional<SynthConfig> synth;
  bool synth_seed_explicit = false;
  // groups.json read by extract and compare; defaults to the output directory.
  std::optional<std::filesystem::path> groups_file;

  void validate() const;
  InputPaths inputs() const;

  // Sub-seeds for stochastic stages, all derived from `seed`.
  std::uint64_t grouping_seed() const;
  std::uint64_t holdout_seed() const;
  std::uint64_t importance_seed() const;

  // SHA-256 of the canonical config; output_dir and input directories are
  // excluded and input files are reduced to their names.
  std::string hash() const;
};

// Relative paths in the file resolve against `base_dir`.
PipelineConfig pipeline_config_from_yaml_text(const std::string& text,
                                              const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// Keys accepted under `inputs:`.
std::vector<std::string> input_names();

enum class Stage {
  Synth,
  Ingest,
  FilterBots,
  Group,
  Extract,
  Compare,
  TrainEval,
  Importance,
  Ablate,
  Baseline,
  Report,
};

std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view text);
std::span<const Stage> all_stages();

// Artifact names in the output directory.
namespace artifacts {
inline constexpr const char* kIngest = "ingest.json";
inline constexpr const char* kFilter = "filter.json";
inline constexpr const char* kGroups = "groups.json";
inline constexpr const char* kFeatures = "features.csv";
inline constexpr const char* kUserFeatures = "user_features.csv";
inline constexpr const char* kExtract = "extract.json";
inline constexpr const char* kComparison = "comparison.json";
inline constexpr const char* kEval = "eval.json";
inline constexpr const char* kImportance = "importance.json";
inline constexpr const char* kAblation = "ablation.json";
inline constexpr const char* kBaseline = "baseline.json";
inline constexpr const char* kReportMd = "report.md";
inline constexpr const char* kReportJson = "report.json";
}  // namespace artifacts

// Design-matrix featurizer for repeated holdout. Caches one dataset per
// distinct train-row set, so runs that share splits fit each image PCA once.
class DesignFeaturizer {
 public:
  explicit DesignFeaturizer(const FeatureExtractor& extractor);

  const DesignRows& rows() const { return rows_; }
  Dataset operator()(std::span<const std::size_t> train_rows);
  ml::SplitFeaturizer as_function();

 private:
  const FeatureExtractor* extractor_;
  DesignRows rows_;
  std::map<std::vector<std::size_t>, Dataset> cache_;
};

class StageContext;

// Runs stages against shared in-process state (loaded corpus, extractor,
// featurizer cache). Artifacts are identical to running each stage alone.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();
  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  const PipelineConfig& config() const { return config_; }

  void run(Stage stage);
  // Every stage in order; synth only when configured, baseline only when a
  // matrix is configured.
  void run_all();

 private:
  PipelineConfig config_;
  std::unique_ptr<StageContext> context_;
};

// Reads the stage artifacts in `output_dir` and renders the consolidated
// report. eval.json is required; other sections are marked "not run".
struct RenderedReport {
  std::string markdown;
  std::string json;
};
RenderedReport render_report(const std::filesystem::path& output_dir);

// 0 ok, 2 missing input, 3 bad config or data, 4 invariant violation.
int exit_code_for(const std::exception& e);

}  // namespace upf
