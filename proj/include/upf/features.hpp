#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upf/core.hpp"
#include "upf/dataset.hpp"
#include "upf/liw.hpp"
#include "upf/pca.hpp"

namespace upf {

// Lowercases ASCII and splits on every byte that is not alphanumeric. Bytes
// >= 0x80 are kept as word characters so UTF-8 words stay whole.
std::vector<std::string> tokenize(std::string_view text);

struct TokenBag {
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;

  void add(std::string_view text);
};

TokenBag bag_of_tokens(std::span<const std::string> texts);

// Linear predictive lexicon: intercept + sum_w weight(w) * relfreq(w).
struct Lexicon {
  double intercept = 0.0;
  std::map<std::string, double> weights;

  void validate() const;
  double apply(const TokenBag& bag) const;
};

// TSV: "INTERCEPT\t<value>" then "word\tweight" rows.
Lexicon load_lexicon(const std::filesystem::path& path);

enum class Trait { Extraversion, Agreeableness, Conscientiousness, Neuroticism, Openness };

inline constexpr std::array<std::string_view, 5> kTraitNames = {
    "extraversion", "agreeableness", "conscientiousness", "neuroticism", "openness"};

struct TraitLexica {
  std::array<Lexicon, 5> lexica;  // indexed by Trait

  const Lexicon& operator[](Trait t) const { return lexica[static_cast<std::size_t>(t)]; }
};

double predict_age(std::span<const std::string> tweets, const Lexicon& lexicon);
std::array<double, 5> predict_personality(std::span<const std::string> tweets,
                                          const TraitLexica& lexica);

struct PoliticalSeeds {
  std::set<std::string> left;
  std::set<std::string> right;

  void validate() const;
};

// JSON {"left": [...], "right": [...]}.
PoliticalSeeds load_political_seeds(const std::filesystem::path& path);

enum class BiasCategory { Left, Neutral, Right };

std::string_view to_string(BiasCategory c);

// (L - R) / (L + R) over the interest multiset; 0 when no seed token matches.
double political_bias_score(std::span<const std::string> interests, const PoliticalSeeds& seeds);

// [0.5, 1] Left, [-1, -0.5] Right, otherwise Neutral.
BiasCategory bias_category(double score);

struct ExplicitFeatures {
  int verified = 0;
  std::int64_t register_age_days = 0;
  std::int64_t status_count = 0;
  std::int64_t favor_count = 0;
  std::int64_t follower_count = 0;
  std::int64_t following_count = 0;

  bool operator==(const ExplicitFeatures&) const = default;
};

ExplicitFeatures extract_explicit(const User& user, Date reference_date);

struct ImplicitModels {
  Lexicon age;
  TraitLexica traits;
  PoliticalSeeds seeds;
  LiwModel liw;
};

struct ImplicitFeatures {
  double age_years = 0.0;
  std::array<double, 5> big5{};
  double bias_score = 0.0;
  BiasCategory bias_category = BiasCategory::Neutral;
  std::string city;
  double location_lat = 0.0;
  double location_lon = 0.0;
  std::vector<double> image_pca;
};

// Image-class distributions keyed by user. CSV "user_id,c0,...,c{D-1}".
struct ImageClassTable {
  std::size_t dims = 0;
  std::map<std::string, std::vector<double>> vectors;
};

ImageClassTable load_image_classes(const std::filesystem::path& path);

struct FeatureConfig {
  bool include_location = true;
  std::size_t image_pca_dims = 10;
};

// Fixed order: six explicit slots, age, Big-Five, bias, [lat, lon],
// image_pca_1..image_pca_D.
Manifest feature_manifest(const FeatureConfig& config);

struct UserFeatureVector {
  std::vector<double> values;
  std::shared_ptr<const Manifest> manifest;
};

struct NewsFeatureVector {
  std::string news_id;
  std::vector<double> values;
  std::size_t sharer_count = 0;
};

// Implicit features for one user. `image` may be null (projects the all-zero
// vector); `pca` may be null only when image_pca_dims is 0.
ImplicitFeatures extract_implicit(const User& user, std::span<const std::string> tweets,
                                  const std::vector<double>* image, const ImplicitModels& models,
                                  const PcaModel* pca, std::size_t image_dims);

UserFeatureVector user_feature_vector(const User& user, std::span<const std::string> tweets,
                                      const std::vector<double>* image,
                                      const ImplicitModels& models, const PcaModel* pca,
                                      Date reference_date, const FeatureConfig& config);

// Element-wise mean of the sharers' vectors.
NewsFeatureVector aggregate_upf(const std::string& news_id,
                                std::span<const UserFeatureVector> sharers);

struct ExtractionStats {
  std::size_t users_profiled = 0;
  std::size_t users_without_tweets = 0;
  std::size_t users_without_image = 0;
  std::size_t image_rows_unmatched = 0;
};

// Caches everything about a user that does not depend on the image PCA fit, so
// per-split design matrices only redo the projection.
class FeatureExtractor {
 public:
  FeatureExtractor(const Corpus& corpus, const ImplicitModels& models,
                   const ImageClassTable* images, FeatureConfig config);

  const Manifest& manifest() const { return *manifest_; }
  std::shared_ptr<const Manifest> shared_manifest() const { return manifest_; }
  const FeatureConfig& config() const { return config_; }
  const ExtractionStats& stats() const { return stats_; }
  const Corpus& corpus() const { return *corpus_; }

  // PCA over the image vectors of the given users (users without an image are
  // skipped). Returns nullopt when image_pca_dims is 0.
  std::optional<PcaModel> fit_image_pca(std::span<const std::string> user_ids) const;

  const ImplicitFeatures& implicit_base(const std::string& user_id) const;
  const ExplicitFeatures& explicit_features(const std::string& user_id) const;

  UserFeatureVector user_vector(const std::string& user_id, const PcaModel* pca) const;

 private:
  struct Profile {
    ExplicitFeatures explicit_features;
    ImplicitFeatures implicit_features;  // image_pca left empty
    const std::vector<double>* image = nullptr;
  };
  const Profile& profile(const std::string& user_id) const;

  const Corpus* corpus_;
  FeatureConfig config_;
  std::shared_ptr<const Manifest> manifest_;
  std::size_t image_dims_ = 0;
  std::map<std::string, Profile> profiles_;
  ExtractionStats stats_;
};

struct DesignRows {
  std::vector<std::string> news_ids;  // news with at least one sharer, ascending
  std::vector<int> labels;            // 1 fake, 0 real
  std::vector<std::string> skipped;   // news without sharers
};

DesignRows design_rows(const Corpus& corpus);

struct DesignMatrix {
  Dataset dataset;
  std::vector<std::string> skipped_news;
  std::optional<PcaModel> pca;
};

// One UPF row per shared news. The image PCA is fit on the users who shared
// `pca_fit_news` (all design rows when empty).
DesignMatrix build_design_matrix(const FeatureExtractor& extractor,
                                 std::span<const std::string> pca_fit_news = {});

}  // namespace upf
