#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "upf/bot_filter.hpp"
#include "upf/core.hpp"
#include "upf/features.hpp"
#include "upf/liw.hpp"

namespace upf {

// Keys accepted in SynthConfig::effect_sizes. "location" moves the east/west
// city choice, "image" the profile-image class mix.
inline constexpr std::array<std::string_view, 15> kSynthEffectKeys = {
    "verified",      "register_age_days", "status_count",      "favor_count",
    "follower_count", "following_count",  "age",               "extraversion",
    "agreeableness", "conscientiousness", "neuroticism",       "openness",
    "bias_score",    "location",          "image"};

// Fake-prone minus real-prone standardized mean differences.
std::map<std::string, double> default_effect_sizes();

struct SynthConfig {
  std::size_t n_users = 2000;
  std::size_t n_news = 1000;
  std::size_t n_shares = 30000;
  double fake_news_fraction = 0.5;
  double bot_fraction = 0.0;
  double fake_prone_fraction = 0.5;
  // Probability that a share targets the user's preferred label.
  double sharing_preference = 0.9;
  std::map<std::string, double> effect_sizes = default_effect_sizes();
  std::uint64_t seed = 0;
  Date reference_date = parse_date("2020-01-01");
  std::size_t tweets_per_user = 8;
  std::size_t words_per_tweet = 15;
  std::size_t image_classes = 1000;

  void validate() const;
};

// YAML mapping with the field names above; absent fields keep their defaults
// and effect_sizes entries override individual defaults.
SynthConfig load_synth_config(const std::filesystem::path& path);
SynthConfig synth_config_from_yaml_text(const std::string& text);

enum class Population { FakeProne, RealProne };
std::string_view to_string(Population p);

struct GroundTruth {
  std::map<std::string, Population> population;
  std::vector<std::string> bots;
  std::map<std::string, double> effect_sizes;
  double sharing_preference = 0.5;
  // Latent standard-normal draw behind each effect key, per user (users in
  // ascending id order).
  std::vector<std::string> user_order;
  std::map<std::string, std::vector<double>> latent;
};

struct SynthOutput {
  std::vector<User> users;
  std::vector<NewsItem> news;
  std::vector<SharingEvent> shares;
  std::vector<TweetDoc> tweets;
  BotScoreTable bot_scores;
  ImageClassTable images;
  Lexicon age_lexicon;
  TraitLexica trait_lexica;
  PoliticalSeeds seeds;
  std::vector<LiwDoc> liw_training;
  Gazetteer gazetteer;
  GroundTruth truth;
  Date reference_date{};

  Corpus corpus() const;
  // Models as the features stage would build them from the emitted files.
  ImplicitModels implicit_models() const;
};

SynthOutput generate(const SynthConfig& config);

// Default file names used by write_synth and the pipeline.
namespace synth_files {
inline constexpr const char* kUsers = "users.jsonl";
inline constexpr const char* kNews = "news.jsonl";
inline constexpr const char* kShares = "shares.jsonl";
inline constexpr const char* kTweets = "tweets.jsonl";
inline constexpr const char* kBotScores = "bot_scores.csv";
inline constexpr const char* kImageClasses = "image_classes.csv";
inline constexpr const char* kAgeLexicon = "age_lexicon.tsv";
inline constexpr const char* kPoliticalSeeds = "political_seeds.json";
inline constexpr const char* kLiwTraining = "liw_training.jsonl";
inline constexpr const char* kGazetteer = "gazetteer.csv";
inline constexpr const char* kGroundTruth = "ground_truth.json";
std::string trait_lexicon(std::string_view trait);  // "<trait>_lexicon.tsv"
}  // namespace synth_files

// Writes every file under `dir` (created if needed) and returns the paths
// written, in a fixed order.
std::vector<std::filesystem::path> write_synth(const SynthOutput& output,
                                               const std::filesystem::path& dir);

}  // namespace upf
