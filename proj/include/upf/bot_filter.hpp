#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "upf/core.hpp"

namespace upf {

// Externally computed bot probabilities, one per scored user.
struct BotScoreTable {
  std::map<std::string, double> scores;
};

// CSV with header "user_id,score". Scores outside [0,1] are rejected.
BotScoreTable load_bot_scores(const std::filesystem::path& path);

struct FilterStats {
  std::size_t removed_count = 0;
  std::size_t kept_count = 0;
  std::size_t unscored_kept = 0;
  // Users who shared at least one fake (real) item before filtering. A user
  // sharing both kinds is counted in both populations.
  std::size_t fake_sharers = 0;
  std::size_t real_sharers = 0;
  std::size_t removed_fake_sharers = 0;
  std::size_t removed_real_sharers = 0;
  double removed_ratio_fake_sharers = 0.0;
  double removed_ratio_real_sharers = 0.0;
  std::vector<std::string> removed_users;
};

struct FilterResult {
  Corpus corpus;
  FilterStats stats;
};

inline constexpr double kDefaultBotThreshold = 0.5;

// Drops users whose score is strictly greater than `threshold`, together with
// their shares and tweets. Users without a score are kept.
FilterResult filter_bots(const Corpus& corpus, const BotScoreTable& table,
                         double threshold = kDefaultBotThreshold);

// Rebuilds the filtered corpus from a list of removed user ids (the persisted
// form of a previous filter_bots call).
Corpus remove_users(const Corpus& corpus, const std::vector<std::string>& removed);

}  // namespace upf
