#include "upf/bot_filter.hpp"

#include <cmath>
#include <set>

#include "upf/errors.hpp"
#include "upf/io.hpp"

namespace upf {

BotScoreTable load_bot_scores(const std::filesystem::path& path) {
  BotScoreTable table;
  bool header_seen = false;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    auto cols = io::split_csv_line(line);
    if (!header_seen) {
      if (cols.size() != 2 || cols[0] != "user_id" || cols[1] != "score") {
        throw DataError(loc + ": expected header \"user_id,score\"");
      }
      header_seen = true;
      return;
    }
    if (cols.size() != 2) throw DataError(loc + ": expected 2 columns");
    if (cols[0].empty()) throw DataError(loc + ": empty user_id");
    const double score = io::parse_double(cols[1], loc);
    if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
      throw DataError(loc + ": score " + cols[1] + " outside [0,1]");
    }
    if (!table.scores.emplace(cols[0], score).second) {
      throw DataError(loc + ": duplicate user_id " + cols[0]);
    }
  });
  if (!header_seen) throw DataError(name + ": empty file, expected header \"user_id,score\"");
  return table;
}

Corpus remove_users(const Corpus& corpus, const std::vector<std::string>& removed) {
  const std::set<std::string> gone(removed.begin(), removed.end());
  std::vector<User> users;
  for (const auto& [id, u] : corpus.users()) {
    if (!gone.count(id)) users.push_back(u);
  }
  std::vector<NewsItem> news;
  for (const auto& [id, n] : corpus.news()) news.push_back(n);
  std::vector<SharingEvent> shares;
  for (const auto& s : corpus.shares()) {
    if (!gone.count(s.user_id)) shares.push_back(s);
  }
  std::vector<TweetDoc> tweets;
  for (const auto& t : corpus.tweets()) {
    if (!gone.count(t.user_id)) tweets.push_back(t);
  }
  return Corpus::build(std::move(users), std::move(news), std::move(shares), std::move(tweets),
                       corpus.reference_date());
}

FilterResult filter_bots(const Corpus& corpus, const BotScoreTable& table, double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("bot threshold must lie in [0,1], got " + io::format_double(threshold));
  }
  FilterStats stats;
  for (const auto& [id, user] : corpus.users()) {
    const SharingCounts counts = sharing_counts(corpus, id);
    auto it = table.scores.find(id);
    const bool removed = it != table.scores.end() && it->second > threshold;
    if (counts.n_fake > 0) ++stats.fake_sharers;
    if (counts.n_real > 0) ++stats.real_sharers;
    if (removed) {
      stats.removed_users.push_back(id);
      if (counts.n_fake > 0) ++stats.removed_fake_sharers;
      if (counts.n_real > 0) ++stats.removed_real_sharers;
    } else if (it == table.scores.end()) {
      ++stats.unscored_kept;
    }
  }
  stats.removed_count = stats.removed_users.size();
  stats.kept_count = corpus.users().size() - stats.removed_count;
  if (stats.fake_sharers > 0) {
    stats.removed_ratio_fake_sharers =
        static_cast<double>(stats.removed_fake_sharers) / static_cast<double>(stats.fake_sharers);
  }
  if (stats.real_sharers > 0) {
    stats.removed_ratio_real_sharers =
        static_cast<double>(stats.removed_real_sharers) / static_cast<double>(stats.real_sharers);
  }
  return {remove_users(corpus, stats.removed_users), std::move(stats)};
}

}  // namespace upf
