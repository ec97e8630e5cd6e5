#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace upf {

using Date = std::chrono::sys_days;

// Accepts "YYYY-MM-DD", optionally followed by a time part ("T..." or " ...").
Date parse_date(std::string_view text);
std::string format_date(Date d);

enum class Label { Fake, Real };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct User {
  std::string user_id;
  bool verified = false;
  Date registered_at{};
  std::int64_t status_count = 0;
  std::int64_t favor_count = 0;
  std::int64_t follower_count = 0;
  std::int64_t following_count = 0;
  std::vector<std::string> interest_tokens;

  bool operator==(const User&) const = default;
};

struct NewsItem {
  std::string news_id;
  Label label = Label::Real;

  bool operator==(const NewsItem&) const = default;
};

struct SharingEvent {
  std::string user_id;
  std::string news_id;

  bool operator==(const SharingEvent&) const = default;
};

struct TweetDoc {
  std::string user_id;
  std::string text;

  bool operator==(const TweetDoc&) const = default;
};

struct SharingCounts {
  std::int64_t n_fake = 0;
  std::int64_t n_real = 0;

  std::int64_t total() const { return n_fake + n_real; }
  bool operator==(const SharingCounts&) const = default;
};

struct LoadStats {
  std::size_t users = 0;
  std::size_t news = 0;
  std::size_t shares = 0;
  std::size_t tweets = 0;
  std::size_t duplicate_shares_dropped = 0;
  std::size_t unknown_keys = 0;
};

// Immutable corpus with referential integrity. Construct through Corpus::build
// or load_corpus; every accessor is const.
class Corpus {
 public:
  Corpus() = default;

  // Validates ids, counts, dates and references. Duplicate (user, news) shares
  // collapse to the first occurrence; the number dropped is added to `stats`.
  static Corpus build(std::vector<User> users, std::vector<NewsItem> news,
                      std::vector<SharingEvent> shares, std::vector<TweetDoc> tweets,
                      Date reference_date, LoadStats* stats = nullptr);

  const std::map<std::string, User>& users() const { return users_; }
  const std::map<std::string, NewsItem>& news() const { return news_; }
  const std::vector<SharingEvent>& shares() const { return shares_; }
  const std::vector<TweetDoc>& tweets() const { return tweets_; }
  Date reference_date() const { return reference_date_; }

  const User& user(const std::string& user_id) const;
  const NewsItem& news_item(const std::string& news_id) const;
  bool has_user(const std::string& user_id) const { return users_.count(user_id) != 0; }

  // Distinct news shared by the user, in load order. Empty for non-sharers.
  const std::vector<std::string>& news_shared_by(const std::string& user_id) const;
  // Distinct sharers of the news, in load order. Empty when never shared.
  const std::vector<std::string>& sharers_of(const std::string& news_id) const;
  // Tweet texts of the user, in load order.
  const std::vector<std::string>& tweets_of(const std::string& user_id) const;

  bool operator==(const Corpus& other) const;

 private:
  std::map<std::string, User> users_;
  std::map<std::string, NewsItem> news_;
  std::vector<SharingEvent> shares_;
  std::vector<TweetDoc> tweets_;
  Date reference_date_{};

  std::map<std::string, std::vector<std::string>> news_by_user_;
  std::map<std::string, std::vector<std::string>> sharers_by_news_;
  std::map<std::string, std::vector<std::string>> tweets_by_user_;
};

struct CorpusPaths {
  std::filesystem::path users;
  std::filesystem::path news;
  std::filesystem::path shares;
  std::filesystem::path tweets;
};

struct LoadedCorpus {
  Corpus corpus;
  LoadStats stats;
};

LoadedCorpus load_corpus(const CorpusPaths& paths, Date reference_date);

SharingCounts sharing_counts(const Corpus& corpus, const std::string& user_id);

}  // namespace upf
