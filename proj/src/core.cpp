#include "upf/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>

#include "json.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"

namespace upf {

using nlohmann::json;

namespace {

const std::vector<std::string> kEmpty;

int parse_fixed_int(std::string_view text, std::string_view whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("invalid date: '" + std::string(whole) + "'");
  }
  return value;
}

std::string lowercase(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string where(const std::filesystem::path& file, std::size_t line) {
  return file.filename().string() + ":" + std::to_string(line);
}

const json& field(const json& obj, const char* key, const std::string& loc) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(loc + ": missing field \"" + key + "\"");
  return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& loc) {
  const json& v = field(obj, key, loc);
  if (!v.is_string()) throw DataError(loc + ": field \"" + key + "\" must be a string");
  return v.get<std::string>();
}

std::int64_t count_field(const json& obj, const char* key, const std::string& loc) {
  const json& v = field(obj, key, loc);
  if (!v.is_number_integer()) {
    throw DataError(loc + ": field \"" + key + "\" must be an integer");
  }
  const auto n = v.get<std::int64_t>();
  if (n < 0) throw DataError(loc + ": field \"" + key + "\" must be non-negative");
  return n;
}

std::size_t count_unknown(const json& obj, std::initializer_list<std::string_view> known) {
  std::size_t unknown = 0;
  for (const auto& item : obj.items()) {
    if (std::find(known.begin(), known.end(), item.key()) == known.end()) ++unknown;
  }
  return unknown;
}

json parse_object(std::string_view line, const std::string& loc) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(loc + ": malformed JSON (" + e.what() + ")");
  }
  if (!obj.is_object()) throw DataError(loc + ": expected a JSON object");
  return obj;
}

}  // namespace

Date parse_date(std::string_view text) {
  const std::string_view whole = text;
  if (text.size() > 10 && (text[10] == 'T' || text[10] == ' ')) text = text.substr(0, 10);
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw DataError("invalid date: '" + std::string(whole) + "'");
  }
  const int y = parse_fixed_int(text.substr(0, 4), whole);
  const int m = parse_fixed_int(text.substr(5, 2), whole);
  const int d = parse_fixed_int(text.substr(8, 2), whole);
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(m)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DataError("invalid date: '" + std::string(whole) + "'");
  return std::chrono::sys_days{ymd};
}

std::string format_date(Date d) {
  const std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

std::string_view to_string(Label label) { return label == Label::Fake ? "fake" : "real"; }

Label parse_label(std::string_view text) {
  if (text == "fake") return Label::Fake;
  if (text == "real") return Label::Real;
  throw DataError("invalid label '" + std::string(text) + "' (expected fake|real)");
}

Corpus Corpus::build(std::vector<User> users, std::vector<NewsItem> news,
                     std::vector<SharingEvent> shares, std::vector<TweetDoc> tweets,
                     Date reference_date, LoadStats* stats) {
  Corpus c;
  c.reference_date_ = reference_date;
  for (auto& u : users) {
    if (u.user_id.empty()) throw DataError("empty user_id");
    if (u.status_count < 0 || u.favor_count < 0 || u.follower_count < 0 ||
        u.following_count < 0) {
      throw DataError("negative count for user " + u.user_id);
    }
    if (u.registered_at > reference_date) {
      throw DataError("user " + u.user_id + " registered after the reference date (" +
                      format_date(u.registered_at) + " > " + format_date(reference_date) + ")");
    }
    const std::string id = u.user_id;
    if (!c.users_.emplace(id, std::move(u)).second) throw DataError("duplicate user_id " + id);
  }
  for (auto& n : news) {
    if (n.news_id.empty()) throw DataError("empty news_id");
    const std::string id = n.news_id;
    if (!c.news_.emplace(id, std::move(n)).second) throw DataError("duplicate news_id " + id);
  }

  std::set<std::pair<std::string, std::string>> seen;
  std::size_t dropped = 0;
  for (auto& s : shares) {
    if (!c.users_.count(s.user_id)) throw DataError("unknown user_id " + s.user_id);
    if (!c.news_.count(s.news_id)) throw DataError("unknown news_id " + s.news_id);
    if (!seen.emplace(s.user_id, s.news_id).second) {
      ++dropped;
      continue;
    }
    c.news_by_user_[s.user_id].push_back(s.news_id);
    c.sharers_by_news_[s.news_id].push_back(s.user_id);
    c.shares_.push_back(std::move(s));
  }
  for (auto& t : tweets) {
    if (!c.users_.count(t.user_id)) throw DataError("unknown user_id " + t.user_id);
    c.tweets_by_user_[t.user_id].push_back(t.text);
    c.tweets_.push_back(std::move(t));
  }
  if (stats) {
    stats->users = c.users_.size();
    stats->news = c.news_.size();
    stats->shares = c.shares_.size();
    stats->tweets = c.tweets_.size();
    stats->duplicate_shares_dropped += dropped;
  }
  return c;
}

const User& Corpus::user(const std::string& user_id) const {
  auto it = users_.find(user_id);
  if (it == users_.end()) throw DataError("unknown user_id " + user_id);
  return it->second;
}

const NewsItem& Corpus::news_item(const std::string& news_id) const {
  auto it = news_.find(news_id);
  if (it == news_.end()) throw DataError("unknown news_id " + news_id);
  return it->second;
}

const std::vector<std::string>& Corpus::news_shared_by(const std::string& user_id) const {
  auto it = news_by_user_.find(user_id);
  return it == news_by_user_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& Corpus::sharers_of(const std::string& news_id) const {
  auto it = sharers_by_news_.find(news_id);
  return it == sharers_by_news_.end() ? kEmpty : it->second;
}

const std::vector<std::string>& Corpus::tweets_of(const std::string& user_id) const {
  auto it = tweets_by_user_.find(user_id);
  return it == tweets_by_user_.end() ? kEmpty : it->second;
}

bool Corpus::operator==(const Corpus& other) const {
  return reference_date_ == other.reference_date_ && users_ == other.users_ &&
         news_ == other.news_ && shares_ == other.shares_ && tweets_ == other.tweets_;
}

LoadedCorpus load_corpus(const CorpusPaths& paths, Date reference_date) {
  LoadStats stats;
  std::vector<User> users;
  io::for_each_line(paths.users, [&](std::string_view line, std::size_t n) {
    const std::string loc = where(paths.users, n);
    const json obj = parse_object(line, loc);
    stats.unknown_keys += count_unknown(
        obj, {"user_id", "verified", "registered_at", "status_count", "favor_count",
              "follower_count", "following_count", "interests"});
    User u;
    u.user_id = string_field(obj, "user_id", loc);
    if (u.user_id.empty()) throw DataError(loc + ": empty user_id");
    const json& verified = field(obj, "verified", loc);
    if (!verified.is_boolean()) throw DataError(loc + ": field \"verified\" must be a boolean");
    u.verified = verified.get<bool>();
    try {
      u.registered_at = parse_date(string_field(obj, "registered_at", loc));
    } catch (const DataError& e) {
      throw DataError(loc + ": " + e.what());
    }
    u.status_count = count_field(obj, "status_count", loc);
    u.favor_count = count_field(obj, "favor_count", loc);
    u.follower_count = count_field(obj, "follower_count", loc);
    u.following_count = count_field(obj, "following_count", loc);
    if (auto it = obj.find("interests"); it != obj.end()) {
      if (!it->is_array()) throw DataError(loc + ": field \"interests\" must be an array");
      for (const auto& tok : *it) {
        if (!tok.is_string()) throw DataError(loc + ": interests must be strings");
        u.interest_tokens.push_back(lowercase(tok.get<std::string>()));
      }
    }
    if (u.registered_at > reference_date) {
      throw DataError(loc + ": user " + u.user_id + " registered after the reference date");
    }
    users.push_back(std::move(u));
  });

  std::vector<NewsItem> news;
  io::for_each_line(paths.news, [&](std::string_view line, std::size_t n) {
    const std::string loc = where(paths.news, n);
    const json obj = parse_object(line, loc);
    stats.unknown_keys += count_unknown(obj, {"news_id", "label"});
    NewsItem item;
    item.news_id = string_field(obj, "news_id", loc);
    if (item.news_id.empty()) throw DataError(loc + ": empty news_id");
    try {
      item.label = parse_label(string_field(obj, "label", loc));
    } catch (const DataError& e) {
      throw DataError(loc + ": " + e.what());
    }
    news.push_back(std::move(item));
  });

  std::vector<SharingEvent> shares;
  io::for_each_line(paths.shares, [&](std::string_view line, std::size_t n) {
    const std::string loc = where(paths.shares, n);
    const json obj = parse_object(line, loc);
    stats.unknown_keys += count_unknown(obj, {"user_id", "news_id"});
    shares.push_back({string_field(obj, "user_id", loc), string_field(obj, "news_id", loc)});
  });

  std::vector<TweetDoc> tweets;
  io::for_each_line(paths.tweets, [&](std::string_view line, std::size_t n) {
    const std::string loc = where(paths.tweets, n);
    const json obj = parse_object(line, loc);
    stats.unknown_keys += count_unknown(obj, {"user_id", "text"});
    tweets.push_back({string_field(obj, "user_id", loc), string_field(obj, "text", loc)});
  });

  LoadedCorpus out;
  out.corpus = Corpus::build(std::move(users), std::move(news), std::move(shares),
                             std::move(tweets), reference_date, &stats);
  out.stats = stats;
  return out;
}

SharingCounts sharing_counts(const Corpus& corpus, const std::string& user_id) {
  if (!corpus.has_user(user_id)) throw DataError("unknown user_id " + user_id);
  SharingCounts counts;
  for (const auto& news_id : corpus.news_shared_by(user_id)) {
    if (corpus.news_item(news_id).label == Label::Fake) {
      ++counts.n_fake;
    } else {
      ++counts.n_real;
    }
  }
  return counts;
}

}  // namespace upf
