#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "upf/core.hpp"
#include "upf/rng.hpp"

namespace testing {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("upf_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline upf::User make_user(const std::string& id, upf::Date registered = upf::parse_date("2015-01-01")) {
  upf::User u;
  u.user_id = id;
  u.registered_at = registered;
  return u;
}

// Random corpus: every (user, news) pair is a share with probability p_share.
// Ids are zero-padded so lexical order equals numeric order.
inline upf::Corpus random_corpus(std::uint64_t seed, std::size_t n_users, std::size_t n_news,
                                 double p_share, double p_fake = 0.5) {
  upf::Rng rng(seed);
  auto pad = [](char prefix, std::size_t i) {
    std::string d = std::to_string(i);
    return std::string(1, prefix) + std::string(4 - d.size(), '0') + d;
  };
  std::vector<upf::User> users;
  for (std::size_t i = 0; i < n_users; ++i) users.push_back(make_user(pad('u', i)));
  std::vector<upf::NewsItem> news;
  for (std::size_t j = 0; j < n_news; ++j) {
    news.push_back({pad('n', j), rng.bernoulli(p_fake) ? upf::Label::Fake : upf::Label::Real});
  }
  std::vector<upf::SharingEvent> shares;
  for (std::size_t i = 0; i < n_users; ++i) {
    for (std::size_t j = 0; j < n_news; ++j) {
      if (rng.bernoulli(p_share)) shares.push_back({users[i].user_id, news[j].news_id});
    }
  }
  return upf::Corpus::build(std::move(users), std::move(news), std::move(shares), {},
                            upf::parse_date("2020-01-01"));
}

}  // namespace testing
