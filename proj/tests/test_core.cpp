#include <functional>
#include <map>
#include <set>

#include "doctest.h"
#include "support.hpp"
#include "upf/core.hpp"
#include "upf/errors.hpp"
#include "upf/grouping.hpp"

using namespace upf;
using testing::TempDir;
using testing::write_text;

namespace {

const Date kRef = parse_date("2020-01-01");

std::string user_line(const std::string& id, const std::string& extra = "") {
  return R"({"user_id":")" + id +
         R"(","verified":false,"registered_at":"2015-06-01","status_count":1,"favor_count":2,)"
         R"("follower_count":3,"following_count":4,"interests":["MAGA","sports"])" + extra + "}\n";
}

struct Files {
  TempDir dir;
  CorpusPaths paths{dir / "users.jsonl", dir / "news.jsonl", dir / "shares.jsonl",
                    dir / "tweets.jsonl"};

  Files(const std::string& users, const std::string& news, const std::string& shares,
        const std::string& tweets = "") {
    write_text(paths.users, users);
    write_text(paths.news, news);
    write_text(paths.shares, shares);
    write_text(paths.tweets, tweets);
  }
};

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("dates parse as UTC calendar days") {
  CHECK(format_date(parse_date("2019-12-31")) == "2019-12-31");
  CHECK(parse_date("2019-12-31T23:59:59Z") == parse_date("2019-12-31"));
  CHECK(parse_date("2019-12-31 10:00") == parse_date("2019-12-31"));
  CHECK((parse_date("2020-03-01") - parse_date("2020-02-28")).count() == 2);
  CHECK_THROWS_AS(parse_date("2019-13-01"), DataError);
  CHECK_THROWS_AS(parse_date("2019-02-30"), DataError);
  CHECK_THROWS_AS(parse_date("yesterday"), DataError);
}

TEST_CASE("labels") {
  CHECK(parse_label("fake") == Label::Fake);
  CHECK(parse_label("real") == Label::Real);
  CHECK(to_string(Label::Fake) == "fake");
  CHECK_THROWS_AS(parse_label("FAKE"), DataError);
}

TEST_CASE("duplicate share lines collapse to one") {
  Files f(user_line("a") + user_line("b"),
          R"({"news_id":"n1","label":"fake"})" "\n" R"({"news_id":"n2","label":"real"})" "\n",
          R"({"user_id":"a","news_id":"n1"})" "\n" R"({"user_id":"a","news_id":"n1"})" "\n"
          R"({"user_id":"b","news_id":"n2"})" "\n");
  const LoadedCorpus lc = load_corpus(f.paths, kRef);
  CHECK(lc.corpus.shares().size() == 2);
  CHECK(lc.stats.shares == 2);
  CHECK(lc.stats.duplicate_shares_dropped == 1);
  CHECK(lc.corpus.users().size() == 2);
  CHECK(lc.corpus.user("a").interest_tokens == std::vector<std::string>{"maga", "sports"});
}

TEST_CASE("dangling references name the offending id") {
  Files f(user_line("a"), R"({"news_id":"n1","label":"fake"})" "\n",
          R"({"user_id":"a","news_id":"x9"})" "\n");
  CHECK(error_of([&] { load_corpus(f.paths, kRef); }).find("unknown news_id x9") != std::string::npos);

  Files g(user_line("a"), R"({"news_id":"n1","label":"fake"})" "\n",
          R"({"user_id":"ghost","news_id":"n1"})" "\n");
  CHECK(error_of([&] { load_corpus(g.paths, kRef); }).find("unknown user_id ghost") != std::string::npos);

  Files h(user_line("a"), R"({"news_id":"n1","label":"fake"})" "\n", "",
          R"({"user_id":"nobody","text":"hi"})" "\n");
  CHECK(error_of([&] { load_corpus(h.paths, kRef); }).find("unknown user_id nobody") != std::string::npos);
}

TEST_CASE("malformed lines name file and line") {
  Files f(user_line("a") + "{not json\n", R"({"news_id":"n1","label":"fake"})" "\n", "");
  CHECK(error_of([&] { load_corpus(f.paths, kRef); }).find("users.jsonl:2") != std::string::npos);

  Files g(user_line("a"), "\n" R"({"news_id":"n1","label":"maybe"})" "\n", "");
  const std::string msg = error_of([&] { load_corpus(g.paths, kRef); });
  CHECK(msg.find("news.jsonl:2") != std::string::npos);

  Files neg(R"({"user_id":"a","verified":false,"registered_at":"2015-06-01","status_count":-1,)"
            R"("favor_count":2,"follower_count":3,"following_count":4})" "\n",
            R"({"news_id":"n1","label":"fake"})" "\n", "");
  CHECK(error_of([&] { load_corpus(neg.paths, kRef); }).find("non-negative") != std::string::npos);

  Files missing(R"({"user_id":"a","verified":false})" "\n", "", "");
  CHECK(error_of([&] { load_corpus(missing.paths, kRef); }).find("registered_at") != std::string::npos);

  Files future(R"({"user_id":"a","verified":true,"registered_at":"2021-01-01","status_count":1,)"
               R"("favor_count":2,"follower_count":3,"following_count":4})" "\n", "", "");
  CHECK_THROWS_AS(load_corpus(future.paths, kRef), DataError);

  Files dup(user_line("a") + user_line("a"), "", "");
  CHECK(error_of([&] { load_corpus(dup.paths, kRef); }).find("duplicate user_id a") != std::string::npos);
}

TEST_CASE("unknown keys are counted, not fatal") {
  Files f(user_line("a", R"(,"lang":"en","bio":"x")"),
          R"({"news_id":"n1","label":"fake","source":"p"})" "\n", "");
  const LoadedCorpus lc = load_corpus(f.paths, kRef);
  CHECK(lc.stats.unknown_keys == 3);
}

TEST_CASE("missing input file is a MissingInputError") {
  Files f(user_line("a"), "", "");
  CorpusPaths p = f.paths;
  p.tweets = f.dir / "absent.jsonl";
  CHECK_THROWS_AS(load_corpus(p, kRef), MissingInputError);
}

TEST_CASE("corpus counts match an independent line count at 1/1000 scale") {
  Rng rng(5);
  std::string users, news, shares;
  for (int i = 0; i < 160; ++i) users += user_line("u" + std::to_string(i));
  for (int j = 0; j < 722; ++j) {
    news += R"({"news_id":"n)" + std::to_string(j) + R"(","label":")" +
            (rng.bernoulli(0.3) ? "fake" : "real") + "\"}\n";
  }
  std::set<std::pair<int, int>> distinct;
  for (int s = 0; s < 1500; ++s) {
    const int u = static_cast<int>(rng.uniform_index(160));
    const int n = static_cast<int>(rng.uniform_index(722));
    distinct.emplace(u, n);
    shares += R"({"user_id":"u)" + std::to_string(u) + R"(","news_id":"n)" + std::to_string(n) + "\"}\n";
  }
  Files f(users, news, shares);
  auto count_lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) n += !line.empty();
    return n;
  };
  const LoadedCorpus lc = load_corpus(f.paths, kRef);
  CHECK(lc.corpus.users().size() == count_lines(f.paths.users));
  CHECK(lc.corpus.news().size() == count_lines(f.paths.news));
  CHECK(lc.corpus.users().size() == 160);
  CHECK(lc.corpus.news().size() == 722);
  CHECK(lc.corpus.shares().size() == distinct.size());
  CHECK(lc.stats.duplicate_shares_dropped == 1500 - distinct.size());

  SUBCASE("loading is idempotent") {
    const LoadedCorpus again = load_corpus(f.paths, kRef);
    CHECK(again.corpus == lc.corpus);
  }
}

TEST_CASE("sharing_counts") {
  std::vector<User> users = {testing::make_user("a"), testing::make_user("b")};
  std::vector<NewsItem> news = {{"f1", Label::Fake}, {"r1", Label::Real}, {"r2", Label::Real}};
  std::vector<SharingEvent> shares = {{"a", "f1"}, {"a", "r1"}, {"a", "r2"}};
  const Corpus c = Corpus::build(users, news, shares, {}, kRef);
  CHECK(sharing_counts(c, "a") == SharingCounts{1, 2});
  CHECK(sharing_counts(c, "b") == SharingCounts{0, 0});
  CHECK_THROWS_AS(sharing_counts(c, "zz"), DataError);
}

TEST_CASE("sharing_counts match a brute-force scan on random corpora") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Corpus c = testing::random_corpus(seed, 200, 40, 0.05);
    std::map<std::string, SharingCounts> oracle;
    std::int64_t fake_total = 0;
    std::int64_t real_total = 0;
    for (const auto& s : c.shares()) {
      const bool fake = c.news().at(s.news_id).label == Label::Fake;
      (fake ? oracle[s.user_id].n_fake : oracle[s.user_id].n_real) += 1;
      (fake ? fake_total : real_total) += 1;
    }
    std::int64_t sum_fake = 0;
    std::int64_t sum_real = 0;
    for (const auto& [id, u] : c.users()) {
      const SharingCounts got = sharing_counts(c, id);
      CHECK(got == oracle[id]);
      CHECK(got.total() == static_cast<std::int64_t>(c.news_shared_by(id).size()));
      sum_fake += got.n_fake;
      sum_real += got.n_real;
    }
    CHECK(sum_fake == fake_total);
    CHECK(sum_real == real_total);
  }
}

TEST_CASE("downstream consumers leave the corpus unchanged") {
  const Corpus c = testing::random_corpus(3, 100, 30, 0.08);
  const Corpus copy = c;
  (void)partition_users(c);
  GroupingConfig g;
  g.k = 20;
  (void)select_groups(c, g);
  CHECK(c == copy);
}

TEST_CASE("Corpus::build validation") {
  std::vector<User> users = {testing::make_user("a")};
  CHECK_THROWS_AS(Corpus::build({testing::make_user("")}, {}, {}, {}, kRef), DataError);
  CHECK_THROWS_AS(Corpus::build(users, {{"", Label::Fake}}, {}, {}, kRef), DataError);
  User neg = testing::make_user("n");
  neg.follower_count = -3;
  CHECK_THROWS_AS(Corpus::build({neg}, {}, {}, {}, kRef), DataError);
  CHECK_THROWS_AS(Corpus::build({testing::make_user("late", parse_date("2020-01-02"))}, {}, {}, {}, kRef),
                  DataError);
  const Corpus ok = Corpus::build({testing::make_user("edge", kRef)}, {}, {}, {}, kRef);
  CHECK(ok.users().size() == 1);
}
