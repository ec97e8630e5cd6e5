#include "upf/synth.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/rng.hpp"

namespace upf {

namespace {

using nlohmann::json;

constexpr std::size_t kWordsPerPole = 10;
constexpr std::size_t kWordsPerCity = 6;
constexpr std::size_t kFillerWords = 40;
constexpr std::size_t kLiwDocsPerCity = 20;
constexpr std::size_t kLiwDocLength = 15;
constexpr std::size_t kInterestTokens = 8;
constexpr std::size_t kBoostedClasses = 5;
constexpr double kAgeIntercept = 30.0;
constexpr double kAgeWeight = 150.0;
constexpr double kTraitIntercept = 3.0;
constexpr double kTraitWeight = 10.0;

enum Stream : std::uint64_t {
  kPopulation = 1,
  kLatent,
  kExplicit,
  kTweets,
  kInterests,
  kImages,
  kNewsLabels,
  kShares,
  kBotScores,
  kLiwDocs,
  kImageClasses,
};

struct CitySpec {
  const char* name;
  const char* slug;
  double lat;
  double lon;
  bool east;
};

constexpr CitySpec kCities[] = {
    {"atlanta", "atlanta", 33.749, -84.388, true},
    {"boston", "boston", 42.3601, -71.0589, true},
    {"new york", "newyork", 40.7128, -74.006, true},
    {"philadelphia", "philly", 39.9526, -75.1652, true},
    {"denver", "denver", 39.7392, -104.9903, false},
    {"los angeles", "losangeles", 34.0522, -118.2437, false},
    {"san francisco", "sanfran", 37.7749, -122.4194, false},
    {"seattle", "seattle", 47.6062, -122.3321, false},
};

const std::vector<std::string> kLeftSeeds = {"democrat", "liberal", "progressive", "bluewave",
                                             "equality"};
const std::vector<std::string> kRightSeeds = {"republican", "conservative", "maga", "gop",
                                              "patriot"};
const std::vector<std::string> kNeutralInterests = {"sports", "music",  "travel", "food",
                                                    "movies", "gaming", "tech",   "fitness"};

const char* const kAttributePrefixes[6] = {"age", "extra", "agree", "consc", "neuro", "open"};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::string pole_word(std::size_t attribute, bool high, std::size_t i) {
  return std::string(kAttributePrefixes[attribute]) + (high ? "hi" : "lo") + std::to_string(i);
}

std::string city_word(std::size_t city, std::size_t i) {
  return std::string(kCities[city].slug) + "w" + std::to_string(i);
}

std::string filler_word(std::size_t i) { return "filler" + std::to_string(i); }

std::string padded_id(char prefix, std::size_t i, std::size_t n) {
  const std::size_t width = std::to_string(n == 0 ? 0 : n - 1).size();
  std::string digits = std::to_string(i);
  return std::string(1, prefix) + std::string(width - digits.size(), '0') + digits;
}

// Rounds to six significant digits so the in-memory values equal the ones
// parsed back from the emitted CSV.
double round6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return io::parse_double(buf, "synth");
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

Lexicon make_lexicon(std::size_t attribute, double intercept, double weight) {
  Lexicon lex;
  lex.intercept = intercept;
  for (std::size_t i = 0; i < kWordsPerPole; ++i) {
    lex.weights[pole_word(attribute, true, i)] = weight;
    lex.weights[pole_word(attribute, false, i)] = -weight;
  }
  return lex;
}

std::string lexicon_text(const Lexicon& lex) {
  std::string out = "INTERCEPT\t" + io::format_double(lex.intercept) + "\n";
  for (const auto& [w, v] : lex.weights) out += w + "\t" + io::format_double(v) + "\n";
  return out;
}

template <class T>
T yaml_get(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("synth config: field '" + key + "' has the wrong type");
  }
}

}  // namespace

std::map<std::string, double> default_effect_sizes() {
  return {{"verified", -1.0},        {"register_age_days", 1.0}, {"status_count", -1.0},
          {"favor_count", 1.0},      {"follower_count", -1.0},   {"following_count", 1.0},
          {"age", -1.0},             {"extraversion", 0.5},      {"agreeableness", -0.5},
          {"conscientiousness", -0.5}, {"neuroticism", -1.0},    {"openness", 0.5},
          {"bias_score", -1.5},      {"location", 1.0},          {"image", 1.0}};
}

void SynthConfig::validate() const {
  auto fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError(std::string("synth config: ") + name + " must lie in [0, 1]");
    }
  };
  fraction(fake_news_fraction, "fake_news_fraction");
  fraction(bot_fraction, "bot_fraction");
  fraction(fake_prone_fraction, "fake_prone_fraction");
  if (!(sharing_preference >= 0.5 && sharing_preference <= 1.0)) {
    throw ConfigError("synth config: sharing_preference must lie in [0.5, 1]");
  }
  if (n_users == 0 || n_news == 0) throw ConfigError("synth config: n_users and n_news must be > 0");
  if (n_shares > n_users * n_news) {
    throw ConfigError("synth config: n_shares " + std::to_string(n_shares) +
                      " exceeds n_users * n_news = " + std::to_string(n_users * n_news));
  }
  if (tweets_per_user == 0 || words_per_tweet == 0) {
    throw ConfigError("synth config: tweets_per_user and words_per_tweet must be > 0");
  }
  if (image_classes < 2 * kBoostedClasses) {
    throw ConfigError("synth config: image_classes must be >= " +
                      std::to_string(2 * kBoostedClasses));
  }
  for (const auto& [key, value] : effect_sizes) {
    if (std::find(kSynthEffectKeys.begin(), kSynthEffectKeys.end(), key) == kSynthEffectKeys.end()) {
      throw ConfigError("synth config: unknown effect size '" + key + "'");
    }
    if (!std::isfinite(value)) throw ConfigError("synth config: effect size '" + key + "' not finite");
  }
}

SynthConfig synth_config_from_yaml_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("synth config: malformed YAML (") + e.what() + ")");
  }
  SynthConfig c;
  if (root.IsNull()) return c;
  if (!root.IsMap()) throw ConfigError("synth config: expected a mapping");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    const YAML::Node& v = kv.second;
    if (key == "n_users") c.n_users = yaml_get<std::size_t>(v, key);
    else if (key == "n_news") c.n_news = yaml_get<std::size_t>(v, key);
    else if (key == "n_shares") c.n_shares = yaml_get<std::size_t>(v, key);
    else if (key == "fake_news_fraction") c.fake_news_fraction = yaml_get<double>(v, key);
    else if (key == "bot_fraction") c.bot_fraction = yaml_get<double>(v, key);
    else if (key == "fake_prone_fraction") c.fake_prone_fraction = yaml_get<double>(v, key);
    else if (key == "sharing_preference") c.sharing_preference = yaml_get<double>(v, key);
    else if (key == "seed") c.seed = yaml_get<std::uint64_t>(v, key);
    else if (key == "tweets_per_user") c.tweets_per_user = yaml_get<std::size_t>(v, key);
    else if (key == "words_per_tweet") c.words_per_tweet = yaml_get<std::size_t>(v, key);
    else if (key == "image_classes") c.image_classes = yaml_get<std::size_t>(v, key);
    else if (key == "reference_date") {
      try {
        c.reference_date = parse_date(yaml_get<std::string>(v, key));
      } catch (const DataError& e) {
        throw ConfigError(std::string("synth config: reference_date: ") + e.what());
      }
    } else if (key == "effect_sizes") {
      if (v.IsNull()) continue;
      if (!v.IsMap()) throw ConfigError("synth config: effect_sizes must be a mapping");
      for (const auto& e : v) {
        const auto name = e.first.as<std::string>();
        c.effect_sizes[name] = yaml_get<double>(e.second, "effect_sizes." + name);
      }
    } else {
      throw ConfigError("synth config: unknown field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  io::require_file(path);
  return synth_config_from_yaml_text(io::read_file(path));
}

std::string_view to_string(Population p) {
  return p == Population::FakeProne ? "fake_prone" : "real_prone";
}

Corpus SynthOutput::corpus() const {
  return Corpus::build(users, news, shares, tweets, reference_date);
}

ImplicitModels SynthOutput::implicit_models() const {
  ImplicitModels m;
  m.age = age_lexicon;
  m.traits = trait_lexica;
  m.seeds = seeds;
  m.liw = train_liw(liw_training, select_liw_vocabulary(liw_training), gazetteer);
  return m;
}

SynthOutput generate(const SynthConfig& config) {
  config.validate();
  SynthOutput out;
  out.reference_date = config.reference_date;
  const std::size_t n = config.n_users;
  auto effect = [&](const std::string& key) {
    auto it = config.effect_sizes.find(key);
    return it == config.effect_sizes.end() ? 0.0 : it->second;
  };

  // Models shipped alongside the corpus.
  out.age_lexicon = make_lexicon(0, kAgeIntercept, kAgeWeight);
  for (std::size_t t = 0; t < 5; ++t) {
    out.trait_lexica.lexica[t] = make_lexicon(t + 1, kTraitIntercept, kTraitWeight);
  }
  out.seeds.left = {kLeftSeeds.begin(), kLeftSeeds.end()};
  out.seeds.right = {kRightSeeds.begin(), kRightSeeds.end()};
  for (const auto& c : kCities) out.gazetteer.cities[c.name] = {c.lat, c.lon};
  {
    Rng rng(derive_seed(config.seed, kLiwDocs));
    for (std::size_t c = 0; c < std::size(kCities); ++c) {
      for (std::size_t d = 0; d < kLiwDocsPerCity; ++d) {
        std::string text;
        for (std::size_t w = 0; w < kLiwDocLength; ++w) {
          if (!text.empty()) text += ' ';
          text += rng.bernoulli(0.8) ? city_word(c, rng.uniform_index(kWordsPerCity))
                                     : filler_word(rng.uniform_index(kFillerWords));
        }
        out.liw_training.push_back({kCities[c].name, std::move(text)});
      }
    }
  }

  // Populations, bots and latent traits.
  GroundTruth& truth = out.truth;
  truth.effect_sizes = config.effect_sizes;
  truth.sharing_preference = config.sharing_preference;
  std::vector<bool> fake_prone(n);
  std::vector<bool> is_bot(n);
  {
    Rng rng(derive_seed(config.seed, kPopulation));
    for (std::size_t i = 0; i < n; ++i) {
      fake_prone[i] = rng.bernoulli(config.fake_prone_fraction);
      is_bot[i] = rng.bernoulli(config.bot_fraction);
    }
  }
  for (std::size_t i = 0; i < n; ++i) truth.user_order.push_back(padded_id('u', i, n));
  {
    Rng rng(derive_seed(config.seed, kLatent));
    for (const auto key : kSynthEffectKeys) {
      const double half = effect(std::string(key)) / 2.0;
      auto& z = truth.latent[std::string(key)];
      z.resize(n);
      for (std::size_t i = 0; i < n; ++i) z[i] = (fake_prone[i] ? half : -half) + rng.normal();
    }
  }
  auto z = [&](const char* key, std::size_t i) { return truth.latent.at(key)[i]; };

  // Users.
  {
    Rng rng(derive_seed(config.seed, kInterests));
    for (std::size_t i = 0; i < n; ++i) {
      User u;
      u.user_id = truth.user_order[i];
      u.verified = z("verified", i) > 1.0;
      const auto age_days =
          std::max<std::int64_t>(1, std::llround(1800.0 + 400.0 * z("register_age_days", i)));
      u.registered_at = config.reference_date - std::chrono::days(age_days);
      u.status_count = std::llround(std::exp(8.0 + z("status_count", i)));
      u.favor_count = std::llround(std::exp(7.0 + z("favor_count", i)));
      u.follower_count = std::llround(std::exp(6.0 + z("follower_count", i)));
      u.following_count = std::llround(std::exp(5.5 + z("following_count", i)));
      const double p_left = logistic(1.5 * z("bias_score", i));
      for (std::size_t k = 0; k < kInterestTokens; ++k) {
        if (rng.bernoulli(0.6)) {
          const auto& pool = rng.bernoulli(p_left) ? kLeftSeeds : kRightSeeds;
          u.interest_tokens.push_back(pool[rng.uniform_index(pool.size())]);
        } else {
          u.interest_tokens.push_back(kNeutralInterests[rng.uniform_index(kNeutralInterests.size())]);
        }
      }
      truth.population[u.user_id] = fake_prone[i] ? Population::FakeProne : Population::RealProne;
      if (is_bot[i]) truth.bots.push_back(u.user_id);
      out.users.push_back(std::move(u));
    }
  }

  // Tweets: attribute pole words, home-city words, filler.
  {
    static constexpr const char* kAttributeKeys[6] = {
        "age", "extraversion", "agreeableness", "conscientiousness", "neuroticism", "openness"};
    Rng rng(derive_seed(config.seed, kTweets));
    std::vector<std::size_t> east;
    std::vector<std::size_t> west;
    for (std::size_t c = 0; c < std::size(kCities); ++c) (kCities[c].east ? east : west).push_back(c);
    for (std::size_t i = 0; i < n; ++i) {
      std::array<double, 6> p_high{};
      for (std::size_t a = 0; a < 6; ++a) p_high[a] = logistic(1.5 * z(kAttributeKeys[a], i));
      const auto& region = rng.bernoulli(logistic(1.5 * z("location", i))) ? east : west;
      const std::size_t city = region[rng.uniform_index(region.size())];
      for (std::size_t t = 0; t < config.tweets_per_user; ++t) {
        std::string text;
        for (std::size_t w = 0; w < config.words_per_tweet; ++w) {
          if (!text.empty()) text += ' ';
          const double r = rng.uniform();
          if (r < 0.6) {
            const std::size_t a = rng.uniform_index(6);
            const bool high = rng.bernoulli(p_high[a]);
            text += pole_word(a, high, rng.uniform_index(kWordsPerPole));
          } else if (r < 0.75) {
            text += city_word(city, rng.uniform_index(kWordsPerCity));
          } else {
            text += filler_word(rng.uniform_index(kFillerWords));
          }
        }
        out.tweets.push_back({truth.user_order[i], std::move(text)});
      }
    }
  }

  // Profile-image class distributions.
  {
    const std::size_t dims = config.image_classes;
    std::vector<std::size_t> classes(dims);
    std::iota(classes.begin(), classes.end(), 0);
    Rng(derive_seed(config.seed, kImageClasses)).shuffle(classes);
    const std::vector<std::size_t> fake_classes(classes.begin(), classes.begin() + kBoostedClasses);
    const std::vector<std::size_t> real_classes(classes.begin() + kBoostedClasses,
                                                classes.begin() + 2 * kBoostedClasses);
    const double boost = 0.05 * static_cast<double>(dims);
    Rng rng(derive_seed(config.seed, kImages));
    out.images.dims = dims;
    std::vector<double> v(dims);
    for (std::size_t i = 0; i < n; ++i) {
      for (auto& x : v) {
        double u;
        do {
          u = rng.uniform();
        } while (u <= 0.0);
        x = -std::log(u);
      }
      const double pi = logistic(1.5 * z("image", i));
      for (auto c : fake_classes) v[c] += boost * pi;
      for (auto c : real_classes) v[c] += boost * (1.0 - pi);
      const double sum = std::accumulate(v.begin(), v.end(), 0.0);
      std::vector<double> row(dims);
      for (std::size_t j = 0; j < dims; ++j) row[j] = round6(v[j] / sum);
      out.images.vectors[truth.user_order[i]] = std::move(row);
    }
  }

  // News labels.
  std::vector<std::size_t> fake_news;
  std::vector<std::size_t> real_news;
  {
    const auto n_fake = static_cast<std::size_t>(
        std::llround(config.fake_news_fraction * static_cast<double>(config.n_news)));
    std::vector<int> labels(config.n_news, 0);
    std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(n_fake), 1);
    Rng(derive_seed(config.seed, kNewsLabels)).shuffle(labels);
    for (std::size_t j = 0; j < config.n_news; ++j) {
      NewsItem item{padded_id('n', j, config.n_news), labels[j] ? Label::Fake : Label::Real};
      (labels[j] ? fake_news : real_news).push_back(j);
      out.news.push_back(std::move(item));
    }
  }

  // Shares: activity-weighted users, label preference p, distinct pairs.
  {
    Rng rng(derive_seed(config.seed, kShares));
    std::vector<double> cumulative(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += std::exp(0.5 * rng.normal());
      cumulative[i] = acc;
    }
    std::set<std::pair<std::size_t, std::size_t>> used;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    const std::size_t max_attempts = 20 * config.n_shares + 1000;
    for (std::size_t attempt = 0; attempt < max_attempts && pairs.size() < config.n_shares;
         ++attempt) {
      const double r = rng.uniform() * acc;
      const auto i = std::min<std::size_t>(
          n - 1, static_cast<std::size_t>(
                     std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin()));
      bool want_fake;
      if (is_bot[i]) {
        want_fake = rng.bernoulli(0.5);
      } else {
        const bool keep = rng.bernoulli(config.sharing_preference);
        want_fake = fake_prone[i] == keep;
      }
      const auto& pool = want_fake ? (fake_news.empty() ? real_news : fake_news)
                                   : (real_news.empty() ? fake_news : real_news);
      const std::size_t j = pool[rng.uniform_index(pool.size())];
      if (used.emplace(i, j).second) pairs.emplace_back(i, j);
    }
    // Near-dense configurations: fill the remainder in index order.
    for (std::size_t i = 0; i < n && pairs.size() < config.n_shares; ++i) {
      for (std::size_t j = 0; j < config.n_news && pairs.size() < config.n_shares; ++j) {
        if (used.emplace(i, j).second) pairs.emplace_back(i, j);
      }
    }
    for (const auto& [i, j] : pairs) out.shares.push_back({truth.user_order[i], out.news[j].news_id});
  }

  // Bot scores: bots in (0.5, 1], humans in [0, 0.5).
  {
    Rng rng(derive_seed(config.seed, kBotScores));
    for (std::size_t i = 0; i < n; ++i) {
      const double u = rng.uniform();
      out.bot_scores.scores[truth.user_order[i]] = is_bot[i] ? 1.0 - 0.5 * u : 0.5 * u;
    }
  }
  return out;
}

std::string synth_files::trait_lexicon(std::string_view trait) {
  return std::string(trait) + "_lexicon.tsv";
}

std::vector<std::filesystem::path> write_synth(const SynthOutput& output,
                                               const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const std::string& contents) {
    io::write_atomic(dir / name, contents);
    written.push_back(dir / name);
  };

  std::string text;
  for (const auto& u : output.users) {
    json j = {{"user_id", u.user_id},
              {"verified", u.verified},
              {"registered_at", format_date(u.registered_at)},
              {"status_count", u.status_count},
              {"favor_count", u.favor_count},
              {"follower_count", u.follower_count},
              {"following_count", u.following_count},
              {"interests", u.interest_tokens}};
    text += j.dump() + "\n";
  }
  emit(synth_files::kUsers, text);

  text.clear();
  for (const auto& item : output.news) {
    text += json{{"news_id", item.news_id}, {"label", std::string(to_string(item.label))}}.dump() +
            "\n";
  }
  emit(synth_files::kNews, text);

  text.clear();
  for (const auto& s : output.shares) {
    text += json{{"user_id", s.user_id}, {"news_id", s.news_id}}.dump() + "\n";
  }
  emit(synth_files::kShares, text);

  text.clear();
  for (const auto& t : output.tweets) {
    text += json{{"user_id", t.user_id}, {"text", t.text}}.dump() + "\n";
  }
  emit(synth_files::kTweets, text);

  text = "user_id,score\n";
  for (const auto& [id, score] : output.bot_scores.scores) {
    text += id + "," + io::format_double(score) + "\n";
  }
  emit(synth_files::kBotScores, text);

  {
    std::ostringstream os;
    os << "user_id";
    for (std::size_t j = 0; j < output.images.dims; ++j) os << ",c" << j;
    os << "\n";
    for (const auto& [id, v] : output.images.vectors) {
      os << id;
      for (double x : v) os << ',' << fmt6(x);
      os << "\n";
    }
    emit(synth_files::kImageClasses, os.str());
  }

  emit(synth_files::kAgeLexicon, lexicon_text(output.age_lexicon));
  for (std::size_t t = 0; t < kTraitNames.size(); ++t) {
    emit(synth_files::trait_lexicon(kTraitNames[t]), lexicon_text(output.trait_lexica.lexica[t]));
  }
  emit(synth_files::kPoliticalSeeds,
       json{{"left", output.seeds.left}, {"right", output.seeds.right}}.dump(2) + "\n");

  text.clear();
  for (const auto& d : output.liw_training) {
    text += json{{"city", d.city}, {"text", d.text}}.dump() + "\n";
  }
  emit(synth_files::kLiwTraining, text);

  text = "city,lat,lon\n";
  for (const auto& [city, c] : output.gazetteer.cities) {
    text += city + "," + io::format_double(c.lat) + "," + io::format_double(c.lon) + "\n";
  }
  emit(synth_files::kGazetteer, text);

  json truth;
  truth["reference_date"] = format_date(output.reference_date);
  truth["sharing_preference"] = output.truth.sharing_preference;
  truth["effect_sizes"] = output.truth.effect_sizes;
  truth["bots"] = output.truth.bots;
  json population = json::object();
  for (const auto& [id, p] : output.truth.population) population[id] = std::string(to_string(p));
  truth["population"] = population;
  emit(synth_files::kGroundTruth, truth.dump(2) + "\n");
  return written;
}

}  // namespace upf
