#include "upf/features.hpp"

#include <cctype>
#include <cmath>

#include "json.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"

namespace upf {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) != 0; }

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

void TokenBag::add(std::string_view text) {
  for (auto& tok : tokenize(text)) {
    ++counts[std::move(tok)];
    ++total;
  }
}

TokenBag bag_of_tokens(std::span<const std::string> texts) {
  TokenBag bag;
  for (const auto& t : texts) bag.add(t);
  return bag;
}

void Lexicon::validate() const {
  if (!std::isfinite(intercept)) throw DataError("lexicon intercept is not finite");
  if (weights.empty()) throw DataError("lexicon has no words");
  for (const auto& [w, v] : weights) {
    if (!std::isfinite(v)) throw DataError("lexicon weight for '" + w + "' is not finite");
  }
}

double Lexicon::apply(const TokenBag& bag) const {
  if (bag.total == 0) return intercept;
  double sum = 0.0;
  for (const auto& [tok, count] : bag.counts) {
    auto it = weights.find(tok);
    if (it != weights.end()) sum += it->second * static_cast<double>(count);
  }
  return intercept + sum / static_cast<double>(bag.total);
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  Lexicon lex;
  bool have_intercept = false;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) throw DataError(loc + ": expected \"word<TAB>weight\"");
    const std::string_view key = line.substr(0, tab);
    const double value = io::parse_double(line.substr(tab + 1), loc);
    if (!have_intercept) {
      if (key != "INTERCEPT") throw DataError(loc + ": first line must be INTERCEPT");
      lex.intercept = value;
      have_intercept = true;
      return;
    }
    std::string word(key);
    for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (!lex.weights.emplace(word, value).second) {
      throw DataError(loc + ": duplicate word '" + word + "'");
    }
  });
  if (!have_intercept) throw DataError(name + ": missing INTERCEPT line");
  try {
    lex.validate();
  } catch (const DataError& e) {
    throw DataError(name + ": " + e.what());
  }
  return lex;
}

double predict_age(std::span<const std::string> tweets, const Lexicon& lexicon) {
  return lexicon.apply(bag_of_tokens(tweets));
}

std::array<double, 5> predict_personality(std::span<const std::string> tweets,
                                          const TraitLexica& lexica) {
  const TokenBag bag = bag_of_tokens(tweets);
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = lexica.lexica[i].apply(bag);
  return out;
}

void PoliticalSeeds::validate() const {
  if (left.empty() || right.empty()) throw DataError("political seed sets must be nonempty");
  for (const auto& t : left) {
    if (right.count(t)) throw DataError("seed token '" + t + "' is both left and right");
  }
}

PoliticalSeeds load_political_seeds(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.filename().string() + ": malformed JSON (" + e.what() + ")");
  }
  PoliticalSeeds seeds;
  for (const char* side : {"left", "right"}) {
    if (!doc.contains(side) || !doc[side].is_array()) {
      throw DataError(path.filename().string() + ": missing array \"" + side + "\"");
    }
    auto& dst = std::string_view(side) == "left" ? seeds.left : seeds.right;
    for (const auto& tok : doc[side]) {
      if (!tok.is_string()) throw DataError(path.filename().string() + ": seeds must be strings");
      std::string s = tok.get<std::string>();
      for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      dst.insert(std::move(s));
    }
  }
  seeds.validate();
  return seeds;
}

std::string_view to_string(BiasCategory c) {
  switch (c) {
    case BiasCategory::Left: return "left";
    case BiasCategory::Neutral: return "neutral";
    case BiasCategory::Right: return "right";
  }
  return "?";
}

double political_bias_score(std::span<const std::string> interests, const PoliticalSeeds& seeds) {
  std::int64_t left = 0;
  std::int64_t right = 0;
  for (const auto& tok : interests) {
    if (seeds.left.count(tok)) {
      ++left;
    } else if (seeds.right.count(tok)) {
      ++right;
    }
  }
  if (left + right == 0) return 0.0;
  return static_cast<double>(left - right) / static_cast<double>(left + right);
}

BiasCategory bias_category(double score) {
  if (score >= 0.5) return BiasCategory::Left;
  if (score <= -0.5) return BiasCategory::Right;
  return BiasCategory::Neutral;
}

ExplicitFeatures extract_explicit(const User& user, Date reference_date) {
  if (user.registered_at > reference_date) {
    throw DataError("user " + user.user_id + " registered after the reference date");
  }
  ExplicitFeatures f;
  f.verified = user.verified ? 1 : 0;
  f.register_age_days = (reference_date - user.registered_at).count();
  f.status_count = user.status_count;
  f.favor_count = user.favor_count;
  f.follower_count = user.follower_count;
  f.following_count = user.following_count;
  return f;
}

ImageClassTable load_image_classes(const std::filesystem::path& path) {
  ImageClassTable table;
  bool header = false;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    auto cols = io::split_csv_line(line);
    if (!header) {
      if (cols.size() < 2 || cols[0] != "user_id") {
        throw DataError(loc + ": expected header \"user_id,c0,...\"");
      }
      table.dims = cols.size() - 1;
      header = true;
      return;
    }
    if (cols.size() != table.dims + 1) {
      throw DataError(loc + ": expected " + std::to_string(table.dims + 1) + " columns, got " +
                      std::to_string(cols.size()));
    }
    std::vector<double> v(table.dims);
    for (std::size_t j = 0; j < table.dims; ++j) {
      v[j] = io::parse_double(cols[j + 1], loc);
      if (!std::isfinite(v[j])) throw DataError(loc + ": non-finite value");
    }
    if (!table.vectors.emplace(cols[0], std::move(v)).second) {
      throw DataError(loc + ": duplicate user_id " + cols[0]);
    }
  });
  if (!header) throw DataError(name + ": empty file");
  return table;
}

Manifest feature_manifest(const FeatureConfig& config) {
  Manifest m;
  for (const char* name : {"verified", "register_age_days", "status_count", "favor_count",
                           "follower_count", "following_count"}) {
    m.push_back({name, FeatureGroup::Explicit});
  }
  m.push_back({"age", FeatureGroup::Implicit});
  for (auto trait : kTraitNames) m.push_back({std::string(trait), FeatureGroup::Implicit});
  m.push_back({"bias_score", FeatureGroup::Implicit});
  if (config.include_location) {
    m.push_back({"location_lat", FeatureGroup::Implicit});
    m.push_back({"location_lon", FeatureGroup::Implicit});
  }
  for (std::size_t i = 1; i <= config.image_pca_dims; ++i) {
    m.push_back({"image_pca_" + std::to_string(i), FeatureGroup::Implicit});
  }
  return m;
}

namespace {

ImplicitFeatures implicit_without_image(const User& user, std::span<const std::string> tweets,
                                        const ImplicitModels& models) {
  ImplicitFeatures f;
  const TokenBag bag = bag_of_tokens(tweets);
  f.age_years = models.age.apply(bag);
  for (std::size_t i = 0; i < f.big5.size(); ++i) f.big5[i] = models.traits.lexica[i].apply(bag);
  f.bias_score = political_bias_score(user.interest_tokens, models.seeds);
  f.bias_category = bias_category(f.bias_score);
  const LocationPrediction loc = predict_location(tweets, models.liw);
  f.city = loc.city;
  f.location_lat = loc.coordinates.lat;
  f.location_lon = loc.coordinates.lon;
  return f;
}

std::vector<double> project_image(const std::vector<double>* image, const PcaModel* pca,
                                  std::size_t image_dims) {
  if (!pca) throw InvariantError("image PCA model required but not fit");
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(image_dims));
  if (image) {
    if (image->size() != image_dims) throw DataError("image vector has the wrong dimension");
    v = Eigen::Map<const Eigen::VectorXd>(image->data(), static_cast<Eigen::Index>(image->size()));
  }
  const Eigen::VectorXd p = pca->project(v);
  return {p.data(), p.data() + p.size()};
}

std::vector<double> assemble(const ExplicitFeatures& e, const ImplicitFeatures& i,
                             const FeatureConfig& config) {
  std::vector<double> v = {static_cast<double>(e.verified),
                           static_cast<double>(e.register_age_days),
                           static_cast<double>(e.status_count),
                           static_cast<double>(e.favor_count),
                           static_cast<double>(e.follower_count),
                           static_cast<double>(e.following_count),
                           i.age_years};
  v.insert(v.end(), i.big5.begin(), i.big5.end());
  v.push_back(i.bias_score);
  if (config.include_location) {
    v.push_back(i.location_lat);
    v.push_back(i.location_lon);
  }
  if (i.image_pca.size() != config.image_pca_dims) {
    throw InvariantError("image PCA width does not match the feature config");
  }
  v.insert(v.end(), i.image_pca.begin(), i.image_pca.end());
  return v;
}

}  // namespace

ImplicitFeatures extract_implicit(const User& user, std::span<const std::string> tweets,
                                  const std::vector<double>* image, const ImplicitModels& models,
                                  const PcaModel* pca, std::size_t image_dims) {
  ImplicitFeatures f = implicit_without_image(user, tweets, models);
  if (pca) f.image_pca = project_image(image, pca, image_dims);
  return f;
}

UserFeatureVector user_feature_vector(const User& user, std::span<const std::string> tweets,
                                      const std::vector<double>* image,
                                      const ImplicitModels& models, const PcaModel* pca,
                                      Date reference_date, const FeatureConfig& config) {
  const ExplicitFeatures e = extract_explicit(user, reference_date);
  ImplicitFeatures i = implicit_without_image(user, tweets, models);
  if (config.image_pca_dims > 0) {
    if (!pca || pca->out_dim() != config.image_pca_dims) {
      throw InvariantError("image PCA model does not match image_pca_dims");
    }
    i.image_pca = project_image(image, pca, pca->input_dim());
  }
  UserFeatureVector out;
  out.values = assemble(e, i, config);
  out.manifest = std::make_shared<const Manifest>(feature_manifest(config));
  return out;
}

NewsFeatureVector aggregate_upf(const std::string& news_id,
                                std::span<const UserFeatureVector> sharers) {
  if (sharers.empty()) throw InvariantError("news " + news_id + " has no sharers");
  const std::size_t width = sharers.front().values.size();
  for (const auto& s : sharers) {
    if (s.values.size() != width) throw InvariantError("sharer vectors differ in width");
    if (s.manifest && sharers.front().manifest && *s.manifest != *sharers.front().manifest) {
      throw InvariantError("sharer vectors use different manifests");
    }
  }
  NewsFeatureVector out;
  out.news_id = news_id;
  out.sharer_count = sharers.size();
  out.values.assign(width, 0.0);
  for (const auto& s : sharers) {
    for (std::size_t j = 0; j < width; ++j) out.values[j] += s.values[j];
  }
  for (auto& v : out.values) v /= static_cast<double>(sharers.size());
  return out;
}

FeatureExtractor::FeatureExtractor(const Corpus& corpus, const ImplicitModels& models,
                                   const ImageClassTable* images, FeatureConfig config)
    : corpus_(&corpus),
      config_(config),
      manifest_(std::make_shared<const Manifest>(feature_manifest(config))) {
  if (config_.image_pca_dims > 0) {
    if (!images) throw ConfigError("image_pca_dims > 0 requires an image class table");
    image_dims_ = images->dims;
    if (config_.image_pca_dims > image_dims_) {
      throw ConfigError("image_pca_dims exceeds the number of image classes");
    }
  }
  for (const auto& [id, user] : corpus.users()) {
    if (corpus.news_shared_by(id).empty()) continue;
    Profile p;
    const auto& tweets = corpus.tweets_of(id);
    p.explicit_features = extract_explicit(user, corpus.reference_date());
    p.implicit_features = implicit_without_image(user, tweets, models);
    if (tweets.empty()) ++stats_.users_without_tweets;
    if (config_.image_pca_dims > 0) {
      auto it = images->vectors.find(id);
      if (it != images->vectors.end()) {
        p.image = &it->second;
      } else {
        ++stats_.users_without_image;
      }
    }
    profiles_.emplace(id, std::move(p));
  }
  stats_.users_profiled = profiles_.size();
  if (config_.image_pca_dims > 0) {
    for (const auto& [id, _] : images->vectors) {
      if (!profiles_.count(id)) ++stats_.image_rows_unmatched;
    }
  }
}

const FeatureExtractor::Profile& FeatureExtractor::profile(const std::string& user_id) const {
  auto it = profiles_.find(user_id);
  if (it == profiles_.end()) {
    throw InvariantError("user " + user_id + " has no profile (unknown or never shared news)");
  }
  return it->second;
}

const ImplicitFeatures& FeatureExtractor::implicit_base(const std::string& user_id) const {
  return profile(user_id).implicit_features;
}

const ExplicitFeatures& FeatureExtractor::explicit_features(const std::string& user_id) const {
  return profile(user_id).explicit_features;
}

std::optional<PcaModel> FeatureExtractor::fit_image_pca(
    std::span<const std::string> user_ids) const {
  if (config_.image_pca_dims == 0) return std::nullopt;
  std::vector<const std::vector<double>*> rows;
  for (const auto& id : user_ids) {
    const Profile& p = profile(id);
    if (p.image) rows.push_back(p.image);
  }
  if (rows.size() < config_.image_pca_dims) {
    throw InvariantError("only " + std::to_string(rows.size()) +
                         " users with image vectors; need at least image_pca_dims = " +
                         std::to_string(config_.image_pca_dims));
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()),
                       static_cast<Eigen::Index>(image_dims_));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < image_dims_; ++j) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*rows[i])[j];
    }
  }
  return fit_pca(data, config_.image_pca_dims);
}

UserFeatureVector FeatureExtractor::user_vector(const std::string& user_id,
                                                const PcaModel* pca) const {
  const Profile& p = profile(user_id);
  ImplicitFeatures implicit_features = p.implicit_features;
  if (config_.image_pca_dims > 0) {
    if (!pca || pca->out_dim() != config_.image_pca_dims) {
      throw InvariantError("image PCA model does not match image_pca_dims");
    }
    implicit_features.image_pca = project_image(p.image, pca, image_dims_);
  }
  return {assemble(p.explicit_features, implicit_features, config_), manifest_};
}

DesignRows design_rows(const Corpus& corpus) {
  DesignRows rows;
  for (const auto& [id, item] : corpus.news()) {
    if (corpus.sharers_of(id).empty()) {
      rows.skipped.push_back(id);
      continue;
    }
    rows.news_ids.push_back(id);
    rows.labels.push_back(item.label == Label::Fake ? 1 : 0);
  }
  return rows;
}

DesignMatrix build_design_matrix(const FeatureExtractor& extractor,
                                 std::span<const std::string> pca_fit_news) {
  const Corpus& corpus = extractor.corpus();
  const DesignRows rows = design_rows(corpus);
  if (rows.news_ids.empty()) throw InvariantError("every news item lacks sharers");

  DesignMatrix out;
  out.skipped_news = rows.skipped;
  if (extractor.config().image_pca_dims > 0) {
    std::set<std::string> fit_users;
    const auto& fit_news = pca_fit_news.empty() ? std::span<const std::string>(rows.news_ids)
                                                : pca_fit_news;
    for (const auto& news_id : fit_news) {
      for (const auto& u : corpus.sharers_of(news_id)) fit_users.insert(u);
    }
    const std::vector<std::string> ids(fit_users.begin(), fit_users.end());
    out.pca = extractor.fit_image_pca(ids);
  }
  const PcaModel* pca = out.pca ? &*out.pca : nullptr;

  std::map<std::string, UserFeatureVector> cache;
  auto vector_of = [&](const std::string& user_id) -> const UserFeatureVector& {
    auto it = cache.find(user_id);
    if (it == cache.end()) it = cache.emplace(user_id, extractor.user_vector(user_id, pca)).first;
    return it->second;
  };

  Dataset& ds = out.dataset;
  ds.manifest = extractor.manifest();
  ds.X.resize(static_cast<Eigen::Index>(rows.news_ids.size()),
              static_cast<Eigen::Index>(ds.manifest.size()));
  ds.y = rows.labels;
  ds.row_ids = rows.news_ids;
  std::vector<UserFeatureVector> sharers;
  for (std::size_t r = 0; r < rows.news_ids.size(); ++r) {
    sharers.clear();
    for (const auto& u : corpus.sharers_of(rows.news_ids[r])) sharers.push_back(vector_of(u));
    const NewsFeatureVector upf = aggregate_upf(rows.news_ids[r], sharers);
    for (std::size_t j = 0; j < upf.values.size(); ++j) {
      ds.X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = upf.values[j];
    }
  }
  ds.validate();
  return out;
}

}  // namespace upf
