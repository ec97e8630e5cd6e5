#include "upf/pipeline.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "json.hpp"
#include "upf/analysis.hpp"
#include "upf/bot_filter.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/rng.hpp"

namespace upf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr Stage kStages[] = {Stage::Synth,     Stage::Ingest,     Stage::FilterBots, Stage::Group,
                             Stage::Extract,   Stage::Compare,    Stage::TrainEval,
                             Stage::Importance, Stage::Ablate,    Stage::Baseline,   Stage::Report};

std::string trait_key(std::size_t t) { return std::string(kTraitNames[t]) + "_lexicon"; }

std::map<std::string, std::string> default_input_files() {
  std::map<std::string, std::string> m = {
      {"users", synth_files::kUsers},
      {"news", synth_files::kNews},
      {"shares", synth_files::kShares},
      {"tweets", synth_files::kTweets},
      {"bot_scores", synth_files::kBotScores},
      {"image_classes", synth_files::kImageClasses},
      {"age_lexicon", synth_files::kAgeLexicon},
      {"political_seeds", synth_files::kPoliticalSeeds},
      {"liw_training", synth_files::kLiwTraining},
      {"gazetteer", synth_files::kGazetteer},
      {"liw_vocabulary", "liw_vocabulary.txt"},
  };
  for (std::size_t t = 0; t < kTraitNames.size(); ++t) {
    m[trait_key(t)] = synth_files::trait_lexicon(kTraitNames[t]);
  }
  return m;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

// ---------------------------------------------------------------------------
// YAML helpers

template <class T>
T as(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config: field '" + key + "' has the wrong type");
  }
}

void reject_unknown(const YAML::Node& node, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  if (!node.IsMap()) throw ConfigError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("config: unknown field '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return p.is_absolute() ? p : base / p;
}

std::vector<ml::Algorithm> parse_algorithm_list(const YAML::Node& node) {
  std::vector<ml::Algorithm> out;
  auto add = [&](const std::string& text) {
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) out.push_back(ml::parse_algorithm(item));
    }
  };
  if (node.IsSequence()) {
    for (const auto& n : node) add(as<std::string>(n, "ml.algorithms"));
  } else {
    add(as<std::string>(node, "ml.algorithms"));
  }
  return out;
}

void parse_hyperparameters(const YAML::Node& node, ml::Hyperparameters& hp) {
  reject_unknown(node, "ml.hyperparameters",
                 {"max_depth", "min_samples_leaf", "forest_trees", "forest_max_features",
                  "logreg_l2", "logreg_tolerance", "logreg_max_epochs", "nb_variance_floor",
                  "svm_l2", "svm_epochs", "boost_rounds"});
  const std::string w = "ml.hyperparameters.";
  if (node["max_depth"]) hp.max_depth = as<std::size_t>(node["max_depth"], w + "max_depth");
  if (node["min_samples_leaf"]) {
    hp.min_samples_leaf = as<std::size_t>(node["min_samples_leaf"], w + "min_samples_leaf");
  }
  if (node["forest_trees"]) hp.forest_trees = as<std::size_t>(node["forest_trees"], w + "forest_trees");
  if (node["forest_max_features"]) {
    hp.forest_max_features = as<std::size_t>(node["forest_max_features"], w + "forest_max_features");
  }
  if (node["logreg_l2"]) hp.logreg_l2 = as<double>(node["logreg_l2"], w + "logreg_l2");
  if (node["logreg_tolerance"]) {
    hp.logreg_tolerance = as<double>(node["logreg_tolerance"], w + "logreg_tolerance");
  }
  if (node["logreg_max_epochs"]) {
    hp.logreg_max_epochs = as<std::size_t>(node["logreg_max_epochs"], w + "logreg_max_epochs");
  }
  if (node["nb_variance_floor"]) {
    hp.nb_variance_floor = as<double>(node["nb_variance_floor"], w + "nb_variance_floor");
  }
  if (node["svm_l2"]) hp.svm_l2 = as<double>(node["svm_l2"], w + "svm_l2");
  if (node["svm_epochs"]) hp.svm_epochs = as<std::size_t>(node["svm_epochs"], w + "svm_epochs");
  if (node["boost_rounds"]) hp.boost_rounds = as<std::size_t>(node["boost_rounds"], w + "boost_rounds");
}

// ---------------------------------------------------------------------------
// Artifact helpers

void write_json(const fs::path& path, const ojson& doc) { io::write_atomic(path, doc.dump(2) + "\n"); }

ojson read_json(const fs::path& path) {
  io::require_file(path);
  try {
    return ojson::parse(io::read_file(path));
  } catch (const ojson::exception& e) {
    throw DataError(path.filename().string() + ": malformed JSON (" + e.what() + ")");
  }
}

ojson number_or_string(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

ojson metrics_json(const ml::EvalResult& r) {
  return {{"accuracy", round6(r.accuracy)},
          {"precision", round6(r.precision)},
          {"recall", round6(r.recall)},
          {"f1", round6(r.f1)}};
}

ojson run_json(const ml::EvalResult& r) {
  ojson j = metrics_json(r);
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["tn"] = r.tn;
  j["fn"] = r.fn;
  if (r.precision_undefined) j["precision_undefined"] = true;
  if (r.recall_undefined) j["recall_undefined"] = true;
  if (r.f1_undefined) j["f1_undefined"] = true;
  return j;
}

std::string split_digest(const ml::HoldoutSplit& s) {
  std::string text;
  for (auto i : s.train) text += std::to_string(i) + ",";
  text += "|";
  for (auto i : s.test) text += std::to_string(i) + ",";
  return io::sha256_hex(text).substr(0, 16);
}

ojson holdout_json(const ml::HoldoutReport& r) {
  ojson j = metrics_json(r.mean);
  j["redraws"] = r.redraws;
  ojson runs = ojson::array();
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    ojson run = run_json(r.runs[i]);
    run["split"] = split_digest(r.splits[i]);
    runs.push_back(std::move(run));
  }
  j["runs"] = std::move(runs);
  return j;
}

std::string csv_header(const std::string& first, const Manifest& manifest,
                       const std::string& second = "") {
  std::string h = first;
  if (!second.empty()) h += "," + second;
  for (const auto& spec : manifest) h += "," + spec.name;
  return h + "\n";
}

// features.csv: news_id,label,<manifest>.
Dataset read_features_csv(const fs::path& path, const Manifest& manifest) {
  Dataset ds;
  ds.manifest = manifest;
  std::vector<std::vector<double>> rows;
  const std::string expected = csv_header("news_id", manifest, "label");
  const std::string name = path.filename().string();
  bool header = false;
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    if (!header) {
      if (std::string(line) + "\n" != expected) {
        throw DataError(loc + ": header does not match the configured feature manifest");
      }
      header = true;
      return;
    }
    auto cols = io::split_csv_line(line);
    if (cols.size() != manifest.size() + 2) throw DataError(loc + ": wrong column count");
    ds.row_ids.push_back(cols[0]);
    try {
      ds.y.push_back(parse_label(cols[1]) == Label::Fake ? 1 : 0);
    } catch (const DataError& e) {
      throw DataError(loc + ": " + e.what());
    }
    std::vector<double> v;
    for (std::size_t j = 2; j < cols.size(); ++j) v.push_back(io::parse_double(cols[j], loc));
    rows.push_back(std::move(v));
  });
  if (!header) throw DataError(name + ": empty file");
  ds.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(manifest.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < manifest.size(); ++j) {
      ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  ds.validate();
  return ds;
}

std::string features_csv_text(const Dataset& ds) {
  std::string out = csv_header("news_id", ds.manifest, "label");
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    out += ds.row_ids[i];
    out += ds.y[i] == 1 ? ",fake" : ",real";
    for (std::size_t j = 0; j < ds.cols(); ++j) {
      out += "," + io::format_double(ds.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    out += "\n";
  }
  return out;
}

std::map<std::string, std::vector<double>> read_user_features(const fs::path& path,
                                                              const Manifest& manifest) {
  std::map<std::string, std::vector<double>> out;
  const std::string expected = csv_header("user_id", manifest);
  const std::string name = path.filename().string();
  bool header = false;
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    if (!header) {
      if (std::string(line) + "\n" != expected) {
        throw DataError(loc + ": header does not match the configured feature manifest");
      }
      header = true;
      return;
    }
    auto cols = io::split_csv_line(line);
    if (cols.size() != manifest.size() + 1) throw DataError(loc + ": wrong column count");
    std::vector<double> v;
    for (std::size_t j = 1; j < cols.size(); ++j) v.push_back(io::parse_double(cols[j], loc));
    out[cols[0]] = std::move(v);
  });
  if (!header) throw DataError(name + ": empty file");
  return out;
}

GroupSelection read_groups(const fs::path& path) {
  const ojson doc = read_json(path);
  GroupSelection sel;
  try {
    for (const auto& id : doc.at("u_fake")) sel.u_fake.insert(id.get<std::string>());
    for (const auto& id : doc.at("u_real")) sel.u_real.insert(id.get<std::string>());
    for (const auto& [id, p] : doc.at("provenance").items()) {
      sel.provenance[id] = parse_provenance(p.get<std::string>());
    }
    sel.pre_sample_fake = doc.at("pre_sample_fake").get<std::size_t>();
    sel.pre_sample_real = doc.at("pre_sample_real").get<std::size_t>();
  } catch (const ojson::exception& e) {
    throw DataError(path.filename().string() + ": " + e.what());
  }
  return sel;
}

std::set<std::string> read_word_list(const fs::path& path) {
  std::set<std::string> words;
  io::for_each_line(path, [&](std::string_view line, std::size_t) {
    for (auto& tok : tokenize(line)) words.insert(std::move(tok));
  });
  return words;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

InputPaths InputPaths::under(const fs::path& dir) {
  const auto names = default_input_files();
  InputPaths p;
  p.users = dir / names.at("users");
  p.news = dir / names.at("news");
  p.shares = dir / names.at("shares");
  p.tweets = dir / names.at("tweets");
  p.bot_scores = dir / names.at("bot_scores");
  p.image_classes = dir / names.at("image_classes");
  p.age_lexicon = dir / names.at("age_lexicon");
  for (std::size_t t = 0; t < 5; ++t) p.trait_lexica[t] = dir / names.at(trait_key(t));
  p.political_seeds = dir / names.at("political_seeds");
  p.liw_training = dir / names.at("liw_training");
  p.gazetteer = dir / names.at("gazetteer");
  p.liw_vocabulary = dir / names.at("liw_vocabulary");
  return p;
}

std::vector<std::string> input_names() {
  std::vector<std::string> out;
  for (const auto& [k, v] : default_input_files()) out.push_back(k);
  return out;
}

InputPaths PipelineConfig::inputs() const {
  InputPaths p = InputPaths::under(input_dir);
  auto pick = [&](const char* key, fs::path& dst) {
    if (auto it = input_overrides.find(key); it != input_overrides.end()) {
      dst = resolve(input_dir, it->second);
    }
  };
  pick("users", p.users);
  pick("news", p.news);
  pick("shares", p.shares);
  pick("tweets", p.tweets);
  pick("bot_scores", p.bot_scores);
  pick("image_classes", p.image_classes);
  pick("age_lexicon", p.age_lexicon);
  for (std::size_t t = 0; t < 5; ++t) pick(trait_key(t).c_str(), p.trait_lexica[t]);
  pick("political_seeds", p.political_seeds);
  pick("liw_training", p.liw_training);
  pick("gazetteer", p.gazetteer);
  pick("liw_vocabulary", p.liw_vocabulary);
  return p;
}

void PipelineConfig::validate() const {
  if (!(bot_threshold >= 0.0 && bot_threshold <= 1.0)) {
    throw ConfigError("bot_threshold must lie in [0, 1]");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  grouping.validate();
  if (ml.algorithms.empty()) throw ConfigError("ml.algorithms must not be empty");
  if (ml.repetitions < 1) throw ConfigError("ml.repetitions must be >= 1");
  if (!(ml.train_fraction > 0.0 && ml.train_fraction < 1.0)) {
    throw ConfigError("ml.train_fraction must lie in (0, 1)");
  }
  const auto& hp = ml.hyperparameters;
  if (hp.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (hp.forest_trees < 1) throw ConfigError("forest_trees must be >= 1");
  if (!(hp.logreg_l2 >= 0.0) || !(hp.svm_l2 > 0.0) || !(hp.nb_variance_floor > 0.0)) {
    throw ConfigError("regularization constants and the variance floor must be positive");
  }
  if (hp.boost_rounds < 1) throw ConfigError("boost_rounds must be >= 1");
  for (const auto& [k, v] : input_overrides) {
    const auto names = input_names();
    if (std::find(names.begin(), names.end(), k) == names.end()) {
      throw ConfigError("unknown input '" + k + "'");
    }
  }
  if (synth) synth->validate();
}

std::uint64_t PipelineConfig::grouping_seed() const { return derive_seed(seed, 101); }
std::uint64_t PipelineConfig::holdout_seed() const { return derive_seed(seed, 102); }
std::uint64_t PipelineConfig::importance_seed() const { return derive_seed(seed, 103); }

std::string PipelineConfig::hash() const {
  ojson j;
  j["seed"] = seed;
  j["reference_date"] = format_date(reference_date);
  j["bot_threshold"] = bot_threshold;
  j["alpha"] = alpha;
  j["grouping"] = {{"k", grouping.k}, {"t", grouping.t}};
  j["features"] = {{"include_location", features.include_location},
                   {"image_pca_dims", features.image_pca_dims}};
  ojson algos = ojson::array();
  for (auto a : ml.algorithms) algos.push_back(std::string(ml::short_name(a)));
  const auto& hp = ml.hyperparameters;
  j["ml"] = {{"algorithms", algos},
             {"repetitions", ml.repetitions},
             {"train_fraction", ml.train_fraction},
             {"ablation_algorithm", std::string(ml::short_name(ml.ablation_algorithm))},
             {"baseline_algorithm", std::string(ml::short_name(ml.baseline_algorithm))},
             {"baseline_matrix",
              ml.baseline_matrix ? ojson(ml.baseline_matrix->filename().string()) : ojson()},
             {"concat_upf", ml.concat_upf},
             {"hyperparameters",
              {{"max_depth", hp.max_depth},
               {"min_samples_leaf", hp.min_samples_leaf},
               {"forest_trees", hp.forest_trees},
               {"forest_max_features", hp.forest_max_features},
               {"logreg_l2", hp.logreg_l2},
               {"logreg_tolerance", hp.logreg_tolerance},
               {"logreg_max_epochs", hp.logreg_max_epochs},
               {"nb_variance_floor", hp.nb_variance_floor},
               {"svm_l2", hp.svm_l2},
               {"svm_epochs", hp.svm_epochs},
               {"boost_rounds", hp.boost_rounds}}}};
  ojson inputs = ojson::object();
  for (const auto& [k, v] : input_overrides) inputs[k] = v.filename().string();
  j["inputs"] = inputs;
  if (synth) {
    ojson s;
    s["n_users"] = synth->n_users;
    s["n_news"] = synth->n_news;
    s["n_shares"] = synth->n_shares;
    s["fake_news_fraction"] = synth->fake_news_fraction;
    s["bot_fraction"] = synth->bot_fraction;
    s["fake_prone_fraction"] = synth->fake_prone_fraction;
    s["sharing_preference"] = synth->sharing_preference;
    s["effect_sizes"] = synth->effect_sizes;
    s["seed"] = synth->seed;
    s["reference_date"] = format_date(synth->reference_date);
    s["tweets_per_user"] = synth->tweets_per_user;
    s["words_per_tweet"] = synth->words_per_tweet;
    s["image_classes"] = synth->image_classes;
    j["synth"] = s;
  }
  return io::sha256_hex(j.dump());
}

PipelineConfig pipeline_config_from_yaml_text(const std::string& text, const fs::path& base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: malformed YAML (") + e.what() + ")");
  }
  PipelineConfig c;
  c.input_dir = base_dir / "data";
  c.output_dir = base_dir / "out";
  if (root.IsNull()) return c;
  reject_unknown(root, "",
                 {"seed", "input_dir", "output_dir", "inputs", "reference_date", "bot_threshold",
                  "alpha", "grouping", "features", "ml", "synth"});
  if (root["seed"]) c.seed = as<std::uint64_t>(root["seed"], "seed");
  if (root["input_dir"]) c.input_dir = resolve(base_dir, as<std::string>(root["input_dir"], "input_dir"));
  if (root["output_dir"]) {
    c.output_dir = resolve(base_dir, as<std::string>(root["output_dir"], "output_dir"));
  }
  if (const auto inputs = root["inputs"]) {
    if (!inputs.IsMap()) throw ConfigError("config: 'inputs' must be a mapping");
    for (const auto& kv : inputs) {
      const auto key = kv.first.as<std::string>();
      c.input_overrides[key] = as<std::string>(kv.second, "inputs." + key);
    }
  }
  if (root["reference_date"]) {
    try {
      c.reference_date = parse_date(as<std::string>(root["reference_date"], "reference_date"));
    } catch (const DataError& e) {
      throw ConfigError(std::string("config: reference_date: ") + e.what());
    }
  }
  if (root["bot_threshold"]) c.bot_threshold = as<double>(root["bot_threshold"], "bot_threshold");
  if (root["alpha"]) c.alpha = as<double>(root["alpha"], "alpha");
  if (const auto g = root["grouping"]) {
    reject_unknown(g, "grouping", {"k", "t"});
    if (g["k"]) c.grouping.k = as<std::size_t>(g["k"], "grouping.k");
    if (g["t"]) c.grouping.t = as<double>(g["t"], "grouping.t");
  }
  if (const auto f = root["features"]) {
    reject_unknown(f, "features", {"include_location", "image_pca_dims"});
    if (f["include_location"]) {
      c.features.include_location = as<bool>(f["include_location"], "features.include_location");
    }
    if (f["image_pca_dims"]) {
      c.features.image_pca_dims = as<std::size_t>(f["image_pca_dims"], "features.image_pca_dims");
    }
  }
  if (const auto m = root["ml"]) {
    reject_unknown(m, "ml",
                   {"algorithms", "repetitions", "train_fraction", "ablation_algorithm",
                    "baseline_algorithm", "baseline_matrix", "concat_upf", "hyperparameters"});
    if (m["algorithms"]) c.ml.algorithms = parse_algorithm_list(m["algorithms"]);
    if (m["repetitions"]) c.ml.repetitions = as<std::size_t>(m["repetitions"], "ml.repetitions");
    if (m["train_fraction"]) c.ml.train_fraction = as<double>(m["train_fraction"], "ml.train_fraction");
    if (m["ablation_algorithm"]) {
      c.ml.ablation_algorithm =
          ml::parse_algorithm(as<std::string>(m["ablation_algorithm"], "ml.ablation_algorithm"));
    }
    if (m["baseline_algorithm"]) {
      c.ml.baseline_algorithm =
          ml::parse_algorithm(as<std::string>(m["baseline_algorithm"], "ml.baseline_algorithm"));
    }
    if (m["baseline_matrix"]) {
      c.ml.baseline_matrix =
          resolve(base_dir, as<std::string>(m["baseline_matrix"], "ml.baseline_matrix"));
    }
    if (m["concat_upf"]) c.ml.concat_upf = as<bool>(m["concat_upf"], "ml.concat_upf");
    if (m["hyperparameters"]) parse_hyperparameters(m["hyperparameters"], c.ml.hyperparameters);
  }
  if (const auto s = root["synth"]) {
    c.synth = synth_config_from_yaml_text(YAML::Dump(s));
    c.synth_seed_explicit = s.IsMap() && static_cast<bool>(s["seed"]);
    if (!c.synth_seed_explicit) c.synth->seed = c.seed;
  }
  c.validate();
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  io::require_file(path);
  return pipeline_config_from_yaml_text(io::read_file(path), path.parent_path());
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::Synth: return "synth";
    case Stage::Ingest: return "ingest";
    case Stage::FilterBots: return "filter-bots";
    case Stage::Group: return "group";
    case Stage::Extract: return "extract";
    case Stage::Compare: return "compare";
    case Stage::TrainEval: return "train-eval";
    case Stage::Importance: return "importance";
    case Stage::Ablate: return "ablate";
    case Stage::Baseline: return "baseline";
    case Stage::Report: return "report";
  }
  return "?";
}

Stage parse_stage(std::string_view text) {
  for (auto s : kStages) {
    if (stage_name(s) == text) return s;
  }
  throw ConfigError("unknown stage '" + std::string(text) + "'");
}

std::span<const Stage> all_stages() { return kStages; }

// ---------------------------------------------------------------------------
// DesignFeaturizer

DesignFeaturizer::DesignFeaturizer(const FeatureExtractor& extractor)
    : extractor_(&extractor), rows_(design_rows(extractor.corpus())) {}

Dataset DesignFeaturizer::operator()(std::span<const std::size_t> train_rows) {
  std::vector<std::size_t> key(train_rows.begin(), train_rows.end());
  if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  std::vector<std::string> fit_news;
  for (auto r : train_rows) {
    if (r >= rows_.news_ids.size()) throw InvariantError("train row out of range");
    fit_news.push_back(rows_.news_ids[r]);
  }
  if (fit_news.empty()) throw InvariantError("empty train split");
  Dataset ds = build_design_matrix(*extractor_, fit_news).dataset;
  return cache_.emplace(std::move(key), std::move(ds)).first->second;
}

ml::SplitFeaturizer DesignFeaturizer::as_function() {
  return [this](std::span<const std::size_t> rows) { return (*this)(rows); };
}

// ---------------------------------------------------------------------------
// Stage context

class StageContext {
 public:
  explicit StageContext(const PipelineConfig& config) : config_(config), paths_(config.inputs()) {}

  const InputPaths& paths() const { return paths_; }
  fs::path out(const char* name) const { return config_.output_dir / name; }

  const LoadedCorpus& raw() {
    if (!raw_) {
      raw_ = load_corpus({paths_.users, paths_.news, paths_.shares, paths_.tweets},
                         config_.reference_date);
    }
    return *raw_;
  }

  void set_filtered(Corpus c) {
    filtered_ = std::move(c);
    reset_features();
  }

  const Corpus& filtered() {
    if (!filtered_) {
      const ojson doc = read_json(out(artifacts::kFilter));
      std::vector<std::string> removed;
      try {
        for (const auto& id : doc.at("removed_users")) removed.push_back(id.get<std::string>());
      } catch (const ojson::exception& e) {
        throw DataError(std::string(artifacts::kFilter) + ": " + e.what());
      }
      filtered_ = remove_users(raw().corpus, removed);
    }
    return *filtered_;
  }

  const ImplicitModels& models() {
    if (!models_) {
      ImplicitModels m;
      m.age = load_lexicon(paths_.age_lexicon);
      for (std::size_t t = 0; t < 5; ++t) m.traits.lexica[t] = load_lexicon(paths_.trait_lexica[t]);
      m.seeds = load_political_seeds(paths_.political_seeds);
      const auto docs = load_liw_training(paths_.liw_training);
      const Gazetteer gazetteer = load_gazetteer(paths_.gazetteer);
      const auto vocabulary = fs::exists(paths_.liw_vocabulary) ? read_word_list(paths_.liw_vocabulary)
                                                                : select_liw_vocabulary(docs);
      m.liw = train_liw(docs, vocabulary, gazetteer);
      models_ = std::move(m);
    }
    return *models_;
  }

  const ImageClassTable* images() {
    if (config_.features.image_pca_dims == 0) return nullptr;
    if (!images_) images_ = load_image_classes(paths_.image_classes);
    return &*images_;
  }

  const FeatureExtractor& extractor() {
    if (!extractor_) {
      const Corpus& corpus = filtered();
      const ImplicitModels& m = models();
      extractor_ = std::make_unique<FeatureExtractor>(corpus, m, images(), config_.features);
    }
    return *extractor_;
  }

  DesignFeaturizer& featurizer() {
    if (!featurizer_) featurizer_ = std::make_unique<DesignFeaturizer>(extractor());
    return *featurizer_;
  }

  // Files behind models() and images(), for stage manifests.
  std::vector<fs::path> feature_inputs() const {
    std::vector<fs::path> files = corpus_inputs();
    files.push_back(paths_.age_lexicon);
    for (const auto& p : paths_.trait_lexica) files.push_back(p);
    files.push_back(paths_.political_seeds);
    files.push_back(paths_.liw_training);
    files.push_back(paths_.gazetteer);
    if (fs::exists(paths_.liw_vocabulary)) files.push_back(paths_.liw_vocabulary);
    if (config_.features.image_pca_dims > 0) files.push_back(paths_.image_classes);
    return files;
  }

  std::vector<fs::path> corpus_inputs() const {
    return {paths_.users, paths_.news, paths_.shares, paths_.tweets};
  }

  fs::path groups() const {
    return config_.groups_file ? *config_.groups_file : out(artifacts::kGroups);
  }

 private:
  void reset_features() {
    featurizer_.reset();
    extractor_.reset();
  }

  const PipelineConfig& config_;
  InputPaths paths_;
  std::optional<LoadedCorpus> raw_;
  std::optional<Corpus> filtered_;
  std::optional<ImplicitModels> models_;
  std::optional<ImageClassTable> images_;
  std::unique_ptr<FeatureExtractor> extractor_;
  std::unique_ptr<DesignFeaturizer> featurizer_;
};

namespace {

std::string display_path(const PipelineConfig& config, const fs::path& p) {
  const fs::path rel = p.lexically_relative(config.output_dir);
  if (!rel.empty() && *rel.begin() != "..") return rel.generic_string();
  return p.filename().string();
}

void write_stage_manifest(const PipelineConfig& config, Stage stage,
                          const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
  auto listing = [&](const std::vector<fs::path>& files) {
    ojson arr = ojson::array();
    for (const auto& f : files) {
      arr.push_back({{"path", display_path(config, f)}, {"sha256", io::sha256_file(f)}});
    }
    return arr;
  };
  ojson doc;
  doc["stage"] = std::string(stage_name(stage));
  doc["version"] = std::string(kToolVersion);
  doc["config_hash"] = config.hash();
  doc["seed"] = config.seed;
  doc["inputs"] = listing(inputs);
  doc["outputs"] = listing(outputs);
  write_json(config.output_dir / (std::string(stage_name(stage)) + ".manifest.json"), doc);
}

ml::HoldoutOptions holdout_options(const PipelineConfig& c) {
  return {c.ml.train_fraction, c.ml.repetitions, c.holdout_seed()};
}

// Cross-checks features.csv against the in-memory design rows.
void check_design_rows(StageContext& ctx, const PipelineConfig& c) {
  const Dataset on_disk = read_features_csv(ctx.out(artifacts::kFeatures), feature_manifest(c.features));
  const DesignRows& rows = ctx.featurizer().rows();
  if (on_disk.row_ids != rows.news_ids || on_disk.y != rows.labels) {
    throw DataError(std::string(artifacts::kFeatures) +
                    " is stale: its rows differ from the filtered corpus; rerun extract");
  }
}

void stage_synth(const PipelineConfig& c, StageContext&) {
  if (!c.synth) throw ConfigError("synth stage needs a 'synth' section in the config");
  const SynthOutput out = generate(*c.synth);
  const auto files = write_synth(out, c.input_dir);
  fs::create_directories(c.output_dir);
  write_stage_manifest(c, Stage::Synth, {}, files);
}

void stage_ingest(const PipelineConfig& c, StageContext& ctx) {
  const LoadedCorpus& lc = ctx.raw();
  std::size_t fake = 0;
  for (const auto& [id, item] : lc.corpus.news()) fake += item.label == Label::Fake;
  ojson doc;
  doc["reference_date"] = format_date(c.reference_date);
  doc["users"] = lc.stats.users;
  doc["news"] = lc.stats.news;
  doc["fake_news"] = fake;
  doc["real_news"] = lc.stats.news - fake;
  doc["shares"] = lc.corpus.shares().size();
  doc["tweets"] = lc.stats.tweets;
  doc["duplicate_shares_dropped"] = lc.stats.duplicate_shares_dropped;
  doc["unknown_keys"] = lc.stats.unknown_keys;
  const fs::path out = ctx.out(artifacts::kIngest);
  write_json(out, doc);
  write_stage_manifest(c, Stage::Ingest, ctx.corpus_inputs(), {out});
}

void stage_filter(const PipelineConfig& c, StageContext& ctx) {
  io::require_file(ctx.out(artifacts::kIngest));
  const BotScoreTable table = load_bot_scores(ctx.paths().bot_scores);
  FilterResult result = filter_bots(ctx.raw().corpus, table, c.bot_threshold);
  const FilterStats& s = result.stats;
  ojson doc;
  doc["threshold"] = c.bot_threshold;
  doc["scored_users"] = table.scores.size();
  doc["removed_count"] = s.removed_count;
  doc["kept_count"] = s.kept_count;
  doc["unscored_kept"] = s.unscored_kept;
  doc["fake_sharers"] = s.fake_sharers;
  doc["real_sharers"] = s.real_sharers;
  doc["removed_fake_sharers"] = s.removed_fake_sharers;
  doc["removed_real_sharers"] = s.removed_real_sharers;
  doc["removed_ratio_fake_sharers"] = s.removed_ratio_fake_sharers;
  doc["removed_ratio_real_sharers"] = s.removed_ratio_real_sharers;
  doc["removed_users"] = s.removed_users;
  const fs::path out = ctx.out(artifacts::kFilter);
  write_json(out, doc);
  ctx.set_filtered(std::move(result.corpus));
  auto inputs = ctx.corpus_inputs();
  inputs.push_back(ctx.paths().bot_scores);
  inputs.push_back(ctx.out(artifacts::kIngest));
  write_stage_manifest(c, Stage::FilterBots, inputs, {out});
}

void stage_group(const PipelineConfig& c, StageContext& ctx) {
  io::require_file(ctx.out(artifacts::kFilter));
  const Corpus& corpus = ctx.filtered();
  GroupingConfig gc = c.grouping;
  gc.sample_seed = c.grouping_seed();
  const UserPartition part = partition_users(corpus);
  const GroupSelection sel = select_groups(corpus, gc);
  ojson doc;
  doc["k"] = gc.k;
  doc["t"] = gc.t;
  doc["partition"] = {{"only_fake", part.only_fake.size()},
                      {"only_real", part.only_real.size()},
                      {"fake_and_real", part.fake_and_real.size()}};
  doc["pre_sample_fake"] = sel.pre_sample_fake;
  doc["pre_sample_real"] = sel.pre_sample_real;
  doc["u_fake"] = sel.u_fake;
  doc["u_real"] = sel.u_real;
  ojson prov = ojson::object();
  for (const auto& [id, p] : sel.provenance) prov[id] = std::string(to_string(p));
  doc["provenance"] = prov;
  const fs::path out = ctx.out(artifacts::kGroups);
  write_json(out, doc);
  auto inputs = ctx.corpus_inputs();
  inputs.push_back(ctx.out(artifacts::kFilter));
  write_stage_manifest(c, Stage::Group, inputs, {out});
}

void stage_extract(const PipelineConfig& c, StageContext& ctx) {
  io::require_file(ctx.groups());
  io::require_file(ctx.out(artifacts::kFilter));
  const GroupSelection sel = read_groups(ctx.groups());
  const FeatureExtractor& ex = ctx.extractor();
  const DesignMatrix dm = build_design_matrix(ex);
  const fs::path features = ctx.out(artifacts::kFeatures);
  io::write_atomic(features, features_csv_text(dm.dataset));

  const PcaModel* pca = dm.pca ? &*dm.pca : nullptr;
  std::string users = csv_header("user_id", ex.manifest());
  std::set<std::string> grouped(sel.u_fake.begin(), sel.u_fake.end());
  grouped.insert(sel.u_real.begin(), sel.u_real.end());
  for (const auto& id : grouped) {
    if (!ex.corpus().has_user(id)) {
      throw DataError(std::string(artifacts::kGroups) + " names unknown user " + id +
                      "; rerun group");
    }
    const UserFeatureVector v = ex.user_vector(id, pca);
    users += id;
    for (double x : v.values) users += "," + io::format_double(x);
    users += "\n";
  }
  const fs::path user_features = ctx.out(artifacts::kUserFeatures);
  io::write_atomic(user_features, users);

  ojson doc;
  ojson manifest = ojson::array();
  for (const auto& spec : ex.manifest()) {
    manifest.push_back({{"name", spec.name}, {"group", std::string(to_string(spec.group))}});
  }
  doc["manifest"] = manifest;
  doc["news_rows"] = dm.dataset.rows();
  doc["fake_rows"] = std::count(dm.dataset.y.begin(), dm.dataset.y.end(), 1);
  doc["skipped_news"] = dm.skipped_news;
  doc["grouped_users"] = grouped.size();
  const ExtractionStats& st = ex.stats();
  doc["stats"] = {{"users_profiled", st.users_profiled},
                  {"users_without_tweets", st.users_without_tweets},
                  {"users_without_image", st.users_without_image},
                  {"image_rows_unmatched", st.image_rows_unmatched}};
  if (dm.pca) {
    std::vector<double> ev(dm.pca->explained_variance.data(),
                           dm.pca->explained_variance.data() + dm.pca->explained_variance.size());
    doc["image_pca"] = {{"explained_variance", ev}, {"total_variance", dm.pca->total_variance}};
  }
  const fs::path out = ctx.out(artifacts::kExtract);
  write_json(out, doc);
  auto inputs = ctx.feature_inputs();
  inputs.push_back(ctx.out(artifacts::kFilter));
  inputs.push_back(ctx.groups());
  write_stage_manifest(c, Stage::Extract, inputs, {features, user_features, out});
}

void stage_compare(const PipelineConfig& c, StageContext& ctx) {
  const fs::path groups = ctx.groups();
  const fs::path user_features = ctx.out(artifacts::kUserFeatures);
  io::require_file(groups);
  io::require_file(user_features);
  const GroupSelection sel = read_groups(groups);
  const Manifest manifest = feature_manifest(c.features);
  const auto vectors = read_user_features(user_features, manifest);
  const ComparisonReport report = compare_groups(sel, vectors, manifest, c.alpha);

  auto quartiles = [](const std::optional<QuartileSummary>& q) -> ojson {
    if (!q) return nullptr;
    return {{"min", q->min}, {"q1", q->q1}, {"median", q->median}, {"q3", q->q3}, {"max", q->max}};
  };
  ojson doc;
  doc["alpha"] = report.alpha;
  doc["n_fake"] = report.n_fake;
  doc["n_real"] = report.n_real;
  doc["tests_run"] = report.tests_run;
  doc["significant_count"] = report.significant_count;
  ojson features = ojson::array();
  for (const auto& f : report.features) {
    ojson j;
    j["feature"] = f.feature;
    j["group"] = std::string(to_string(f.group));
    j["significant"] = f.significant;
    if (f.ttest) {
      j["t"] = number_or_string(f.ttest->t_statistic);
      j["df"] = number_or_string(f.ttest->degrees_of_freedom);
      j["p"] = f.ttest->p_value;
      j["mean_fake"] = f.ttest->mean_a;
      j["mean_real"] = f.ttest->mean_b;
    }
    if (f.quartiles_fake) j["quartiles_fake"] = quartiles(f.quartiles_fake);
    if (f.quartiles_real) j["quartiles_real"] = quartiles(f.quartiles_real);
    if (!f.counts_fake.empty() || !f.counts_real.empty()) {
      j["counts_fake"] = f.counts_fake;
      j["counts_real"] = f.counts_real;
    }
    features.push_back(std::move(j));
  }
  doc["features"] = std::move(features);
  const fs::path out = ctx.out(artifacts::kComparison);
  write_json(out, doc);
  write_stage_manifest(c, Stage::Compare, {groups, user_features}, {out});
}

ojson protocol_json(const PipelineConfig& c, std::size_t rows) {
  return {{"repetitions", c.ml.repetitions},
          {"train_fraction", c.ml.train_fraction},
          {"holdout_seed", c.holdout_seed()},
          {"rows", rows}};
}

void stage_train_eval(const PipelineConfig& c, StageContext& ctx) {
  io::require_file(ctx.out(artifacts::kFeatures));
  check_design_rows(ctx, c);
  DesignFeaturizer& feat = ctx.featurizer();
  const auto fn = feat.as_function();
  ojson algos = ojson::array();
  for (auto a : c.ml.algorithms) {
    const ml::HoldoutReport r =
        ml::repeated_holdout(fn, feat.rows().labels, a, c.ml.hyperparameters, holdout_options(c));
    ojson j;
    j["algorithm"] = std::string(ml::display_name(a));
    j["short_name"] = std::string(ml::short_name(a));
    j.update(holdout_json(r));
    algos.push_back(std::move(j));
  }
  ojson doc;
  doc["feature_set"] = "UPF";
  doc["protocol"] = protocol_json(c, feat.rows().news_ids.size());
  doc["algorithms"] = std::move(algos);
  const fs::path out = ctx.out(artifacts::kEval);
  write_json(out, doc);
  auto inputs = ctx.feature_inputs();
  inputs.push_back(ctx.out(artifacts::kFilter));
  inputs.push_back(ctx.out(artifacts::kFeatures));
  write_stage_manifest(c, Stage::TrainEval, inputs, {out});
}

void stage_importance(const PipelineConfig& c, StageContext& ctx) {
  const fs::path features = ctx.out(artifacts::kFeatures);
  io::require_file(features);
  const Dataset ds = read_features_csv(features, feature_manifest(c.features));
  const ml::TrainedModel forest =
      ml::train(ml::Algorithm::RandomForest, ds, c.ml.hyperparameters, c.importance_seed());
  const ml::ImportanceReport imp = ml::gini_importance(forest);
  ojson ranked = ojson::array();
  for (std::size_t r = 0; r < imp.ranking.size(); ++r) {
    const std::size_t j = imp.ranking[r];
    ranked.push_back({{"rank", r + 1},
                      {"feature", imp.manifest[j].name},
                      {"group", std::string(to_string(imp.manifest[j].group))},
                      {"importance", imp.importance[j]}});
  }
  ojson doc;
  doc["algorithm"] = "RF";
  doc["trees"] = c.ml.hyperparameters.forest_trees;
  doc["seed"] = c.importance_seed();
  doc["features"] = std::move(ranked);
  const fs::path out = ctx.out(artifacts::kImportance);
  write_json(out, doc);
  write_stage_manifest(c, Stage::Importance, {features}, {out});
}

void stage_ablate(const PipelineConfig& c, StageContext& ctx) {
  io::require_file(ctx.out(artifacts::kFeatures));
  check_design_rows(ctx, c);
  DesignFeaturizer& feat = ctx.featurizer();
  const Manifest manifest = feature_manifest(c.features);
  const ml::AblationReport rep =
      ml::feature_group_ablation(feat.as_function(), feat.rows().labels, manifest,
                                 c.ml.ablation_algorithm, c.ml.hyperparameters, holdout_options(c));
  ojson groups = ojson::array();
  for (auto g : {ml::AblationGroup::All, ml::AblationGroup::Explicit, ml::AblationGroup::Implicit}) {
    const auto& r = rep.groups.at(g);
    std::size_t columns = 0;
    for (const auto& spec : manifest) {
      columns += g == ml::AblationGroup::All ||
                 (g == ml::AblationGroup::Explicit && spec.group == FeatureGroup::Explicit) ||
                 (g == ml::AblationGroup::Implicit && spec.group == FeatureGroup::Implicit);
    }
    ojson j;
    j["feature_group"] = std::string(ml::to_string(g));
    j["columns"] = columns;
    j.update(holdout_json(r));
    groups.push_back(std::move(j));
  }
  ojson doc;
  doc["algorithm"] = std::string(ml::display_name(c.ml.ablation_algorithm));
  doc["protocol"] = protocol_json(c, feat.rows().news_ids.size());
  doc["groups"] = std::move(groups);
  const fs::path out = ctx.out(artifacts::kAblation);
  write_json(out, doc);
  auto inputs = ctx.feature_inputs();
  inputs.push_back(ctx.out(artifacts::kFilter));
  inputs.push_back(ctx.out(artifacts::kFeatures));
  write_stage_manifest(c, Stage::Ablate, inputs, {out});
}

void stage_baseline(const PipelineConfig& c, StageContext& ctx) {
  if (!c.ml.baseline_matrix) throw ConfigError("baseline stage needs --matrix or ml.baseline_matrix");
  const fs::path matrix = *c.ml.baseline_matrix;
  io::require_file(matrix);
  io::require_file(ctx.out(artifacts::kFeatures));
  check_design_rows(ctx, c);
  DesignFeaturizer& feat = ctx.featurizer();
  const auto& rows = feat.rows();
  const auto opts = holdout_options(c);
  const auto algo = c.ml.baseline_algorithm;
  ojson doc;
  doc["matrix"] = matrix.filename().string();
  doc["name"] = matrix.stem().string();
  doc["algorithm"] = std::string(ml::display_name(algo));
  doc["protocol"] = protocol_json(c, rows.news_ids.size());
  if (c.ml.concat_upf) {
    const ml::BaselineReport r = ml::external_baseline_eval(
        matrix, feat.as_function(), rows.news_ids, rows.labels, algo, c.ml.hyperparameters, opts);
    doc["external_columns"] = r.external_columns;
    doc["external"] = holdout_json(r.external);
    doc["concatenated_columns"] = r.concatenated_columns;
    doc["concatenated"] = holdout_json(r.concatenated);
  } else {
    const Dataset ext = ml::load_external_matrix(matrix, rows.news_ids, rows.labels);
    doc["external_columns"] = ext.cols();
    doc["external"] = holdout_json(ml::repeated_holdout(ext, algo, c.ml.hyperparameters, opts));
    doc["concatenated"] = nullptr;
  }
  const fs::path out = ctx.out(artifacts::kBaseline);
  write_json(out, doc);
  auto inputs = ctx.feature_inputs();
  inputs.push_back(matrix);
  inputs.push_back(ctx.out(artifacts::kFilter));
  inputs.push_back(ctx.out(artifacts::kFeatures));
  write_stage_manifest(c, Stage::Baseline, inputs, {out});
}

void stage_report(const PipelineConfig& c, StageContext& ctx) {
  const RenderedReport r = render_report(c.output_dir);
  const fs::path md = ctx.out(artifacts::kReportMd);
  const fs::path js = ctx.out(artifacts::kReportJson);
  io::write_atomic(md, r.markdown);
  io::write_atomic(js, r.json);
  std::vector<fs::path> inputs;
  for (const char* name : {artifacts::kEval, artifacts::kGroups, artifacts::kComparison,
                           artifacts::kImportance, artifacts::kAblation, artifacts::kBaseline}) {
    if (fs::exists(ctx.out(name))) inputs.push_back(ctx.out(name));
  }
  write_stage_manifest(c, Stage::Report, inputs, {md, js});
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), context_(std::make_unique<StageContext>(config_)) {
  config_.validate();
}

Pipeline::~Pipeline() = default;

void Pipeline::run(Stage stage) {
  if (stage != Stage::Synth) fs::create_directories(config_.output_dir);
  StageContext& ctx = *context_;
  switch (stage) {
    case Stage::Synth: stage_synth(config_, ctx); break;
    case Stage::Ingest: stage_ingest(config_, ctx); break;
    case Stage::FilterBots: stage_filter(config_, ctx); break;
    case Stage::Group: stage_group(config_, ctx); break;
    case Stage::Extract: stage_extract(config_, ctx); break;
    case Stage::Compare: stage_compare(config_, ctx); break;
    case Stage::TrainEval: stage_train_eval(config_, ctx); break;
    case Stage::Importance: stage_importance(config_, ctx); break;
    case Stage::Ablate: stage_ablate(config_, ctx); break;
    case Stage::Baseline: stage_baseline(config_, ctx); break;
    case Stage::Report: stage_report(config_, ctx); break;
  }
}

void Pipeline::run_all() {
  for (auto s : kStages) {
    if (s == Stage::Synth && !config_.synth) continue;
    if (s == Stage::Baseline && !config_.ml.baseline_matrix) continue;
    run(s);
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingInputError*>(&e)) return 2;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataError*>(&e)) return 3;
  return 4;
}

}  // namespace upf
