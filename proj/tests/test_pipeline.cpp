#include <sys/wait.h>

#include <cstdlib>

#include "doctest.h"
#include "json.hpp"
#include "support.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/pipeline.hpp"

using namespace upf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kSmallConfig = R"(seed: 5
grouping:
  k: 200
  t: 0.2
features:
  image_pca_dims: 4
ml:
  algorithms: rf,lr
  repetitions: 2
  hyperparameters:
    forest_trees: 15
synth:
  n_users: 240
  n_news: 100
  n_shares: 1800
  image_classes: 12
  tweets_per_user: 3
  bot_fraction: 0.1
)";

PipelineConfig small_config(const fs::path& base) {
  testing::write_text(base / "config.yaml", kSmallConfig);
  return load_pipeline_config(base / "config.yaml");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(UPFKIT_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) out[e.path().filename().string()] = testing::read_text(e.path());
  }
  return out;
}

}  // namespace

TEST_CASE("config defaults and strict keys") {
  const PipelineConfig d = pipeline_config_from_yaml_text("", "/base");
  CHECK(d.input_dir == fs::path("/base/data"));
  CHECK(d.output_dir == fs::path("/base/out"));
  CHECK(d.grouping.k == 10000);
  CHECK(d.grouping.t == 0.2);
  CHECK(d.ml.repetitions == 5);
  CHECK(d.ml.algorithms.size() == 4);
  CHECK_FALSE(d.synth.has_value());

  CHECK_THROWS_AS(pipeline_config_from_yaml_text("sed: 1\n", "."), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_yaml_text("grouping:\n  kk: 1\n", "."), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_yaml_text("grouping:\n  t: 0.6\n", "."), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_yaml_text("ml:\n  algorithms: rf,gbm\n", "."), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_yaml_text("seed: [1\n", "."), ConfigError);
  CHECK_THROWS_AS(pipeline_config_from_yaml_text("inputs:\n  userz: a.jsonl\n", "."), ConfigError);

  const PipelineConfig l = pipeline_config_from_yaml_text("ml:\n  algorithms: [nb, ada]\n", ".");
  CHECK(l.ml.algorithms == std::vector<ml::Algorithm>{ml::Algorithm::NaiveBayes, ml::Algorithm::AdaBoost});
}

TEST_CASE("synth seed follows the global seed unless set") {
  const PipelineConfig a = pipeline_config_from_yaml_text("seed: 9\nsynth:\n  n_users: 100\n", ".");
  CHECK(a.synth->seed == 9);
  const PipelineConfig b = pipeline_config_from_yaml_text("seed: 9\nsynth:\n  seed: 3\n", ".");
  CHECK(b.synth->seed == 3);
}

TEST_CASE("config hash ignores directories and tracks settings") {
  const PipelineConfig a = pipeline_config_from_yaml_text("seed: 1\n", "/x");
  const PipelineConfig b = pipeline_config_from_yaml_text("seed: 1\n", "/y");
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 64);
  const PipelineConfig c = pipeline_config_from_yaml_text("seed: 1\ngrouping:\n  k: 5\n", "/x");
  CHECK(a.hash() != c.hash());
  CHECK(a.grouping_seed() != a.holdout_seed());
  CHECK(a.holdout_seed() != a.importance_seed());
}

TEST_CASE("stage names and exit codes") {
  for (auto s : all_stages()) CHECK(parse_stage(stage_name(s)) == s);
  CHECK_THROWS_AS(parse_stage("train"), ConfigError);
  CHECK(exit_code_for(MissingInputError("x")) == 2);
  CHECK(exit_code_for(ConfigError("x")) == 3);
  CHECK(exit_code_for(DataError("x")) == 3);
  CHECK(exit_code_for(InvariantError("x")) == 4);
}

TEST_CASE("stages run alone reproduce the in-process run") {
  testing::TempDir base;
  PipelineConfig cfg = small_config(base.path());
  {
    Pipeline p(cfg);
    p.run_all();
  }
  const auto together = snapshot(cfg.output_dir);
  for (const char* name : {artifacts::kIngest, artifacts::kFilter, artifacts::kGroups, artifacts::kFeatures,
                           artifacts::kComparison, artifacts::kEval, artifacts::kImportance,
                           artifacts::kAblation, artifacts::kReportMd, artifacts::kReportJson}) {
    CHECK(together.count(name) == 1);
  }
  CHECK(together.count(artifacts::kBaseline) == 0);

  PipelineConfig solo = cfg;
  solo.output_dir = base / "solo";
  for (auto s : all_stages()) {
    if (s == Stage::Synth || s == Stage::Baseline) continue;
    Pipeline p(solo);
    p.run(s);
  }
  const auto separate = snapshot(solo.output_dir);
  for (const auto& [name, text] : together) {
    CAPTURE(name);
    if (name == "synth.manifest.json") continue;
    REQUIRE(separate.count(name) == 1);
    if (name.find(".manifest.json") != std::string::npos) {
      // Output paths are relative, so manifests match too.
      CHECK(json::parse(text) == json::parse(separate.at(name)));
    } else {
      CHECK(text == separate.at(name));
    }
  }

  SUBCASE("manifests carry hashes of their outputs") {
    const json m = json::parse(together.at("train-eval.manifest.json"));
    CHECK(m.at("config_hash") == cfg.hash());
    CHECK(m.at("version") == std::string(kToolVersion));
    for (const auto& o : m.at("outputs")) {
      CHECK(o.at("sha256") == io::sha256_file(cfg.output_dir / o.at("path").get<std::string>()));
    }
  }

  SUBCASE("report quotes eval.json verbatim") {
    const json eval = json::parse(together.at(artifacts::kEval));
    const std::string& md = together.at(artifacts::kReportMd);
    for (const auto& a : eval.at("algorithms")) {
      CHECK(md.find(a.at("f1").dump()) != std::string::npos);
      CHECK(md.find(a.at("accuracy").dump()) != std::string::npos);
    }
    CHECK(md.find("External baseline: not run") != std::string::npos);
    const json report = json::parse(together.at(artifacts::kReportJson));
    CHECK(report.at("feature_sets").at("baseline") == "not run");
  }
}

TEST_CASE("missing upstream artifacts") {
  testing::TempDir base;
  PipelineConfig cfg = small_config(base.path());
  Pipeline(cfg).run(Stage::Synth);
  CHECK_THROWS_AS(Pipeline(cfg).run(Stage::Group), MissingInputError);
  CHECK_THROWS_AS(Pipeline(cfg).run(Stage::TrainEval), MissingInputError);
  CHECK_THROWS_AS(Pipeline(cfg).run(Stage::Report), MissingInputError);
  CHECK_THROWS_AS(Pipeline(cfg).run(Stage::Baseline), ConfigError);
  fs::remove(cfg.input_dir / "users.jsonl");
  CHECK_THROWS_AS(Pipeline(cfg).run(Stage::Ingest), MissingInputError);
}

TEST_CASE("baseline stage with an external matrix") {
  testing::TempDir base;
  PipelineConfig cfg = small_config(base.path());
  Pipeline(cfg).run(Stage::Synth);
  for (auto s : {Stage::Ingest, Stage::FilterBots, Stage::Group, Stage::Extract, Stage::TrainEval}) {
    Pipeline(cfg).run(s);
  }
  // External features: a noisy copy of the label for every design row.
  std::string csv = "news_id,ext_signal,ext_noise\n";
  Rng rng(1);
  std::ifstream in(cfg.output_dir / artifacts::kFeatures);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto cols = io::split_csv_line(line);
    csv += cols[0] + "," + io::format_double((cols[1] == "fake" ? 1.0 : 0.0) + 0.3 * rng.normal()) + "," +
           io::format_double(rng.normal()) + "\n";
  }
  testing::write_text(base / "ext.csv", csv);
  cfg.ml.baseline_matrix = base / "ext.csv";
  Pipeline(cfg).run(Stage::Baseline);
  Pipeline(cfg).run(Stage::Report);
  const json b = json::parse(testing::read_text(cfg.output_dir / artifacts::kBaseline));
  CHECK(b.at("external").at("f1").get<double>() > 0.8);
  CHECK_FALSE(b.at("concatenated").is_null());
  const std::string md = testing::read_text(cfg.output_dir / artifacts::kReportMd);
  CHECK(md.find("_UPF") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  testing::TempDir base;
  testing::write_text(base / "config.yaml", kSmallConfig);
  const std::string c = "-c " + (base / "config.yaml").string();
  CHECK(run_cli("--version") == 0);
  CHECK(run_cli("") == 3);
  CHECK(run_cli("frobnicate") == 3);
  CHECK(run_cli("group " + c) == 2);
  CHECK(run_cli("group " + c + " --t 0.7") == 3);
  CHECK(run_cli("train-eval " + c + " --algo rf,xgb") == 3);
  CHECK(run_cli("ingest -c " + (base / "absent.yaml").string()) == 2);
  CHECK(run_cli("synth " + c) == 0);
  CHECK(run_cli("all " + c + " --reps 1 --algo lr") == 0);
  CHECK(fs::exists(base / "out" / artifacts::kReportMd));
  const json eval = json::parse(testing::read_text(base / "out" / artifacts::kEval));
  CHECK(eval.at("algorithms").size() == 1);
  testing::write_text(base / "out" / artifacts::kGroups, "{broken");
  CHECK(run_cli("extract " + c) == 3);
}
