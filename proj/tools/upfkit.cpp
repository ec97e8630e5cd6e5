#include <yaml-cpp/yaml.h>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/pipeline.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> input_dir;
  std::optional<std::size_t> k;
  std::optional<double> t;
  std::optional<double> bot_threshold;
  std::vector<std::string> algo;
  std::optional<std::size_t> reps;
  std::optional<double> train_frac;
  std::optional<std::string> matrix;
  std::optional<bool> concat_upf;
  std::optional<std::string> groups;
};

bool is_bare_synth_config(const std::string& text) {
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root.IsMap()) return false;
    for (const auto& kv : root) {
      const auto key = kv.first.as<std::string>();
      if (key == "synth" || key == "ml" || key == "grouping" || key == "features" ||
          key == "output_dir" || key == "input_dir") {
        return false;
      }
    }
    return true;
  } catch (const YAML::Exception&) {
    return false;
  }
}

upf::PipelineConfig build_config(const Overrides& o, upf::Stage stage) {
  namespace fs = std::filesystem;
  upf::PipelineConfig c;
  if (o.config.empty()) {
    c = upf::pipeline_config_from_yaml_text("", fs::current_path());
  } else {
    upf::io::require_file(o.config);
    const std::string text = upf::io::read_file(o.config);
    if (stage == upf::Stage::Synth && is_bare_synth_config(text)) {
      c = upf::pipeline_config_from_yaml_text("", fs::current_path());
      c.synth = upf::synth_config_from_yaml_text(text);
      c.synth_seed_explicit = YAML::Load(text)["seed"].IsDefined();
      if (!c.synth_seed_explicit) c.synth->seed = c.seed;
    } else {
      c = upf::pipeline_config_from_yaml_text(text, fs::path(o.config).parent_path());
    }
  }
  if (o.seed) {
    c.seed = *o.seed;
    if (c.synth && !c.synth_seed_explicit) c.synth->seed = *o.seed;
  }
  if (o.input_dir) c.input_dir = *o.input_dir;
  if (o.out) {
    c.output_dir = *o.out;
    // synth writes the corpus files into --out.
    if (stage == upf::Stage::Synth) c.input_dir = *o.out;
  }
  if (o.k) c.grouping.k = *o.k;
  if (o.t) c.grouping.t = *o.t;
  if (o.bot_threshold) c.bot_threshold = *o.bot_threshold;
  if (!o.algo.empty()) {
    c.ml.algorithms.clear();
    for (const auto& item : o.algo) {
      std::stringstream ss(item);
      std::string name;
      while (std::getline(ss, name, ',')) {
        if (!name.empty()) c.ml.algorithms.push_back(upf::ml::parse_algorithm(name));
      }
    }
    // A single algorithm also drives the ablation and baseline stages.
    if (c.ml.algorithms.size() == 1) {
      c.ml.ablation_algorithm = c.ml.algorithms.front();
      c.ml.baseline_algorithm = c.ml.algorithms.front();
    }
  }
  if (o.reps) c.ml.repetitions = *o.reps;
  if (o.train_frac) c.ml.train_fraction = *o.train_frac;
  if (o.matrix) c.ml.baseline_matrix = *o.matrix;
  if (o.concat_upf) c.ml.concat_upf = *o.concat_upf;
  if (o.groups) c.groups_file = *o.groups;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"User-profile features for fake news detection: staged pipeline"};
  app.set_version_flag("--version", std::string(upf::kToolVersion));
  app.require_subcommand(1, 1);

  Overrides o;
  app.add_option("-c,--config", o.config, "Pipeline YAML (for synth: a pipeline or synth YAML)");
  app.add_option("--seed", o.seed, "Global seed");
  app.add_option("-o,--out", o.out, "Output directory (for synth: where corpus files go)");
  app.add_option("--input-dir", o.input_dir, "Directory holding the input files");
  app.add_option("--k", o.k, "Top-K size for pure sharers");
  app.add_option("--t", o.t, "FR band width");
  app.add_option("--bot-threshold", o.bot_threshold, "Remove users with bot score above this");
  app.add_option("--algo", o.algo, "Algorithms: rf,svm,dt,lr,nb,ada")->delimiter(',');
  app.add_option("--reps", o.reps, "Holdout repetitions");
  app.add_option("--train-frac", o.train_frac, "Train fraction per split");
  app.add_option("--matrix", o.matrix, "External feature matrix CSV for the baseline stage");
  app.add_option("--groups", o.groups, "groups.json to read in extract and compare");
  auto* concat = app.add_flag("--concat-upf,!--no-concat-upf", "Also evaluate external|UPF");

  std::vector<std::string> names;
  for (auto s : upf::all_stages()) names.emplace_back(upf::stage_name(s));
  names.emplace_back("all");
  for (const auto& name : names) {
    app.add_subcommand(name, name == "all" ? "Run every stage in order" : "Run the " + name + " stage")
        ->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 3;
  }
  if (concat->count() > 0) o.concat_upf = concat->as<bool>();

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const upf::Stage stage = command == "all" ? upf::Stage::Ingest : upf::parse_stage(command);
    upf::Pipeline pipeline(build_config(o, stage));
    if (command == "all") {
      pipeline.run_all();
    } else {
      pipeline.run(stage);
    }
    std::cout << "ok: " << command << " -> " << pipeline.config().output_dir.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "upfkit " << command << ": " << e.what() << "\n";
    return upf::exit_code_for(e);
  }
}
