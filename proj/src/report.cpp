#include <filesystem>
#include <string>

#include "json.hpp"
#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/pipeline.hpp"

namespace upf {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kMetrics[] = {"accuracy", "precision", "recall", "f1"};

std::optional<ojson> read_optional(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    return ojson::parse(io::read_file(path));
  } catch (const ojson::exception& e) {
    throw DataError(path.filename().string() + ": malformed JSON (" + e.what() + ")");
  }
}

std::string cell(const ojson& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

ojson metric_row(ojson row, const ojson& source) {
  for (const char* m : kMetrics) row[m] = source.at(m);
  return row;
}

struct Table {
  std::vector<std::string> key_columns;
  ojson rows = ojson::array();
};

void render_table(std::string& md, const std::string& title, const Table& t, bool ran,
                  const std::string& note = "") {
  md += "## " + title + "\n\n";
  if (!ran) {
    md += "not run\n\n";
    return;
  }
  md += "|";
  for (const auto& k : t.key_columns) md += " " + k + " |";
  md += " Accuracy | Precision | Recall | F1 |\n|";
  for (std::size_t i = 0; i < t.key_columns.size() + 4; ++i) md += "---|";
  md += "\n";
  for (const auto& row : t.rows) {
    md += "|";
    for (const auto& k : t.key_columns) md += " " + cell(row.at(k)) + " |";
    for (const char* m : kMetrics) md += " " + cell(row.at(m)) + " |";
    md += "\n";
  }
  md += "\n";
  if (!note.empty()) md += note + "\n\n";
}

ojson section(bool ran, const Table& t) {
  if (!ran) return {{"status", "not run"}};
  return {{"status", "ok"}, {"rows", t.rows}};
}

}  // namespace

RenderedReport render_report(const fs::path& output_dir) {
  const fs::path eval_path = output_dir / artifacts::kEval;
  io::require_file(eval_path);
  const ojson eval = *read_optional(eval_path);
  const auto groups = read_optional(output_dir / artifacts::kGroups);
  const auto comparison = read_optional(output_dir / artifacts::kComparison);
  const auto importance = read_optional(output_dir / artifacts::kImportance);
  const auto ablation = read_optional(output_dir / artifacts::kAblation);
  const auto baseline = read_optional(output_dir / artifacts::kBaseline);

  RenderedReport out;
  ojson doc;
  std::string md = "# UPF fake news detection report\n\n";
  try {
    const ojson& protocol = eval.at("protocol");
    md += "Protocol: " + protocol.at("repetitions").dump() + " random splits, train fraction " +
          protocol.at("train_fraction").dump() + ", " + protocol.at("rows").dump() +
          " news rows, mean metrics with fake as the positive class.\n\n";
    doc["protocol"] = protocol;

    if (groups) {
      md += "## User groups\n\n| Group | Users | Before sampling |\n|---|---|---|\n";
      md += "| U(f) | " + std::to_string(groups->at("u_fake").size()) + " | " +
            groups->at("pre_sample_fake").dump() + " |\n";
      md += "| U(r) | " + std::to_string(groups->at("u_real").size()) + " | " +
            groups->at("pre_sample_real").dump() + " |\n\n";
      doc["groups"] = {{"u_fake", groups->at("u_fake").size()},
                       {"u_real", groups->at("u_real").size()},
                       {"pre_sample_fake", groups->at("pre_sample_fake")},
                       {"pre_sample_real", groups->at("pre_sample_real")}};
    }

    // Feature sets: UPF under the forest (or the first algorithm), then the
    // external baseline and its concatenation with UPF.
    Table sets{{"Feature set", "Algorithm"}};
    const ojson& algos = eval.at("algorithms");
    const ojson* upf_row = algos.empty() ? nullptr : &algos.front();
    for (const auto& a : algos) {
      if (a.at("short_name") == "rf") upf_row = &a;
    }
    if (upf_row) {
      sets.rows.push_back(metric_row({{"Feature set", "UPF"}, {"Algorithm", upf_row->at("algorithm")}},
                                     *upf_row));
    }
    std::string note;
    if (baseline) {
      const std::string name = baseline->at("name").get<std::string>();
      sets.rows.push_back(metric_row({{"Feature set", name}, {"Algorithm", baseline->at("algorithm")}},
                                     baseline->at("external")));
      if (!baseline->at("concatenated").is_null()) {
        sets.rows.push_back(
            metric_row({{"Feature set", name + "_UPF"}, {"Algorithm", baseline->at("algorithm")}},
                       baseline->at("concatenated")));
      }
    } else {
      note = "External baseline: not run";
    }
    render_table(md, "Feature set comparison", sets, true, note);
    doc["feature_sets"] = section(true, sets);
    doc["feature_sets"]["baseline"] = baseline ? "ok" : "not run";

    Table algo_table{{"Algorithm"}};
    for (const auto& a : algos) algo_table.rows.push_back(metric_row({{"Algorithm", a.at("algorithm")}}, a));
    render_table(md, "Algorithm comparison", algo_table, true);
    doc["algorithms"] = section(true, algo_table);

    Table group_table{{"Feature group"}};
    if (ablation) {
      for (const auto& g : ablation->at("groups")) {
        group_table.rows.push_back(metric_row({{"Feature group", g.at("feature_group")}}, g));
      }
    }
    render_table(md, "Feature group ablation", group_table, ablation.has_value(),
                 ablation ? "Algorithm: " + cell(ablation->at("algorithm")) : "");
    doc["feature_groups"] = section(ablation.has_value(), group_table);

    md += "## Group feature comparison\n\n";
    if (comparison) {
      md += "alpha = " + comparison->at("alpha").dump() + "; " +
            comparison->at("significant_count").dump() + " of " +
            comparison->at("tests_run").dump() + " tests significant.\n\n";
      md += "| Feature | Group | Mean U(f) | Mean U(r) | t | p | Significant |\n";
      md += "|---|---|---|---|---|---|---|\n";
      ojson rows = ojson::array();
      for (const auto& f : comparison->at("features")) {
        if (!f.contains("p")) continue;
        md += "| " + cell(f.at("feature")) + " | " + cell(f.at("group")) + " | " +
              cell(f.at("mean_fake")) + " | " + cell(f.at("mean_real")) + " | " + cell(f.at("t")) +
              " | " + cell(f.at("p")) + " | " + (f.at("significant").get<bool>() ? "yes" : "no") +
              " |\n";
        rows.push_back({{"feature", f.at("feature")},
                        {"p", f.at("p")},
                        {"significant", f.at("significant")}});
      }
      md += "\n";
      doc["comparison"] = {{"status", "ok"}, {"rows", rows}};
    } else {
      md += "not run\n\n";
      doc["comparison"] = {{"status", "not run"}};
    }

    md += "## Feature importance\n\n";
    if (importance) {
      md += "| Rank | Feature | Group | Importance |\n|---|---|---|---|\n";
      ojson rows = ojson::array();
      for (const auto& f : importance->at("features")) {
        md += "| " + cell(f.at("rank")) + " | " + cell(f.at("feature")) + " | " + cell(f.at("group")) +
              " | " + cell(f.at("importance")) + " |\n";
        rows.push_back(f);
      }
      md += "\n";
      doc["importance"] = {{"status", "ok"}, {"rows", rows}};
    } else {
      md += "not run\n\n";
      doc["importance"] = {{"status", "not run"}};
    }
  } catch (const ojson::exception& e) {
    throw DataError(std::string("report: unexpected artifact layout (") + e.what() + ")");
  }
  out.markdown = md;
  out.json = doc.dump(2) + "\n";
  return out;
}

}  // namespace upf
