#include "upf/liw.hpp"

#include <cmath>

#include "json.hpp"
#include "upf/errors.hpp"
#include "upf/features.hpp"
#include "upf/io.hpp"

namespace upf {

Gazetteer load_gazetteer(const std::filesystem::path& path) {
  Gazetteer g;
  bool header = false;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    auto cols = io::split_csv_line(line);
    if (!header) {
      if (cols.size() != 3 || cols[0] != "city" || cols[1] != "lat" || cols[2] != "lon") {
        throw DataError(loc + ": expected header \"city,lat,lon\"");
      }
      header = true;
      return;
    }
    if (cols.size() != 3) throw DataError(loc + ": expected 3 columns");
    const Coordinates c{io::parse_double(cols[1], loc), io::parse_double(cols[2], loc)};
    if (!(c.lat >= -90.0 && c.lat <= 90.0 && c.lon >= -180.0 && c.lon <= 180.0)) {
      throw DataError(loc + ": coordinates out of range");
    }
    if (!g.cities.emplace(cols[0], c).second) throw DataError(loc + ": duplicate city " + cols[0]);
  });
  return g;
}

std::vector<LiwDoc> load_liw_training(const std::filesystem::path& path) {
  std::vector<LiwDoc> docs;
  const std::string name = path.filename().string();
  io::for_each_line(path, [&](std::string_view line, std::size_t n) {
    const std::string loc = name + ":" + std::to_string(n);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(loc + ": malformed JSON");
    }
    if (!obj.is_object() || !obj.contains("city") || !obj.contains("text") ||
        !obj["city"].is_string() || !obj["text"].is_string()) {
      throw DataError(loc + ": expected {\"city\": string, \"text\": string}");
    }
    docs.push_back({obj["city"].get<std::string>(), obj["text"].get<std::string>()});
  });
  return docs;
}

std::set<std::string> select_liw_vocabulary(std::span<const LiwDoc> docs, std::size_t min_count,
                                            double min_share) {
  std::map<std::string, std::map<std::string, std::size_t>> by_word;
  for (const auto& doc : docs) {
    for (auto& tok : tokenize(doc.text)) ++by_word[tok][doc.city];
  }
  std::set<std::string> vocab;
  for (const auto& [word, per_city] : by_word) {
    std::size_t total = 0;
    std::size_t best = 0;
    for (const auto& [city, c] : per_city) {
      total += c;
      best = std::max(best, c);
    }
    if (total >= min_count &&
        static_cast<double>(best) >= min_share * static_cast<double>(total)) {
      vocab.insert(word);
    }
  }
  return vocab;
}

LiwModel train_liw(std::span<const LiwDoc> docs, const std::set<std::string>& vocabulary,
                   const Gazetteer& gazetteer) {
  if (vocabulary.empty()) throw InvariantError("LIW vocabulary is empty");
  if (docs.empty()) throw InvariantError("LIW training set is empty");

  std::map<std::string, std::size_t> doc_count;
  for (const auto& d : docs) ++doc_count[d.city];

  LiwModel model;
  for (const auto& [city, _] : doc_count) {
    auto it = gazetteer.cities.find(city);
    if (it == gazetteer.cities.end()) throw DataError("city '" + city + "' missing from gazetteer");
    model.cities.push_back(city);
    model.coordinates.push_back(it->second);
  }
  const std::size_t k = model.cities.size();
  std::map<std::string, std::size_t> city_index;
  for (std::size_t c = 0; c < k; ++c) city_index[model.cities[c]] = c;

  std::map<std::string, std::vector<double>> counts;
  for (const auto& w : vocabulary) counts[w].assign(k, 0.0);
  std::vector<double> totals(k, 0.0);
  for (const auto& d : docs) {
    const std::size_t c = city_index.at(d.city);
    for (const auto& tok : tokenize(d.text)) {
      auto it = counts.find(tok);
      if (it == counts.end()) continue;
      it->second[c] += 1.0;
      totals[c] += 1.0;
    }
  }

  const double n_docs = static_cast<double>(docs.size());
  const double v = static_cast<double>(vocabulary.size());
  for (std::size_t c = 0; c < k; ++c) {
    model.log_prior.push_back(std::log(static_cast<double>(doc_count[model.cities[c]]) / n_docs));
  }
  for (auto& [word, per_city] : counts) {
    std::vector<double> ll(k);
    for (std::size_t c = 0; c < k; ++c) ll[c] = std::log((per_city[c] + 1.0) / (totals[c] + v));
    model.log_likelihood.emplace(word, std::move(ll));
  }
  return model;
}

std::vector<double> liw_log_scores(const LiwModel& model, std::span<const std::string> texts) {
  std::vector<double> scores = model.log_prior;
  const TokenBag bag = bag_of_tokens(texts);
  for (const auto& [tok, count] : bag.counts) {
    auto it = model.log_likelihood.find(tok);
    if (it == model.log_likelihood.end()) continue;
    for (std::size_t c = 0; c < scores.size(); ++c) {
      scores[c] += static_cast<double>(count) * it->second[c];
    }
  }
  return scores;
}

LocationPrediction predict_location(std::span<const std::string> texts, const LiwModel& model) {
  if (model.cities.empty()) throw InvariantError("LIW model has no cities");
  const std::vector<double> scores = liw_log_scores(model, texts);
  std::size_t best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return {model.cities[best], model.coordinates[best]};
}

}  // namespace upf
