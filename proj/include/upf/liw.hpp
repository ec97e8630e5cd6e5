#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace upf {

struct Coordinates {
  double lat = 0.0;
  double lon = 0.0;

  bool operator==(const Coordinates&) const = default;
};

struct Gazetteer {
  std::map<std::string, Coordinates> cities;
};

// CSV "city,lat,lon" with that header.
Gazetteer load_gazetteer(const std::filesystem::path& path);

struct LiwDoc {
  std::string city;
  std::string text;
};

// JSONL {"city", "text"}.
std::vector<LiwDoc> load_liw_training(const std::filesystem::path& path);

// Location-indicative vocabulary: tokens seen at least `min_count` times whose
// most frequent city accounts for at least `min_share` of their occurrences.
std::set<std::string> select_liw_vocabulary(std::span<const LiwDoc> docs,
                                            std::size_t min_count = 3, double min_share = 0.5);

// Multinomial naive Bayes over the LIW vocabulary, add-one smoothed.
struct LiwModel {
  std::vector<std::string> cities;  // ascending
  std::vector<double> log_prior;
  std::map<std::string, std::vector<double>> log_likelihood;  // word -> per city
  std::vector<Coordinates> coordinates;
};

LiwModel train_liw(std::span<const LiwDoc> docs, const std::set<std::string>& vocabulary,
                   const Gazetteer& gazetteer);

// Unnormalized log posterior per city (same order as model.cities).
std::vector<double> liw_log_scores(const LiwModel& model, std::span<const std::string> texts);

struct LocationPrediction {
  std::string city;
  Coordinates coordinates;
};

// Argmax city, ties to the alphabetically first. Texts without vocabulary
// tokens fall back to the prior argmax.
LocationPrediction predict_location(std::span<const std::string> texts, const LiwModel& model);

}  // namespace upf
