#include "upf/grouping.hpp"

#include <algorithm>

#include "upf/errors.hpp"
#include "upf/io.hpp"
#include "upf/rng.hpp"

namespace upf {

void GroupingConfig::validate() const {
  if (k < 1) throw ConfigError("grouping.k must be >= 1");
  if (!(t >= 0.0 && t < 0.5)) {
    throw ConfigError("grouping.t must lie in [0, 0.5), got " + io::format_double(t));
  }
}

std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::TopKOnlyFake: return "TopKOnlyFake";
    case Provenance::TopKOnlyReal: return "TopKOnlyReal";
    case Provenance::HighFR: return "HighFR";
    case Provenance::LowFR: return "LowFR";
  }
  return "?";
}

Provenance parse_provenance(std::string_view text) {
  for (auto p : {Provenance::TopKOnlyFake, Provenance::TopKOnlyReal, Provenance::HighFR,
                 Provenance::LowFR}) {
    if (to_string(p) == text) return p;
  }
  throw DataError("unknown provenance '" + std::string(text) + "'");
}

double fr_score(const SharingCounts& counts) {
  if (counts.n_fake < 0 || counts.n_real < 0) throw InvariantError("negative sharing count");
  if (counts.total() == 0) throw InvariantError("FR undefined for non-sharer");
  return static_cast<double>(counts.n_fake) / static_cast<double>(counts.total());
}

UserPartition partition_users(const Corpus& corpus) {
  UserPartition p;
  for (const auto& [id, user] : corpus.users()) {
    const SharingCounts c = sharing_counts(corpus, id);
    if (c.total() == 0) continue;
    if (c.n_real == 0) {
      p.only_fake.insert(id);
    } else if (c.n_fake == 0) {
      p.only_real.insert(id);
    } else {
      p.fake_and_real.insert(id);
    }
  }
  return p;
}

std::vector<std::string> top_k_absolute(const Corpus& corpus, const std::set<std::string>& subset,
                                        Label label, std::size_t k) {
  if (k < 1) throw InvariantError("top_k_absolute requires k >= 1");
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  ranked.reserve(subset.size());
  for (const auto& id : subset) {
    const SharingCounts c = sharing_counts(corpus, id);
    ranked.emplace_back(label == Label::Fake ? c.n_fake : c.n_real, id);
  }
  const std::size_t keep = std::min(k, ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep),
                    ranked.end(), [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  std::vector<std::string> out;
  out.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) out.push_back(ranked[i].second);
  return out;
}

GroupSelection select_groups(const Corpus& corpus, const GroupingConfig& config) {
  config.validate();
  const UserPartition partition = partition_users(corpus);
  if (partition.only_fake.empty()) throw InvariantError("no users in the only_fake partition");
  if (partition.only_real.empty()) throw InvariantError("no users in the only_real partition");

  std::map<std::string, Provenance> fake_side;
  std::map<std::string, Provenance> real_side;
  for (const auto& id : top_k_absolute(corpus, partition.only_fake, Label::Fake, config.k)) {
    fake_side.emplace(id, Provenance::TopKOnlyFake);
  }
  for (const auto& id : top_k_absolute(corpus, partition.only_real, Label::Real, config.k)) {
    real_side.emplace(id, Provenance::TopKOnlyReal);
  }
  for (const auto& id : partition.fake_and_real) {
    const double fr = fr_score(sharing_counts(corpus, id));
    if (fr >= 1.0 - config.t) {
      fake_side.emplace(id, Provenance::HighFR);
    } else if (fr <= config.t) {
      real_side.emplace(id, Provenance::LowFR);
    }
  }

  GroupSelection sel;
  sel.pre_sample_fake = fake_side.size();
  sel.pre_sample_real = real_side.size();
  const std::size_t target = std::min(fake_side.size(), real_side.size());

  auto downsample = [&](const std::map<std::string, Provenance>& side) {
    std::vector<std::string> ids;
    ids.reserve(side.size());
    for (const auto& [id, _] : side) ids.push_back(id);
    if (ids.size() > target) ids = sample_without_replacement(std::move(ids), target, config.sample_seed);
    return ids;
  };
  for (const auto& id : downsample(fake_side)) {
    sel.u_fake.insert(id);
    sel.provenance.emplace(id, fake_side.at(id));
  }
  for (const auto& id : downsample(real_side)) {
    sel.u_real.insert(id);
    sel.provenance.emplace(id, real_side.at(id));
  }
  return sel;
}

}  // namespace upf
