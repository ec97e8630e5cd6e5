#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "upf/core.hpp"

namespace upf {

struct GroupingConfig {
  std::size_t k = 10000;
  // Width of the FR bands [0, t] and [1 - t, 1]; must stay below 0.5 so the
  // bands are disjoint.
  double t = 0.2;
  std::uint64_t sample_seed = 0;

  void validate() const;
};

struct UserPartition {
  std::set<std::string> only_fake;
  std::set<std::string> only_real;
  std::set<std::string> fake_and_real;
};

enum class Provenance { TopKOnlyFake, TopKOnlyReal, HighFR, LowFR };

std::string_view to_string(Provenance p);
Provenance parse_provenance(std::string_view text);

struct GroupSelection {
  std::set<std::string> u_fake;
  std::set<std::string> u_real;
  std::map<std::string, Provenance> provenance;
  // Group sizes before equal sampling.
  std::size_t pre_sample_fake = 0;
  std::size_t pre_sample_real = 0;

  bool operator==(const GroupSelection&) const = default;
};

// n_fake / (n_fake + n_real). Throws InvariantError for a user with no shares.
double fr_score(const SharingCounts& counts);

UserPartition partition_users(const Corpus& corpus);

// Users of `subset` ordered by the number of `label` news they shared
// (descending, ties by ascending user_id), truncated to k.
std::vector<std::string> top_k_absolute(const Corpus& corpus, const std::set<std::string>& subset,
                                        Label label, std::size_t k);

// U(f) = TopK(only_fake) + mixed users with FR >= 1 - t;
// U(r) = TopK(only_real) + mixed users with FR <= t.
// The larger group is then downsampled (seeded) to the size of the smaller.
GroupSelection select_groups(const Corpus& corpus, const GroupingConfig& config);

}  // namespace upf
